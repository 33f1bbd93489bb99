#include "bitplan/netlab/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bitplan/common/error.hpp"
#include "bitplan/common/rng.hpp"
#include "bitplan/netlab/dual.hpp"

namespace bitplan::netlab {

namespace {

constexpr double kBnEps = 1e-5;

using Op = Network::Op;

std::vector<double> bn_stat(const ParamVector& p, const std::string& key, std::size_t n,
                            double fallback) {
  auto it = p.buffers.find(key);
  if (it == p.buffers.end()) return std::vector<double>(n, fallback);
  return it->second;
}

// Per-layer activations for the whole batch; acts[l] is the input of op l.
template <class T>
using Acts = std::vector<std::vector<T>>;

template <class T>
void forward_pass(const std::vector<Op>& ops, std::span<const T> theta, const ParamVector& pv,
                  const Matrix& inputs, Acts<T>& acts) {
  const std::size_t n = inputs.rows;
  acts.assign(ops.size() + 1, {});
  acts[0].assign(inputs.data.begin(), inputs.data.end());
  for (std::size_t l = 0; l < ops.size(); ++l) {
    const Op& op = ops[l];
    const std::vector<T>& in = acts[l];
    std::vector<T>& out = acts[l + 1];
    out.assign(n * op.out_dim, T(0.0));
    const Geometry& g = op.geometry;
    switch (op.kind) {
      case LayerKind::dense: {
        const T* w = theta.data() + op.offset;
        const T* b = w + g.in * g.out;
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t o = 0; o < g.out; ++o) {
            T acc = b[o];
            for (std::size_t i = 0; i < g.in; ++i) acc += w[o * g.in + i] * in[s * g.in + i];
            out[s * g.out + o] = acc;
          }
        break;
      }
      case LayerKind::conv: {
        const T* w = theta.data() + op.offset;
        const std::size_t k = g.kernel, ci_n = g.in_channels, co_n = g.out_channels;
        const T* b = w + co_n * ci_n * k * k;
        const std::size_t oh = g.in_h - k + 1, ow = g.in_w - k + 1;
        for (std::size_t s = 0; s < n; ++s) {
          const T* x = in.data() + s * op.in_dim;
          T* y = out.data() + s * op.out_dim;
          for (std::size_t co = 0; co < co_n; ++co)
            for (std::size_t r = 0; r < oh; ++r)
              for (std::size_t c = 0; c < ow; ++c) {
                T acc = b[co];
                for (std::size_t ci = 0; ci < ci_n; ++ci)
                  for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx)
                      acc += w[((co * ci_n + ci) * k + ky) * k + kx] *
                             x[(ci * g.in_h + r + ky) * g.in_w + c + kx];
                y[(co * oh + r) * ow + c] = acc;
              }
        }
        break;
      }
      case LayerKind::batchnorm: {
        const T* gamma = theta.data() + op.offset;
        const T* beta = gamma + g.channels;
        const auto mean = bn_stat(pv, op.name + ".mean", g.channels, 0.0);
        const auto var = bn_stat(pv, op.name + ".var", g.channels, 1.0);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t p = 0; p < op.in_dim; ++p) {
            const std::size_t c = p / g.spatial;
            const double inv = 1.0 / std::sqrt(var[c] + kBnEps);
            out[s * op.in_dim + p] = gamma[c] * ((in[s * op.in_dim + p] - T(mean[c])) * T(inv)) + beta[c];
          }
        break;
      }
      case LayerKind::activation: {
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (g.fn == ActivationFn::tanh) {
            using std::tanh;
            out[i] = tanh(in[i]);
          } else {
            out[i] = value_of(in[i]) > 0.0 ? in[i] : T(0.0);
          }
        }
        break;
      }
    }
  }
}

// Accumulates dloss/dtheta into dtheta given dloss/dlogits.
template <class T>
void backward_pass(const std::vector<Op>& ops, std::span<const T> theta, const ParamVector& pv,
                   const Acts<T>& acts, std::vector<T> dout, std::span<T> dtheta, std::size_t n) {
  for (std::size_t l = ops.size(); l-- > 0;) {
    const Op& op = ops[l];
    const std::vector<T>& in = acts[l];
    const std::vector<T>& out = acts[l + 1];
    std::vector<T> din(n * op.in_dim, T(0.0));
    const Geometry& g = op.geometry;
    switch (op.kind) {
      case LayerKind::dense: {
        const T* w = theta.data() + op.offset;
        T* dw = dtheta.data() + op.offset;
        T* db = dw + g.in * g.out;
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t o = 0; o < g.out; ++o) {
            const T d = dout[s * g.out + o];
            db[o] += d;
            for (std::size_t i = 0; i < g.in; ++i) {
              dw[o * g.in + i] += d * in[s * g.in + i];
              din[s * g.in + i] += w[o * g.in + i] * d;
            }
          }
        break;
      }
      case LayerKind::conv: {
        const T* w = theta.data() + op.offset;
        const std::size_t k = g.kernel, ci_n = g.in_channels, co_n = g.out_channels;
        T* dw = dtheta.data() + op.offset;
        T* db = dw + co_n * ci_n * k * k;
        const std::size_t oh = g.in_h - k + 1, ow = g.in_w - k + 1;
        for (std::size_t s = 0; s < n; ++s) {
          const T* x = in.data() + s * op.in_dim;
          T* dx = din.data() + s * op.in_dim;
          const T* dy = dout.data() + s * op.out_dim;
          for (std::size_t co = 0; co < co_n; ++co)
            for (std::size_t r = 0; r < oh; ++r)
              for (std::size_t c = 0; c < ow; ++c) {
                const T d = dy[(co * oh + r) * ow + c];
                db[co] += d;
                for (std::size_t ci = 0; ci < ci_n; ++ci)
                  for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                      const std::size_t wi = ((co * ci_n + ci) * k + ky) * k + kx;
                      const std::size_t xi = (ci * g.in_h + r + ky) * g.in_w + c + kx;
                      dw[wi] += d * x[xi];
                      dx[xi] += w[wi] * d;
                    }
              }
        }
        break;
      }
      case LayerKind::batchnorm: {
        const T* gamma = theta.data() + op.offset;
        T* dgamma = dtheta.data() + op.offset;
        T* dbeta = dgamma + g.channels;
        const auto mean = bn_stat(pv, op.name + ".mean", g.channels, 0.0);
        const auto var = bn_stat(pv, op.name + ".var", g.channels, 1.0);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t p = 0; p < op.in_dim; ++p) {
            const std::size_t c = p / g.spatial;
            const double inv = 1.0 / std::sqrt(var[c] + kBnEps);
            const std::size_t idx = s * op.in_dim + p;
            const T xhat = (in[idx] - T(mean[c])) * T(inv);
            dgamma[c] += dout[idx] * xhat;
            dbeta[c] += dout[idx];
            din[idx] = dout[idx] * gamma[c] * T(inv);
          }
        break;
      }
      case LayerKind::activation: {
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (g.fn == ActivationFn::tanh)
            din[i] = dout[i] * (T(1.0) - out[i] * out[i]);
          else
            din[i] = value_of(in[i]) > 0.0 ? dout[i] : T(0.0);
        }
        break;
      }
    }
    dout = std::move(din);
  }
}

// Mean softmax cross-entropy in generic scalar arithmetic.
template <class T>
T cross_entropy_t(std::span<const T> logits, std::size_t n, std::size_t k,
                  std::span<const int> labels, std::vector<T>* dlogits) {
  T total(0.0);
  if (dlogits) dlogits->assign(n * k, T(0.0));
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<T> e(k);
  for (std::size_t s = 0; s < n; ++s) {
    const T* z = logits.data() + s * k;
    double m = value_of(z[0]);
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, value_of(z[j]));
    T sum(0.0);
    for (std::size_t j = 0; j < k; ++j) {
      using std::exp;
      e[j] = exp(z[j] - T(m));
      sum += e[j];
    }
    using std::log;
    const auto y = static_cast<std::size_t>(labels[s]);
    total += log(sum) - (z[y] - T(m));
    if (dlogits)
      for (std::size_t j = 0; j < k; ++j)
        (*dlogits)[s * k + j] = (e[j] / sum - T(j == y ? 1.0 : 0.0)) * T(inv_n);
  }
  return total * T(inv_n);
}

std::vector<Op> compile(const ModelDescriptor& d, std::vector<Segment>& segs, std::size_t& in_dim,
                        std::size_t& out_dim) {
  std::vector<Op> ops;
  std::size_t offset = 0;
  std::size_t width = 0;
  for (const auto& l : d.layers) {
    if (!l.geometry)
      throw InputError("E_DESCRIPTOR",
                       "layer '" + l.name + "' has no geometry; descriptor is cost-only");
    Op op{l.kind, *l.geometry, l.name, offset, 0, 0};
    Geometry& g = op.geometry;
    std::size_t params = 0;
    std::vector<std::size_t> wshape;
    switch (l.kind) {
      case LayerKind::dense:
        op.in_dim = g.in;
        op.out_dim = g.out;
        params = g.in * g.out + g.out;
        wshape = {g.out, g.in};
        break;
      case LayerKind::conv:
        if (g.kernel == 0 || g.kernel > g.in_h || g.kernel > g.in_w)
          throw InputError("E_DESCRIPTOR", "conv '" + l.name + "' kernel does not fit its input");
        op.in_dim = g.in_channels * g.in_h * g.in_w;
        op.out_dim = g.out_channels * (g.in_h - g.kernel + 1) * (g.in_w - g.kernel + 1);
        params = g.out_channels * g.in_channels * g.kernel * g.kernel + g.out_channels;
        wshape = {g.out_channels, g.in_channels, g.kernel, g.kernel};
        break;
      case LayerKind::batchnorm:
        op.in_dim = op.out_dim = g.channels * g.spatial;
        params = 2 * g.channels;
        wshape = {g.channels};
        break;
      case LayerKind::activation:
        if (g.width == 0) g.width = width;
        op.in_dim = op.out_dim = g.width;
        break;
    }
    if (ops.empty()) in_dim = op.in_dim;
    else if (op.in_dim != width)
      throw InputError("E_SHAPE", "layer '" + l.name + "' expects input width " +
                                      std::to_string(op.in_dim) + " but previous layer emits " +
                                      std::to_string(width));
    if (static_cast<std::size_t>(l.param_count) != params)
      throw InputError("E_DESCRIPTOR", "layer '" + l.name + "' param_count " +
                                           std::to_string(l.param_count) + " != geometry's " +
                                           std::to_string(params));
    if (params > 0) {
      segs.push_back({l.name, offset, params, wshape, l.quantizable});
      offset += params;
    }
    width = op.out_dim;
    ops.push_back(std::move(op));
  }
  if (ops.empty()) throw InputError("E_DESCRIPTOR", "descriptor has no layers");
  out_dim = width;
  return ops;
}

}  // namespace

Network Network::from_descriptor(const ModelDescriptor& descriptor) {
  descriptor.validate();
  Network net;
  std::vector<Segment> segs;
  net.ops_ = compile(descriptor, segs, net.input_dim_, net.output_dim_);
  net.layout_ = ParamLayout(std::move(segs));
  net.descriptor_ = descriptor;
  return net;
}

ParamVector Network::init_params(std::uint64_t seed) const {
  ParamVector p(layout_);
  Rng rng(seed);
  for (const Op& op : ops_) {
    const Geometry& g = op.geometry;
    std::size_t fan_in = 0, fan_out = 0, count = 0;
    if (op.kind == LayerKind::dense) {
      fan_in = g.in;
      fan_out = g.out;
      count = g.in * g.out;
    } else if (op.kind == LayerKind::conv) {
      fan_in = g.in_channels * g.kernel * g.kernel;
      fan_out = g.out_channels * g.kernel * g.kernel;
      count = g.out_channels * fan_in;
    } else if (op.kind == LayerKind::batchnorm) {
      std::fill_n(p.values.begin() + static_cast<std::ptrdiff_t>(op.offset), g.channels, 1.0);
      p.buffers[op.name + ".mean"] = std::vector<double>(g.channels, 0.0);
      p.buffers[op.name + ".var"] = std::vector<double>(g.channels, 1.0);
      continue;
    } else {
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < count; ++i) p.values[op.offset + i] = u(rng);
  }
  return p;
}

void Network::check_inputs(const ParamVector& params, std::size_t cols) const {
  if (params.values.size() != layout_.size())
    throw InputError("E_SHAPE", "parameter vector has " + std::to_string(params.values.size()) +
                                    " entries, model expects " + std::to_string(layout_.size()));
  if (cols != input_dim_)
    throw InputError("E_SHAPE", "batch input dim " + std::to_string(cols) +
                                    " does not match model input dim " + std::to_string(input_dim_));
}

Matrix Network::logits(const ParamVector& params, const Matrix& inputs) const {
  check_inputs(params, inputs.cols);
  Acts<double> acts;
  forward_pass<double>(ops_, params.values, params, inputs, acts);
  Matrix out(inputs.rows, output_dim_);
  out.data = std::move(acts.back());
  return out;
}

double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* dlogits) {
  std::vector<double> d;
  const double loss = cross_entropy_t<double>(logits.data, logits.rows, logits.cols, labels,
                                              dlogits ? &d : nullptr);
  if (dlogits) {
    *dlogits = Matrix(logits.rows, logits.cols);
    dlogits->data = std::move(d);
  }
  return loss;
}

double squared_error(const Matrix& logits, std::span<const double> targets, Matrix* dlogits) {
  const std::size_t n = logits.rows;
  if (dlogits) *dlogits = Matrix(n, logits.cols);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double r = logits(s, 0) - targets[s];
    total += 0.5 * r * r;
    if (dlogits) (*dlogits)(s, 0) = r / static_cast<double>(n);
  }
  return total / static_cast<double>(n);
}

LogitLoss cross_entropy_loss() {
  return [](const Matrix& z, const Batch& b, Matrix& dz) { return cross_entropy(z, b.labels, &dz); };
}

LogitLoss squared_error_loss() {
  return [](const Matrix& z, const Batch& b, Matrix& dz) { return squared_error(z, b.targets, &dz); };
}

ForwardResult Network::forward(const ParamVector& params, const Batch& batch) const {
  batch.validate(output_dim_);
  ForwardResult r;
  r.logits = logits(params, batch.inputs);
  r.loss = cross_entropy(r.logits, batch.labels, nullptr);
  return r;
}

double Network::loss_and_grad(const ParamVector& params, const Batch& batch, const LogitLoss& loss,
                              std::vector<double>& grad_out) const {
  check_inputs(params, batch.inputs.cols);
  Acts<double> acts;
  forward_pass<double>(ops_, params.values, params, batch.inputs, acts);
  Matrix z(batch.size(), output_dim_);
  z.data = acts.back();
  Matrix dz;
  const double value = loss(z, batch, dz);
  grad_out.assign(layout_.size(), 0.0);
  backward_pass<double>(ops_, params.values, params, acts, std::move(dz.data), grad_out,
                        batch.size());
  return value;
}

ParamVector Network::grad(const ParamVector& params, const Batch& batch) const {
  batch.validate(output_dim_);
  ParamVector g(layout_);
  loss_and_grad(params, batch, cross_entropy_loss(), g.values);
  return g;
}

std::vector<double> Network::hvp(const ParamVector& params, const Batch& batch,
                                 std::span<const double> v) const {
  batch.validate(output_dim_);
  check_inputs(params, batch.inputs.cols);
  if (v.size() != layout_.size())
    throw InputError("E_SHAPE", "direction vector does not match the parameter layout");
  std::vector<Dual> theta(layout_.size());
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = Dual(params.values[i], v[i]);
  Acts<Dual> acts;
  forward_pass<Dual>(ops_, theta, params, batch.inputs, acts);
  std::vector<Dual> dz;
  cross_entropy_t<Dual>(acts.back(), batch.size(), output_dim_, batch.labels, &dz);
  std::vector<Dual> dtheta(layout_.size(), Dual(0.0));
  backward_pass<Dual>(ops_, theta, params, acts, std::move(dz), dtheta, batch.size());
  std::vector<double> out(dtheta.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dtheta[i].d;
  return out;
}

void Network::calibrate_batchnorm(ParamVector& params, const Matrix& inputs) const {
  check_inputs(params, inputs.cols);
  const std::size_t n = inputs.rows;
  if (n == 0) return;
  // Propagate one op at a time so each batchnorm sees statistics already
  // updated upstream.
  std::vector<double> x(inputs.data.begin(), inputs.data.end());
  for (std::size_t l = 0; l < ops_.size(); ++l) {
    const Op& op = ops_[l];
    if (op.kind == LayerKind::batchnorm) {
      const Geometry& g = op.geometry;
      std::vector<double> mean(g.channels, 0.0), var(g.channels, 0.0);
      const double count = static_cast<double>(n * g.spatial);
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t p = 0; p < op.in_dim; ++p) mean[p / g.spatial] += x[s * op.in_dim + p];
      for (double& m : mean) m /= count;
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t p = 0; p < op.in_dim; ++p) {
          const double d = x[s * op.in_dim + p] - mean[p / g.spatial];
          var[p / g.spatial] += d * d;
        }
      for (double& v : var) v /= count;
      params.buffers[op.name + ".mean"] = mean;
      params.buffers[op.name + ".var"] = var;
    }
    Matrix in(n, op.in_dim);
    in.data = std::move(x);
    Acts<double> acts;
    const std::vector<Op> single{op};
    forward_pass<double>(single, params.values, params, in, acts);
    x = std::move(acts.back());
  }
}

QuadraticModel::QuadraticModel(ParamLayout layout, std::vector<double> a)
    : layout_(std::move(layout)), a_(std::move(a)) {
  const std::size_t d = layout_.size();
  if (a_.size() != d * d) throw InputError("E_SHAPE", "quadratic matrix must be dim x dim");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (a_[i * d + j] != a_[j * d + i])
        throw InputError("E_SHAPE", "quadratic matrix must be symmetric");
}

ForwardResult QuadraticModel::forward(const ParamVector& params, const Batch&) const {
  const auto av = hvp(params, {}, params.values);
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += params.values[i] * av[i];
  return {{}, 0.5 * s};
}

ParamVector QuadraticModel::grad(const ParamVector& params, const Batch& batch) const {
  ParamVector g(layout_);
  g.values = hvp(params, batch, params.values);
  return g;
}

std::vector<double> QuadraticModel::hvp(const ParamVector&, const Batch&,
                                        std::span<const double> v) const {
  const std::size_t d = layout_.size();
  if (v.size() != d) throw InputError("E_SHAPE", "direction vector does not match the layout");
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += a_[i * d + j] * v[j];
    out[i] = acc;
  }
  return out;
}

ModelDescriptor mlp_descriptor(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                               std::size_t classes, ActivationFn fn) {
  ModelDescriptor d;
  std::size_t in = input_dim;
  std::vector<std::size_t> widths = hidden;
  widths.push_back(classes);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::size_t out = widths[i];
    Geometry g;
    g.in = in;
    g.out = out;
    const auto params = static_cast<std::int64_t>(in * out + out);
    d.layers.push_back({"fc" + std::to_string(i + 1), LayerKind::dense, params,
                        static_cast<std::int64_t>(in * out), true, g});
    if (i + 1 < widths.size()) {
      Geometry a;
      a.fn = fn;
      a.width = out;
      d.layers.push_back({"act" + std::to_string(i + 1), LayerKind::activation, 0, 0, false, a});
    }
    in = out;
  }
  return d;
}

ModelDescriptor convnet_descriptor(std::size_t side, std::size_t classes,
                                   const std::vector<std::size_t>& channels, bool batchnorm) {
  ModelDescriptor d;
  std::size_t cin = 1, h = side;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::string idx = std::to_string(i + 1);
    const std::size_t cout = channels[i], k = 3, oh = h - k + 1;
    Geometry g;
    g.in_channels = cin;
    g.out_channels = cout;
    g.kernel = k;
    g.in_h = g.in_w = h;
    const auto weights = static_cast<std::int64_t>(cout * cin * k * k);
    d.layers.push_back({"conv" + idx, LayerKind::conv, weights + static_cast<std::int64_t>(cout),
                        weights * static_cast<std::int64_t>(oh * oh), true, g});
    if (batchnorm) {
      Geometry b;
      b.channels = cout;
      b.spatial = oh * oh;
      d.layers.push_back({"bn" + idx, LayerKind::batchnorm, static_cast<std::int64_t>(2 * cout), 0,
                          false, b});
    }
    Geometry a;
    a.fn = ActivationFn::tanh;
    a.width = cout * oh * oh;
    d.layers.push_back({"act" + idx, LayerKind::activation, 0, 0, false, a});
    cin = cout;
    h = oh;
  }
  Geometry f;
  f.in = cin * h * h;
  f.out = classes;
  d.layers.push_back({"fc", LayerKind::dense, static_cast<std::int64_t>(f.in * f.out + f.out),
                      static_cast<std::int64_t>(f.in * f.out), true, f});
  return d;
}

}  // namespace bitplan::netlab
