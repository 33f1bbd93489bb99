#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bitplan/netlab/data.hpp"
#include "bitplan/netlab/descriptor.hpp"
#include "bitplan/netlab/params.hpp"

namespace bitplan::netlab {

struct ForwardResult {
  Matrix logits;
  double loss = 0.0;
};

// Anything with a parameter layout, a scalar loss on a batch, and exact first
// and second derivatives. Implementations are read-only in the parameters and
// safe to call concurrently.
class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;

  virtual const ParamLayout& layout() const = 0;
  virtual ForwardResult forward(const ParamVector& params, const Batch& batch) const = 0;
  virtual ParamVector grad(const ParamVector& params, const Batch& batch) const = 0;
  // Exact Hessian-vector product of the loss.
  virtual std::vector<double> hvp(const ParamVector& params, const Batch& batch,
                                  std::span<const double> v) const = 0;
};

// Loss on logits: returns the scalar loss and fills dlogits with its gradient.
using LogitLoss =
    std::function<double(const Matrix& logits, const Batch& batch, Matrix& dlogits)>;

// Mean softmax cross-entropy.
double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* dlogits);
// Mean of 0.5 * (logit[0] - target)^2.
double squared_error(const Matrix& logits, std::span<const double> targets, Matrix* dlogits);

LogitLoss cross_entropy_loss();
LogitLoss squared_error_loss();

// Sequential feedforward network of dense / conv / batchnorm / activation
// layers. Conv layers are stride 1, no padding; activations between layers
// are flat per sample (channel-major for images).
class Network : public DifferentiableModel {
 public:
  // Requires every layer to carry geometry; throws InputError otherwise.
  static Network from_descriptor(const ModelDescriptor& descriptor);

  const ModelDescriptor& descriptor() const { return descriptor_; }
  const ParamLayout& layout() const override { return layout_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }

  // Scaled-uniform (Glorot) weights, zero biases, unit batchnorm scale.
  ParamVector init_params(std::uint64_t seed) const;

  Matrix logits(const ParamVector& params, const Matrix& inputs) const;
  ForwardResult forward(const ParamVector& params, const Batch& batch) const override;
  ParamVector grad(const ParamVector& params, const Batch& batch) const override;
  std::vector<double> hvp(const ParamVector& params, const Batch& batch,
                          std::span<const double> v) const override;

  // Loss and gradient under an arbitrary logit loss.
  double loss_and_grad(const ParamVector& params, const Batch& batch, const LogitLoss& loss,
                       std::vector<double>& grad_out) const;

  // Sets every batchnorm layer's running mean/variance to the statistics of
  // its input over `inputs`, propagating layer by layer.
  void calibrate_batchnorm(ParamVector& params, const Matrix& inputs) const;

  struct Op {
    LayerKind kind;
    Geometry geometry;
    std::string name;
    std::size_t offset = 0;  // into the flat parameter vector
    std::size_t in_dim = 0, out_dim = 0;
  };
  const std::vector<Op>& ops() const { return ops_; }

 private:
  void check_inputs(const ParamVector& params, std::size_t cols) const;

  std::vector<Op> ops_;
  ModelDescriptor descriptor_;
  ParamLayout layout_;
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
};

// Test subject with loss 0.5 * theta^T A theta (batch ignored) and the given
// layer segmentation; its Hessian is exactly A.
class QuadraticModel : public DifferentiableModel {
 public:
  // `a` is row-major dim x dim and must be symmetric.
  QuadraticModel(ParamLayout layout, std::vector<double> a);

  const ParamLayout& layout() const override { return layout_; }
  ForwardResult forward(const ParamVector& params, const Batch& batch) const override;
  ParamVector grad(const ParamVector& params, const Batch& batch) const override;
  std::vector<double> hvp(const ParamVector& params, const Batch& batch,
                          std::span<const double> v) const override;

  const std::vector<double>& matrix() const { return a_; }

 private:
  ParamLayout layout_;
  std::vector<double> a_;
};

// Toy model zoo.
ModelDescriptor mlp_descriptor(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                               std::size_t classes, ActivationFn fn = ActivationFn::tanh);
// 3 conv layers (3x3, each followed by batchnorm + tanh) and a dense head on
// single-channel side x side images.
ModelDescriptor convnet_descriptor(std::size_t side, std::size_t classes,
                                   const std::vector<std::size_t>& channels = {4, 8, 8},
                                   bool batchnorm = true);

}  // namespace bitplan::netlab
