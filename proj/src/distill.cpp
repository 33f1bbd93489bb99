#include "bitplan/distill.hpp"

#include <algorithm>
#include <cmath>

#include "bitplan/common/error.hpp"

namespace bitplan::distill {

namespace {

// Tempered log-softmax of one row.
void log_softmax(std::span<const double> z, double t, std::vector<double>& out) {
  out.resize(z.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z) mx = std::max(mx, v / t);
  double s = 0.0;
  for (double v : z) s += std::exp(v / t - mx);
  const double lse = mx + std::log(s);
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] / t - lse;
}

void check_shapes(const netlab::Matrix& a, const netlab::Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw InputError("E_SHAPE", "student and teacher logits differ in shape");
}

}  // namespace

void DistillConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InputError("E_CONFIG", "distillation temperature must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("E_CONFIG", "distillation alpha must be in [0,1]");
}

Json DistillConfig::to_json() const { return {{"temperature", temperature}, {"alpha", alpha}}; }

DistillConfig DistillConfig::from_json(const Json& j) {
  DistillConfig c;
  c.temperature = j.value("temperature", c.temperature);
  c.alpha = j.value("alpha", c.alpha);
  c.validate();
  return c;
}

double soft_kl(const netlab::Matrix& student, const netlab::Matrix& teacher, double temperature) {
  check_shapes(student, teacher);
  if (!(temperature > 0.0)) throw InputError("E_CONFIG", "distillation temperature must be > 0");
  std::vector<double> ls, lt;
  double total = 0.0;
  for (std::size_t r = 0; r < student.rows; ++r) {
    log_softmax(student.row(r), temperature, ls);
    log_softmax(teacher.row(r), temperature, lt);
    for (std::size_t k = 0; k < student.cols; ++k) total += std::exp(lt[k]) * (lt[k] - ls[k]);
  }
  return student.rows == 0 ? 0.0 : total / static_cast<double>(student.rows);
}

double kd_loss(const netlab::Matrix& student, const netlab::Matrix& teacher, std::span<const int> labels,
               const DistillConfig& cfg, netlab::Matrix* dlogits) {
  cfg.validate();
  check_shapes(student, teacher);
  const double t = cfg.temperature, n = static_cast<double>(student.rows);
  netlab::Matrix dce;
  const double ce = netlab::cross_entropy(student, labels, dlogits ? &dce : nullptr);
  const double kl = soft_kl(student, teacher, t);
  const double loss = cfg.alpha * ce + (1.0 - cfg.alpha) * t * t * kl;
  if (dlogits) {
    // d(T^2 KL)/dz = T (softmax(z/T) - softmax(teacher/T)).
    *dlogits = netlab::Matrix(student.rows, student.cols);
    std::vector<double> ls, lt;
    for (std::size_t r = 0; r < student.rows; ++r) {
      log_softmax(student.row(r), t, ls);
      log_softmax(teacher.row(r), t, lt);
      for (std::size_t k = 0; k < student.cols; ++k) {
        const double soft = t * (std::exp(ls[k]) - std::exp(lt[k])) / n;
        (*dlogits)(r, k) = cfg.alpha * dce(r, k) + (1.0 - cfg.alpha) * soft;
      }
    }
  }
  return loss;
}

netlab::LogitLoss kd_objective(const netlab::Network& teacher, const netlab::ParamVector& teacher_params,
                               const DistillConfig& cfg) {
  cfg.validate();
  return [&teacher, &teacher_params, cfg](const netlab::Matrix& z, const netlab::Batch& b, netlab::Matrix& dz) {
    const netlab::Matrix zt = teacher.logits(teacher_params, b.inputs);
    return kd_loss(z, zt, b.labels, cfg, &dz);
  };
}

netlab::TrainResult distill_train(const netlab::Network& student, netlab::ParamVector student_init,
                                  const netlab::Network& teacher, const netlab::ParamVector& teacher_params,
                                  const netlab::Dataset& data, const netlab::TrainSchedule& schedule,
                                  const DistillConfig& cfg, netlab::TrainOptions options) {
  if (teacher.output_dim() != student.output_dim())
    throw InputError("E_SHAPE", "teacher and student disagree on the number of classes");
  options.loss = kd_objective(teacher, teacher_params, cfg);
  return netlab::train(student, std::move(student_init), data, schedule, options);
}

}  // namespace bitplan::distill
