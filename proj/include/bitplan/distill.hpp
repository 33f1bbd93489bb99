#pragma once

#include <span>

#include "bitplan/netlab/trainer.hpp"

namespace bitplan::distill {

struct DistillConfig {
  double temperature = 4.0;
  double alpha = 0.9;  // weight on the hard-label loss

  void validate() const;
  Json to_json() const;
  static DistillConfig from_json(const Json& j);
};

// Batch mean of KL(softmax(teacher/T) || softmax(student/T)).
double soft_kl(const netlab::Matrix& student, const netlab::Matrix& teacher, double temperature);

// alpha * CE(student, labels) + (1 - alpha) * T^2 * KL, both batch means.
// Fills dlogits with the gradient w.r.t. student logits when given.
double kd_loss(const netlab::Matrix& student, const netlab::Matrix& teacher, std::span<const int> labels,
               const DistillConfig& cfg, netlab::Matrix* dlogits = nullptr);

// Trainer loss that runs the teacher on each batch.
netlab::LogitLoss kd_objective(const netlab::Network& teacher, const netlab::ParamVector& teacher_params,
                               const DistillConfig& cfg);

// netlab::train with the distillation objective; `options.loss` is replaced,
// `options.transform` (e.g. fake quantization of the student) is kept.
netlab::TrainResult distill_train(const netlab::Network& student, netlab::ParamVector student_init,
                                  const netlab::Network& teacher, const netlab::ParamVector& teacher_params,
                                  const netlab::Dataset& data, const netlab::TrainSchedule& schedule,
                                  const DistillConfig& cfg, netlab::TrainOptions options = {});

}  // namespace bitplan::distill
