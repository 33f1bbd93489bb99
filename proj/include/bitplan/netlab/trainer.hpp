#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bitplan/netlab/network.hpp"

namespace bitplan::netlab {

struct TrainSchedule {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  std::size_t batch_size = 128;
  int epochs = 1;
  std::optional<int> early_stop_patience;
  double momentum = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  ParamVector params;
  std::vector<EpochRecord> history;
};

struct TrainOptions {
  // Defaults to cross-entropy against batch labels.
  LogitLoss loss;
  // Maps stored parameters to the parameters used in the forward pass
  // (e.g. fake quantization). Gradients pass straight through to the stored
  // parameters.
  std::function<ParamVector(const ParamVector&)> transform;
};

// Mini-batch SGD with optional momentum and L2 weight decay. Batchnorm
// statistics are recalibrated on the training split at the start of each
// epoch. Returns the parameters of the best validation epoch.
// Throws Error("E_NAN_LOSS") naming epoch and batch on a non-finite loss.
TrainResult train(const Network& net, ParamVector init, const Dataset& data,
                  const TrainSchedule& schedule, const TrainOptions& options = {});

// Top-1 accuracy of argmax(logits). Throws InputError on an empty batch.
double evaluate(const Network& net, const ParamVector& params, const Batch& batch);

// `steps` full-batch gradient steps on one batch; returns the final loss.
double minimize(const Network& net, ParamVector& params, const Batch& batch,
                const LogitLoss& loss, int steps, double learning_rate, double momentum);

}  // namespace bitplan::netlab
