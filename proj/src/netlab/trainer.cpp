#include "bitplan/netlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bitplan/common/error.hpp"
#include "bitplan/common/rng.hpp"

namespace bitplan::netlab {

void TrainSchedule::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("E_SCHEDULE", "learning_rate must be > 0");
  if (weight_decay < 0.0) throw InputError("E_SCHEDULE", "weight_decay must be >= 0");
  if (batch_size == 0) throw InputError("E_SCHEDULE", "batch_size must be > 0");
  if (epochs < 0) throw InputError("E_SCHEDULE", "epochs must be >= 0");
  if (early_stop_patience && *early_stop_patience <= 0)
    throw InputError("E_SCHEDULE", "early_stop_patience must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw InputError("E_SCHEDULE", "momentum must be in [0,1)");
}

double evaluate(const Network& net, const ParamVector& params, const Batch& batch) {
  if (batch.size() == 0) throw InputError("E_EMPTY_DATASET", "cannot evaluate on an empty dataset");
  const Matrix z = net.logits(params, batch.inputs);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < z.rows; ++s) {
    const auto row = z.row(s);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == batch.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.rows);
}

TrainResult train(const Network& net, ParamVector init, const Dataset& data,
                  const TrainSchedule& schedule, const TrainOptions& options) {
  schedule.validate();
  data.train.validate(data.num_classes);
  data.val.validate(data.num_classes);
  TrainResult result{init, {}};
  if (schedule.epochs == 0) return result;
  if (data.train.size() == 0) throw InputError("E_EMPTY_DATASET", "training split is empty");

  const LogitLoss loss = options.loss ? options.loss : cross_entropy_loss();
  const auto effective = [&](const ParamVector& p) {
    return options.transform ? options.transform(p) : p;
  };
  const Batch& val = data.val.size() > 0 ? data.val : data.train;

  ParamVector params = std::move(init);
  std::vector<double> velocity(params.values.size(), 0.0), g;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(schedule.seed);

  double best_acc = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    {
      ParamVector eff = effective(params);
      net.calibrate_batchnorm(eff, data.train.inputs);
      params.buffers = eff.buffers;
    }
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      const Batch mb = data.train.subset(std::span(order).subspan(start, end - start));
      const double value = net.loss_and_grad(effective(params), mb, loss, g);
      if (!std::isfinite(value))
        throw Error("E_NAN_LOSS", "non-finite loss at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(batch_index));
      for (std::size_t i = 0; i < params.values.size(); ++i) {
        velocity[i] = schedule.momentum * velocity[i] + g[i] + schedule.weight_decay * params.values[i];
        params.values[i] -= schedule.learning_rate * velocity[i];
      }
      loss_sum += value * static_cast<double>(end - start);
      seen += end - start;
    }
    const double acc = evaluate(net, effective(params), val);
    result.history.push_back({epoch, loss_sum / static_cast<double>(seen), acc});
    if (acc > best_acc) {
      best_acc = acc;
      result.params = params;
      since_best = 0;
    } else if (schedule.early_stop_patience && ++since_best >= *schedule.early_stop_patience) {
      break;
    }
  }
  return result;
}

double minimize(const Network& net, ParamVector& params, const Batch& batch, const LogitLoss& loss,
                int steps, double learning_rate, double momentum) {
  std::vector<double> velocity(params.values.size(), 0.0), g;
  double value = 0.0;
  for (int s = 0; s < steps; ++s) {
    value = net.loss_and_grad(params, batch, loss, g);
    if (!std::isfinite(value))
      throw Error("E_NAN_LOSS", "non-finite loss at step " + std::to_string(s));
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      velocity[i] = momentum * velocity[i] + g[i];
      params.values[i] -= learning_rate * velocity[i];
    }
  }
  std::vector<double> unused;
  return net.loss_and_grad(params, batch, loss, unused);
}

}  // namespace bitplan::netlab
