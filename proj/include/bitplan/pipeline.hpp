#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bitplan/distill.hpp"
#include "bitplan/netlab/trainer.hpp"
#include "bitplan/plan.hpp"
#include "bitplan/proxy_nas.hpp"
#include "bitplan/quantizer.hpp"

namespace bitplan::pipeline {

using BitMap = std::map<std::string, int>;

BitMap bit_map(const BitPlan& plan);
BitMap uniform_bits(const netlab::ParamLayout& layout, int bits);

// Fake-quantizes the weight part of every layer named in `bits`; biases,
// batchnorm and unlisted layers are copied through.
netlab::ParamVector quantize_weights(const netlab::ParamVector& params, const BitMap& bits,
                                     const quant::QuantSpec& spec);
std::function<netlab::ParamVector(const netlab::ParamVector&)> fake_quant_transform(BitMap bits,
                                                                                   quant::QuantSpec spec);

struct Folded {
  netlab::Network net;
  netlab::ParamVector params;
};

// Merges every batchnorm that directly follows a conv into the conv weights
// and bias, using the stored running statistics.
Folded fold_batchnorm(const netlab::Network& net, const netlab::ParamVector& params);

struct QuantRecipe {
  quant::QuantSpec spec;  // bits field unused; per-layer widths come from `bits`
  BitMap bits;
  bool bn_fold = false;
  bool distill = false;
  distill::DistillConfig kd;

  Json to_json() const;
};

// Applies the recipe to a trained model and returns validation accuracy of
// the fake-quantized result. With epochs > 0 the model is fine-tuned with
// straight-through fake quantization first (distilled from the unquantized
// model when recipe.distill is set); otherwise batchnorm statistics are
// recalibrated on the quantized weights.
double evaluate_recipe(const netlab::Network& net, const netlab::ParamVector& trained, const netlab::Dataset& data,
                       const QuantRecipe& recipe, int epochs, const netlab::TrainSchedule& finetune);

struct ToyTaskConfig {
  std::size_t side = 8;
  std::size_t classes = 10;
  std::size_t per_class = 80;
  double noise = 1.6;
  std::vector<std::size_t> channels = {4, 8, 8};
  int epochs = 15;
  std::uint64_t seed = 0;
};

struct ToyTask {
  netlab::Network net;
  netlab::Dataset data;
  netlab::ParamVector trained;
  double accuracy = 0.0;
  netlab::TrainSchedule finetune;
};

// Conv net with batchnorm on synthetic stroke images, trained in full
// precision.
ToyTask make_toy_task(const ToyTaskConfig& config);
netlab::TrainSchedule default_schedule(std::uint64_t seed);
// Lower learning rate for quantization-aware fine-tuning.
netlab::TrainSchedule finetune_schedule(std::uint64_t seed);

// Reads per_channel, bn_fold, distill (booleans), clip and scheme
// (categorical), `bits` (all layers) and `bits.<layer>` (bit choices).
// Unnamed settings keep the base spec / 8 bits.
QuantRecipe recipe_from_config(const nas::HparamSpace& space, const nas::HparamConfig& config,
                               const std::vector<std::string>& layers, const quant::QuantSpec& base = {});

// short/full evaluation = evaluate_recipe with that many fine-tune epochs.
nas::Evaluator recipe_evaluator(const ToyTask& task, const nas::HparamSpace& space);

}  // namespace bitplan::pipeline
