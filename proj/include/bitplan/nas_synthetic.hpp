#pragma once

#include "bitplan/proxy_nas.hpp"

namespace bitplan::nas {

// Channel / BN / Distill switches, a scheme choice and two bit choices:
// 2^6 = 64 configs.
HparamSpace synthetic_space();

// Deterministic score in [0,1] with a unique maximum at per_channel,
// distill, symmetric, 8/8 bits and no bn_fold.
double synthetic_score(const HparamSpace& space, const HparamConfig& config);

// full_eval returns the score; short_eval adds config-specific noise of the
// given amplitude.
Evaluator synthetic_evaluator(const HparamSpace& space, double noise = 0.04);

// Score at quantile q of the whole space (q = 0.95 over 64 configs is the
// 4th best).
double synthetic_quantile(const HparamSpace& space, double q);

}  // namespace bitplan::nas
