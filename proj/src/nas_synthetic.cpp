#include "bitplan/nas_synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "bitplan/common/rng.hpp"

namespace bitplan::nas {

HparamSpace synthetic_space() {
  HparamSpace s;
  s.dimensions.push_back({"per_channel", DimensionKind::boolean, {}, {}});
  s.dimensions.push_back({"bn_fold", DimensionKind::boolean, {}, {}});
  s.dimensions.push_back({"distill", DimensionKind::boolean, {}, {}});
  s.dimensions.push_back({"scheme", DimensionKind::categorical, {"symmetric", "asymmetric"}, {}});
  s.dimensions.push_back({"bits_early", DimensionKind::bit_choice, {}, {4, 8}});
  s.dimensions.push_back({"bits_late", DimensionKind::bit_choice, {}, {4, 8}});
  return s;
}

double synthetic_score(const HparamSpace& s, const HparamConfig& c) {
  const double pc = get_bool(s, c, "per_channel");
  const double bn = get_bool(s, c, "bn_fold");
  const double kd = get_bool(s, c, "distill");
  const double sym = get_string(s, c, "scheme") == "symmetric";
  const double e8 = get_int(s, c, "bits_early") == 8;
  const double l8 = get_int(s, c, "bits_late") == 8;
  return 0.40 + 0.12 * pc - 0.03 * bn + 0.08 * kd + 0.04 * sym + 0.10 * e8 + 0.14 * l8 + 0.05 * pc * kd -
         0.04 * bn * (1.0 - pc) + 0.03 * e8 * l8;
}

Evaluator synthetic_evaluator(const HparamSpace& s, double noise) {
  Evaluator ev;
  ev.short_eval = [s, noise](const HparamConfig& c, int) {
    const double u = static_cast<double>(splitmix64(config_hash(s, c)) >> 11) / 9007199254740992.0;
    return std::clamp(synthetic_score(s, c) + noise * (2.0 * u - 1.0), 0.0, 1.0);
  };
  ev.full_eval = [s](const HparamConfig& c, int) { return synthetic_score(s, c); };
  return ev;
}

double synthetic_quantile(const HparamSpace& s, double q) {
  std::vector<double> all;
  for (std::uint64_t i = 0; i < s.size(); ++i) all.push_back(synthetic_score(s, config_from_index(s, i)));
  std::sort(all.begin(), all.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(all.size())));
  return all[std::clamp<std::size_t>(idx, 1, all.size()) - 1];
}

}  // namespace bitplan::nas
