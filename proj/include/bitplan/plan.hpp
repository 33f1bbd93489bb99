#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bitplan/common/json.hpp"

namespace bitplan {

// One bit-width per quantizable layer.
struct BitPlan {
  std::vector<std::pair<std::string, int>> assignment;
  double objective = 0.0;

  std::vector<int> bits() const;
  int bit_sum() const;
  bool operator==(const BitPlan&) const = default;
};

}  // namespace bitplan
