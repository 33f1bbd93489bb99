#include "bitplan/plan.hpp"

namespace bitplan {

std::vector<int> BitPlan::bits() const {
  std::vector<int> out;
  out.reserve(assignment.size());
  for (const auto& [name, b] : assignment) out.push_back(b);
  return out;
}

int BitPlan::bit_sum() const {
  int s = 0;
  for (const auto& [name, b] : assignment) s += b;
  return s;
}

}  // namespace bitplan
