#ifndef MECSIM_TESTS_INVARIANTS_HPP_
#define MECSIM_TESTS_INVARIANTS_HPP_

// Randomized model-invariant suites. Each property draws `cases` inputs from
// hand-rolled generators and counts the draws that break it; the first
// failure is kept as a readable counterexample.

#include <cstdint>
#include <string>
#include <vector>

namespace mecsim::testing {

struct PropertyResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string counterexample;

  bool ok() const { return failures == 0; }
};

std::vector<PropertyResult> geo_channel_properties(int cases, std::uint64_t seed);
std::vector<PropertyResult> task_cost_properties(int cases, std::uint64_t seed);
std::vector<PropertyResult> env_properties(int cases, std::uint64_t seed);

}  // namespace mecsim::testing

#endif  // MECSIM_TESTS_INVARIANTS_HPP_
