#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dqg {

struct GradCheckResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass() const { return error < tolerance; }
};

// Central-difference checks of every differentiable op on random inputs of
// at most 16 elements per tensor.
std::vector<GradCheckResult> op_gradient_checks(std::uint64_t seed, double eps = 1e-6,
                                                double tolerance = 1e-6);

// Full model loss (encode, initial state, three decode steps with copying
// of an out-of-vocabulary token) under DLPH with global difficulty control,
// on dims d_w=4, d_p=3, d_d=2, H=5 and a 4-token sentence. Weights are drawn
// from +-0.5 so few gradient entries sit at the finite-difference noise floor.
GradCheckResult composite_gradient_check(std::uint64_t seed, double eps = 1e-4,
                                         double tolerance = 1e-4);

}  // namespace dqg
