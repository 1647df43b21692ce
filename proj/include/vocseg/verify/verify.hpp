#pragma once

#include <string>
#include <vector>

namespace vocseg::verify {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

// Finite-difference oracle over every numcore primitive (rel err < 1e-4,
// h=1e-4, 64-bit) and the full composite training loss (rel err < 1e-3).
SuiteResult verify_gradients();

// Accelerated ASSD/HD95 against the brute-force oracle on random mask
// pairs (<= 32x32, 2-5 classes, tolerance 1e-9 mm) and overlap metrics
// against naive counting.
SuiteResult verify_metrics(int instances = 200);

// Analytic anchors: dice == 2*iou/(1+iou), ln B contrastive anchor,
// perfect-prediction soft Dice, uniform-logit cross entropy.
SuiteResult verify_losses();

std::string format(const SuiteResult& r);

}  // namespace vocseg::verify
