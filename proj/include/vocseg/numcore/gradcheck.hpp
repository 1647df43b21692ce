#pragma once

#include <functional>

#include "vocseg/common/rng.hpp"
#include "vocseg/numcore/ops.hpp"

// Central finite-difference oracle. Runs in double; finite differences are
// unreliable in 32-bit.

namespace vocseg::nc {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  size_t coords_checked = 0;
  std::string worst;  // "leaf#k[i]" of the worst coordinate
};

// Checks d(forward())/d(leaf[i]) against (f(x+h) - f(x-h)) / 2h on a random
// subset of coordinates per leaf. rel err uses max(|analytic|, |numeric|, floor).
inline GradCheckReport check_gradients(const std::function<TensorT<double>()>& forward,
                                       const std::vector<TensorT<double>>& leaves,
                                       int coords_per_leaf = 8, double h = 1e-4,
                                       uint64_t seed = 1234) {
  for (auto& l : leaves) const_cast<TensorT<double>&>(l).zero_grad();
  TensorT<double> loss = forward();
  backward(loss);

  GradCheckReport rep;
  rng::Stream pick(seed, "gradcheck");
  for (size_t li = 0; li < leaves.size(); ++li) {
    TensorT<double> leaf = leaves[li];
    std::vector<double> analytic = leaf.grad();
    const size_t n = leaf.size();
    const int m = std::min<int>(coords_per_leaf, static_cast<int>(n));
    for (int c = 0; c < m; ++c) {
      const size_t i = m == static_cast<int>(n)
                           ? static_cast<size_t>(c)
                           : static_cast<size_t>(pick.integer(0, static_cast<int64_t>(n) - 1));
      const double orig = leaf.values()[i];
      leaf.values()[i] = orig + h;
      const double fp = forward().scalar();
      leaf.values()[i] = orig - h;
      const double fm = forward().scalar();
      leaf.values()[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      const double rel = abs_err / denom;
      rep.coords_checked++;
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst = "leaf#" + std::to_string(li) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

}  // namespace vocseg::nc
