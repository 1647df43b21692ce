#pragma once

#include <cmath>
#include <map>

#include "vocseg/model/network.hpp"

namespace vocseg::train {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay AdamW with bias correction. State is keyed by
// parameter name; frozen parameters are never passed in, so they have no
// state. Parameters that unfreeze mid-training get fresh moments (and a
// fresh step count) on their first update.
template <class S>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  size_t tracked_parameters() const { return states_.size(); }

  void step(const std::vector<model::ParamEntry<S>*>& params) {
    for (model::ParamEntry<S>* p : params) {
      nc::Node<S>* node = p->tensor.node();
      State& st = states_[p->name];
      const size_t n = node->value.size();
      if (st.m.empty()) {
        st.m.assign(n, S(0));
        st.v.assign(n, S(0));
      }
      st.t += 1;
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(st.t));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(st.t));
      const bool has_grad = !node->grad.empty();
      for (size_t i = 0; i < n; ++i) {
        const double g = has_grad ? static_cast<double>(node->grad[i]) : 0.0;
        if (!std::isfinite(g))
          throw std::runtime_error("NaN gradient in parameter '" + p->name + "' at index " +
                                   std::to_string(i) + "; step aborted");
        double m = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g;
        double v = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g * g;
        st.m[i] = static_cast<S>(m);
        st.v[i] = static_cast<S>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        double x = node->value[i];
        x -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * x);
        node->value[i] = static_cast<S>(x);
      }
    }
  }

 private:
  struct State {
    std::vector<S> m, v;
    long t = 0;
  };
  AdamWConfig cfg_;
  std::map<std::string, State> states_;
};

}  // namespace vocseg::train
