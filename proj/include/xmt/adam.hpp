// Copyright 2026 The xmt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>

#include "xmt/error.hpp"
#include "xmt/model.hpp"

namespace xmt {

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-6;
  double max_lr = 1e-3;
  int warmup_steps = 1;
  int total_steps = 1;
  double weight_decay = 0.0;

  void validate() const {
    if (!(warmup_steps > 0 && warmup_steps < total_steps))
      throw Error::validation("require 0 < warmup_steps < total_steps");
    if (!(max_lr > 0)) throw Error::validation("max_lr must be positive");
  }
};

/// Linear warmup from 0 to max_lr over warmup_steps, then linear decay to 0
/// at total_steps.
inline double lr_at(const OptimizerConfig& cfg, int step) {
  cfg.validate();
  if (step < 0 || step > cfg.total_steps)
    throw Error::validation("step outside [0, total_steps]");
  if (step <= cfg.warmup_steps)
    return cfg.max_lr * static_cast<double>(step) /
           static_cast<double>(cfg.warmup_steps);
  return cfg.max_lr *
         static_cast<double>(cfg.total_steps - step) /
         static_cast<double>(cfg.total_steps - cfg.warmup_steps);
}

/// Bias-corrected Adam; weight decay enters as an L2 term on the gradient.
template <class Scalar>
class Adam {
 public:
  Adam(const OptimizerConfig& cfg, const ModelConfig& model_cfg)
      : cfg_(cfg),
        m_(make_param_set<Scalar>(model_cfg)),
        v_(make_param_set<Scalar>(model_cfg)) {}

  void step(ParamSet<Scalar>& params, const ParamSet<Scalar>& grads,
            double lr) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg_.beta2);
    const Scalar eps = static_cast<Scalar>(cfg_.epsilon);
    const Scalar wd = static_cast<Scalar>(cfg_.weight_decay);
    const Scalar c1 =
        Scalar(1) / (Scalar(1) - std::pow(b1, static_cast<Scalar>(t_)));
    const Scalar c2 =
        Scalar(1) / (Scalar(1) - std::pow(b2, static_cast<Scalar>(t_)));

    // The three sets share one structure, so visiting them in lockstep by
    // collecting pointers keeps tensors aligned by construction.
    std::vector<MatX<Scalar>*> ps, ms, vs;
    std::vector<const MatX<Scalar>*> gs;
    params.visit([&](const std::string&, MatX<Scalar>& t) { ps.push_back(&t); });
    grads.visit(
        [&](const std::string&, const MatX<Scalar>& t) { gs.push_back(&t); });
    m_.visit([&](const std::string&, MatX<Scalar>& t) { ms.push_back(&t); });
    v_.visit([&](const std::string&, MatX<Scalar>& t) { vs.push_back(&t); });

    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto p = ps[i]->array();
      MatX<Scalar> g = *gs[i];
      if (wd != Scalar(0)) g.array() += wd * p;
      ms[i]->array() = b1 * ms[i]->array() + (Scalar(1) - b1) * g.array();
      vs[i]->array() =
          b2 * vs[i]->array() + (Scalar(1) - b2) * g.array().square();
      p -= static_cast<Scalar>(lr) * (ms[i]->array() * c1) /
           ((vs[i]->array() * c2).sqrt() + eps);
    }
  }

  int steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  ParamSet<Scalar> m_, v_;
  int t_ = 0;
};

}  // namespace xmt
