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

#include <filesystem>
#include <optional>

#include "xmt/adam.hpp"
#include "xmt/decoding.hpp"
#include "xmt/model.hpp"
#include "xmt/noising.hpp"

namespace xmt {

struct CurvePoint {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double dropout = 0.0;
};

struct PretrainSchedule {
  /// (fraction of total steps, dropout) stages; thresholds strictly
  /// increasing in [0, 1). The large-run recipe (0.1 until half way, then
  /// 0.05, then 0 for the last fifth) expressed as fractions so it scales.
  std::vector<std::pair<double, double>> dropout_stages{
      {0.0, 0.1}, {0.5, 0.05}, {0.8, 0.0}};
  int token_budget = 4096;
  int max_len = 512;
  double label_smoothing = 0.0;
  int checkpoint_interval = 0;  // steps between step_<N>.ckpt files; 0 = off
};

double dropout_at(const PretrainSchedule& sched, int step, int total_steps);

struct PretrainResult {
  std::vector<CurvePoint> curve;
  PackStats pack_stats;
};

/// Denoising pre-training: every step samples a language by its effective
/// probability, draws packed instances up to the token budget, noises them,
/// and takes one Adam step on the smoothed NLL of reconstructing the
/// original text.
PretrainResult pretrain(Model& model, const CorpusCollection& collection,
                        const SamplingWeights& weights,
                        const Vocabulary& vocab, const NoiseConfig& noise,
                        const PretrainSchedule& sched,
                        const OptimizerConfig& opt, std::uint64_t seed,
                        const std::filesystem::path* ckpt_dir = nullptr);

struct FinetuneSchedule {
  double dropout = 0.3;
  double label_smoothing = 0.2;
  int warmup_steps = 2500;
  double max_lr = 3e-5;
  int max_updates = 40000;  // 100k for the high-resource preset

  int token_budget = 4096;
  int max_len = 128;
  int eval_interval = 100;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-6;
  double weight_decay = 0.0;

  static FinetuneSchedule high_resource() {
    FinetuneSchedule s;
    s.max_updates = 100000;
    return s;
  }

  OptimizerConfig optimizer() const {
    OptimizerConfig o;
    o.beta1 = beta1;
    o.beta2 = beta2;
    o.epsilon = epsilon;
    o.weight_decay = weight_decay;
    o.max_lr = max_lr;
    o.warmup_steps = warmup_steps;
    o.total_steps = std::max(max_updates, warmup_steps + 1);
    return o;
  }
};

struct ValPoint {
  int step = 0;
  double train_loss = 0.0;
  double val_nll = 0.0;
  double lr = 0.0;
};

struct FinetuneResult {
  std::vector<ValPoint> curve;
  int best_step = 0;
  double best_val_nll = 0.0;
};

/// Teacher-forced translation fine-tuning, encoder fed
/// (source </S> <src LID>) and decoder predicting (target </S> <tgt LID>).
/// On return `model` holds the checkpoint with minimum validation NLL.
FinetuneResult finetune(Model& model, const ParallelCorpus& train,
                        const ParallelCorpus& val, const Vocabulary& vocab,
                        const FinetuneSchedule& sched, std::uint64_t seed,
                        const std::filesystem::path* ckpt_dir = nullptr);

/// (source </S> <src LID>) -> (target </S> <tgt LID>) triple with the
/// decoder input rotated per the shift law.
NoisedExample make_translation_example(const Vocabulary& vocab,
                                       const std::string& source,
                                       const std::string& target,
                                       const LanguageCode& source_lang,
                                       const LanguageCode& target_lang,
                                       int max_len);

/// Deterministic tail split: the last ceil(fraction * n) pairs become the
/// validation set.
std::pair<ParallelCorpus, ParallelCorpus> split_validation(
    const ParallelCorpus& corpus, double fraction);

void write_pretrain_curve_tsv(const std::filesystem::path& path,
                              const std::vector<CurvePoint>& curve);
void write_finetune_curve_tsv(const std::filesystem::path& path,
                              const std::vector<ValPoint>& curve);

}  // namespace xmt
