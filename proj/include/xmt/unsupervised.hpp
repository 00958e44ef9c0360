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

#include <optional>

#include "xmt/bleu.hpp"
#include "xmt/decoding.hpp"
#include "xmt/training.hpp"

namespace xmt {

struct EvalScores {
  BleuReport bleu;
  double exact_match = 0.0;  // fraction of outputs equal to the reference
};

/// Decode every gold source with beam search and score against references.
EvalScores evaluate_translations(const Model& model, const Vocabulary& vocab,
                                 const ParallelCorpus& test,
                                 const BeamConfig& beam,
                                 const TokenizerHook& hook =
                                     TokenizerHook::whitespace());

struct BtConfig {
  int constrained_steps = 1000;  // output-constrained prefix of the run
  int rounds = 1;
  int updates_per_round = 500;
  int batch_sentences = 8;  // monolingual sentences per generation batch
  double allowed_threshold = 0.01;
  bool threshold_absolute = false;
  int gen_max_len = 48;
  int max_len = 96;
  double dropout = 0.1;
  double label_smoothing = 0.2;
  double max_lr = 3e-4;
  int warmup_steps = 100;
  double copy_warn_identity = 0.9;  // synthetic ~ input identity trigger
  std::uint64_t seed = 1;
};

struct BtRoundRow {
  int round = 0;
  std::string direction;  // "src->tgt" / "tgt->src"
  int updates = 0;
  double dev_exact = -1.0;  // -1 when no dev corpus supplied
};

struct BtResult {
  std::vector<BtRoundRow> manifest;
  std::size_t copy_warnings = 0;
  std::size_t constrained_violations = 0;  // tokens outside the allowed mask
  std::string manifest_tsv() const;
};

/// On-the-fly back-translation from an initialized model. Even global steps
/// train src->tgt on (synthetic source, true target), odd steps the mirror;
/// synthetic text is regenerated with the current weights every step
/// (greedy), and generation is vocabulary-constrained for the first
/// `constrained_steps` steps.
BtResult online_bt(Model& model, const MonolingualCorpus& mono_src,
                   const MonolingualCorpus& mono_tgt, const Vocabulary& vocab,
                   const BtConfig& cfg,
                   const ParallelCorpus* dev = nullptr);

/// Zero-shot application of a fine-tuned model to another source language;
/// no training happens.
BleuReport language_transfer(const Model& model, const Vocabulary& vocab,
                             const ParallelCorpus& test,
                             const BeamConfig& beam,
                             const TokenizerHook& hook =
                                 TokenizerHook::whitespace());

struct TransferBtReport {
  double transfer_score = 0.0;
  std::optional<double> bt_only_score;
  double combined_score = 0.0;
  std::string render_tsv() const;
};

/// Transfer followed by back-translation rounds on the test pair's
/// monolingual data; reports transfer-only, BT-only and combined scores.
TransferBtReport transfer_plus_bt(Model& transferred,
                                  const MonolingualCorpus& mono_src,
                                  const MonolingualCorpus& mono_tgt,
                                  const Vocabulary& vocab, const BtConfig& cfg,
                                  const ParallelCorpus& test,
                                  const BeamConfig& eval_beam,
                                  std::optional<double> bt_only_score);

}  // namespace xmt
