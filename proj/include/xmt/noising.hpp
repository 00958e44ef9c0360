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

#include <cstdint>
#include <vector>

#include "xmt/corpus.hpp"
#include "xmt/rng.hpp"
#include "xmt/vocab.hpp"

namespace xmt {

/// A packed block of consecutive sentences from one document. Each stored
/// sentence already carries its trailing </S>; flatten() appends the <LID>.
struct Instance {
  LanguageCode lang;
  TokenId lid = -1;
  std::vector<std::vector<TokenId>> sentences;

  std::size_t total_len() const;
  std::vector<TokenId> flatten() const;
};

struct PackStats {
  std::size_t truncated_sentences = 0;
};

/// Greedy packing: sentences are added while the running length plus the
/// closing <LID> stays within max_len; instances never cross document
/// boundaries; every sentence lands in exactly one instance. A single
/// sentence longer than max_len - 2 is truncated and counted.
std::vector<Instance> pack(const MonolingualCorpus& corpus,
                           const Vocabulary& vocab, int max_len,
                           PackStats* stats = nullptr);

struct NoiseConfig {
  double mask_ratio = 0.35;   // fraction of words consumed by masking
  double span_lambda = 3.5;   // Poisson mean for span lengths, in words
  bool permute_sentences = true;
};

struct NoiseStats {
  std::uint64_t raw_span_draws = 0;
  std::uint64_t raw_span_sum = 0;  // before clipping
  std::uint64_t words_total = 0;
  std::uint64_t words_masked = 0;
  std::uint64_t insertions = 0;  // length-0 draws
};

/// Uniform random permutation of the sentence list.
Instance permute_sentences(Instance instance, Rng& rng);

/// Text infilling: repeatedly sample a span length from Poisson(lambda),
/// clip it to the remaining word budget, pick a start uniformly among
/// still-unmasked words, and replace the covered subword tokens with a
/// single <mask>. A length-0 draw inserts a bare <mask> and consumes no
/// budget. Spans never cross </S> and never touch </S> or <LID>.
std::vector<std::vector<TokenId>> mask_spans(const Instance& instance,
                                             const Vocabulary& vocab,
                                             const NoiseConfig& cfg, Rng& rng,
                                             NoiseStats* stats = nullptr);

/// (g(X), X) training triple. decoder_input is the target rotated one
/// position right with <LID> in front.
struct NoisedExample {
  std::vector<TokenId> source;
  std::vector<TokenId> decoder_input;
  std::vector<TokenId> target;
};

NoisedExample make_example(const Instance& instance, const Vocabulary& vocab,
                           const NoiseConfig& cfg, Rng& rng,
                           NoiseStats* stats = nullptr);

/// Tab-separated rendered source/decoder_input/target, one example per
/// line. Golden-file friendly.
std::string render_example(const NoisedExample& ex, const Vocabulary& vocab);

}  // namespace xmt
