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
#include <span>
#include <string>
#include <vector>

#include "xmt/model.hpp"
#include "xmt/noising.hpp"

namespace xmt {

using Model = Seq2SeqModel<double>;

struct BeamConfig {
  int beam_size = 5;
  int max_len = 64;
  double length_penalty = 1.0;  // finished hyps compared by score/len^p
  std::optional<std::vector<std::uint8_t>> allowed;  // 1 = emittable
  TokenId stop_token = -1;
};

struct Hypothesis {
  std::vector<TokenId> ids;  // emitted tokens, including the stop token
  double score = 0.0;        // sum of chosen log-probabilities
  bool finished = false;     // stop token emitted or max_len reached
};

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> beam;  // finished pool, best first
  bool truncated = false;        // best does not end with stop_token
};

/// Deterministic beam search over allowed tokens; ties broken by
/// lexicographically smaller token ids.
BeamResult beam_search(const Model& model, std::span<const TokenId> source,
                       TokenId start_token, const BeamConfig& cfg);

/// beam_size 1 path; returns the emitted ids.
std::vector<TokenId> greedy_decode(const Model& model,
                                   std::span<const TokenId> source,
                                   TokenId start_token, const BeamConfig& cfg);

/// Teacher-forced score of an emitted sequence: sum over positions of the
/// chosen token's log-probability. Recomputes what beam_search accumulated.
double score_sequence(const Model& model, std::span<const TokenId> source,
                      TokenId start_token, std::span<const TokenId> ids);

/// Tokens emittable during constrained decoding: observed in the encoded
/// corpus with relative frequency >= threshold (or absolute count when
/// `absolute`). Specials are always allowed.
std::vector<std::uint8_t> build_allowed_mask(const MonolingualCorpus& corpus,
                                             const Vocabulary& vocab,
                                             double threshold = 0.01,
                                             bool absolute = false);

struct DocDecodeResult {
  std::vector<std::string> sentences;
  bool truncated = false;
  std::vector<TokenId> raw_ids;
};

/// Autoregressive block translation: generate until the target <LID> (or
/// max_len), then split on </S>. The sentence count is whatever the model
/// produced.
DocDecodeResult decode_document(const Model& model, const Instance& source,
                                const Vocabulary& vocab, TokenId target_lid,
                                BeamConfig cfg);

/// Encoder input for translation: encode(text) + </S> + source <LID>.
std::vector<TokenId> translation_source_ids(const Vocabulary& vocab,
                                            const std::string& text,
                                            const LanguageCode& source_lang,
                                            int max_len);

/// One-sentence translation; start/stop token is the target <LID>.
std::string translate_sentence(const Model& model, const Vocabulary& vocab,
                               const std::string& text,
                               const LanguageCode& source_lang,
                               const LanguageCode& target_lang,
                               BeamConfig cfg);

}  // namespace xmt
