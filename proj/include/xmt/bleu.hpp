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

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace xmt {

/// Pluggable pre-tokenization applied to hypotheses and references before
/// n-gram matching. Default: whitespace after trimming.
struct TokenizerHook {
  std::string name;
  std::function<std::vector<std::string>(const std::string&)> fn;

  static const TokenizerHook& whitespace();
};

struct BleuReport {
  enum class Granularity { Sentence, Corpus, Document };

  std::array<double, 4> precisions{};  // modified n-gram precisions
  double brevity_penalty = 0.0;
  double score = 0.0;  // in [0, 100]
  Granularity granularity = Granularity::Corpus;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  bool smoothed = false;

  /// Line-oriented key=value record.
  std::string render_kv() const;
  static std::string tsv_header();
  std::string tsv_row() const;
};

/// Corpus-level BLEU-4 with clipped n-gram counts aggregated over all
/// segments, geometric mean of precisions times the brevity penalty. With
/// smoothing off, any zero precision zeroes the score; `smooth` switches to
/// add-one smoothing on the precisions (for tiny toy sets).
BleuReport corpus_bleu(std::span<const std::string> hyps,
                       std::span<const std::string> refs,
                       const TokenizerHook& hook, bool smooth = false);

/// Document-level BLEU: each document's sentences are joined with a single
/// space into one segment, then scored as a corpus of documents.
BleuReport doc_bleu(const std::vector<std::vector<std::string>>& hyp_docs,
                    const std::vector<std::vector<std::string>>& ref_docs,
                    const TokenizerHook& hook, bool smooth = false);

struct AlignmentCheck {
  bool aligned = false;
  std::size_t hyp_sentences = 0;
  std::size_t ref_sentences = 0;
};

/// True iff the hypothesis document produced the same number of sentences
/// as the reference; gates whether sentence-level BLEU is reportable.
AlignmentCheck sentence_alignment_check(std::span<const std::string> hyp,
                                        std::span<const std::string> ref);

}  // namespace xmt
