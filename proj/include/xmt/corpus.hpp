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

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xmt/rng.hpp"

namespace xmt {

/// Short lowercase ASCII identifier ("en", "ro", ...).
struct LanguageCode {
  std::string code;

  LanguageCode() = default;
  explicit LanguageCode(std::string c);  // validates

  auto operator<=>(const LanguageCode&) const = default;
};

/// Per-language document stream. Documents are ordered lists of raw
/// sentences; token_count is filled in once a vocabulary exists
/// (count_tokens below).
struct MonolingualCorpus {
  LanguageCode lang;
  std::vector<std::vector<std::string>> documents;
  std::size_t token_count = 0;

  std::size_t sentence_count() const;
};

struct CorpusCollection {
  std::map<LanguageCode, MonolingualCorpus> corpora;

  std::size_t num_languages() const { return corpora.size(); }

  /// p_i = token_count_i / sum_j token_count_j. Requires counted corpora.
  std::map<LanguageCode, double> proportions() const;
};

/// Up/down-sampling ratios lambda_i and the resulting effective language
/// probabilities q_i = p_i^alpha / sum_j p_j^alpha.
struct SamplingWeights {
  double alpha = 1.0;
  std::vector<LanguageCode> langs;  // sorted; parallel to lambdas/probs
  std::vector<double> lambdas;
  std::vector<double> probs;

  double lambda_for(const LanguageCode& lang) const;
  double prob_for(const LanguageCode& lang) const;
};

struct ParallelCorpus {
  enum class Provenance : std::uint8_t { Gold, Synthetic };
  struct Pair {
    std::string source;
    std::string target;
    Provenance provenance = Provenance::Gold;
  };

  LanguageCode source_lang;
  LanguageCode target_lang;
  std::vector<Pair> pairs;
};

/// One sentence per line, blank line = document boundary. Trailing blank
/// lines are ignored; a file with no nonempty sentences is an error.
MonolingualCorpus load_monolingual(const std::filesystem::path& path,
                                   const LanguageCode& lang);

/// Manifest: lines of "<lang>\t<path>", paths relative to the manifest's
/// directory unless absolute.
CorpusCollection load_collection(const std::filesystem::path& manifest);

/// TSV: "<source>\t<target>" per line.
ParallelCorpus load_parallel_tsv(const std::filesystem::path& path,
                                 const LanguageCode& source_lang,
                                 const LanguageCode& target_lang);

/// lambda_i = (1/p_i) * p_i^alpha / sum_j p_j^alpha, with p_i from token
/// counts. alpha in (0, 1]; every language must have a positive count.
SamplingWeights rebalance(const CorpusCollection& collection, double alpha);

/// Draws a language with probability q_i.
const LanguageCode& sample_language(const SamplingWeights& weights, Rng& rng);

}  // namespace xmt
