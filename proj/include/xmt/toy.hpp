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
#include <map>
#include <string>
#include <vector>

#include "xmt/corpus.hpp"

namespace xmt {

/// Synthetic language family for experiments: a base language of word
/// slots with a small subject-verb-object grammar, and per-language word
/// forms realizing each slot. Every language is a deterministic word-level
/// cipher of the base, so exact references exist for any pair.
class ToyWorld {
 public:
  struct Config {
    int n_subjects = 12;
    int n_verbs = 12;
    int n_objects = 12;
    int n_modifiers = 6;
    double modifier_prob = 0.4;
    int sentences_per_doc = 4;
    std::uint64_t seed = 1234;
  };

  ToyWorld();
  explicit ToyWorld(Config cfg);

  /// New language with its own word forms for every slot.
  void add_language(const LanguageCode& code, std::uint64_t lang_seed);

  /// Language that reuses `other`'s form on a slot with probability
  /// `share_fraction` (deterministic per slot), fresh forms elsewhere.
  void add_related_language(const LanguageCode& code, std::uint64_t lang_seed,
                            const LanguageCode& other, double share_fraction);

  int n_slots() const { return static_cast<int>(slot_class_.size()); }
  const std::vector<std::string>& forms(const LanguageCode& code) const;

  /// Word-slot sequence of one sentence under the toy grammar.
  std::vector<int> sample_sentence(Rng& rng) const;

  std::string render(const LanguageCode& code,
                     const std::vector<int>& slots) const;

  MonolingualCorpus mono_corpus(const LanguageCode& code, int n_docs,
                                std::uint64_t seed) const;

  /// Aligned pair corpus: the same base sentences rendered in two
  /// languages.
  ParallelCorpus parallel(const LanguageCode& src, const LanguageCode& tgt,
                          int n_pairs, std::uint64_t seed) const;

 private:
  std::string fresh_form(Rng& rng);

  Config cfg_;
  std::vector<int> slot_class_;  // 0 subj, 1 verb, 2 obj, 3 modifier
  std::vector<std::vector<int>> class_slots_;
  std::vector<double> class_weights_[4];
  std::map<LanguageCode, std::vector<std::string>> forms_;
  std::vector<std::string> used_forms_;
};

}  // namespace xmt
