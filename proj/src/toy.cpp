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

#include "xmt/toy.hpp"

#include <algorithm>

#include "xmt/error.hpp"
#include "xmt/text.hpp"

namespace xmt {
namespace {

const char* kConsonants = "bdfgklmnprstvz";
const char* kVowels = "aeiou";

}  // namespace

ToyWorld::ToyWorld() : ToyWorld(Config()) {}

ToyWorld::ToyWorld(Config cfg) : cfg_(cfg) {
  const int counts[4] = {cfg.n_subjects, cfg.n_verbs, cfg.n_objects,
                         cfg.n_modifiers};
  class_slots_.resize(4);
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < counts[c]; ++i) {
      class_slots_[static_cast<std::size_t>(c)].push_back(n_slots());
      slot_class_.push_back(c);
    }
    // Zipf-ish weights so word frequencies are distinguishable.
    double z = 0;
    auto& w = class_weights_[c];
    for (int i = 0; i < counts[c]; ++i) {
      w.push_back(1.0 / static_cast<double>(i + 2));
      z += w.back();
    }
    for (double& x : w) x /= z;
  }
}

std::string ToyWorld::fresh_form(Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::string form;
    const int syllables = 2 + static_cast<int>(rng.uniform_int(2));
    for (int s = 0; s < syllables; ++s) {
      form += kConsonants[rng.uniform_int(14)];
      form += kVowels[rng.uniform_int(5)];
    }
    if (std::find(used_forms_.begin(), used_forms_.end(), form) ==
        used_forms_.end()) {
      used_forms_.push_back(form);
      return form;
    }
  }
  throw Error::other("toy form space exhausted");
}

void ToyWorld::add_language(const LanguageCode& code,
                            std::uint64_t lang_seed) {
  Rng rng = Rng::derive(cfg_.seed, {0x746f79, lang_seed});
  std::vector<std::string> forms;
  for (int i = 0; i < n_slots(); ++i) forms.push_back(fresh_form(rng));
  forms_[code] = std::move(forms);
}

void ToyWorld::add_related_language(const LanguageCode& code,
                                    std::uint64_t lang_seed,
                                    const LanguageCode& other,
                                    double share_fraction) {
  const auto& base = forms(other);
  Rng rng = Rng::derive(cfg_.seed, {0x746f79, lang_seed});
  Rng share_rng = Rng::derive(cfg_.seed, {0x736872, lang_seed});
  std::vector<std::string> forms;
  for (int i = 0; i < n_slots(); ++i) {
    if (share_rng.uniform() < share_fraction)
      forms.push_back(base[static_cast<std::size_t>(i)]);
    else
      forms.push_back(fresh_form(rng));
  }
  forms_[code] = std::move(forms);
}

const std::vector<std::string>& ToyWorld::forms(
    const LanguageCode& code) const {
  auto it = forms_.find(code);
  if (it == forms_.end())
    throw Error::validation("unknown toy language: " + code.code);
  return it->second;
}

std::vector<int> ToyWorld::sample_sentence(Rng& rng) const {
  auto pick = [&](int cls) {
    const auto& w = class_weights_[cls];
    const std::size_t i = rng.categorical({w.data(), w.size()});
    return class_slots_[static_cast<std::size_t>(cls)][i];
  };
  std::vector<int> slots = {pick(0), pick(1), pick(2)};
  if (rng.uniform() < cfg_.modifier_prob) slots.push_back(pick(3));
  return slots;
}

std::string ToyWorld::render(const LanguageCode& code,
                             const std::vector<int>& slots) const {
  const auto& f = forms(code);
  std::vector<std::string> words;
  words.reserve(slots.size());
  for (int s : slots) words.push_back(f[static_cast<std::size_t>(s)]);
  return join(words, " ");
}

MonolingualCorpus ToyWorld::mono_corpus(const LanguageCode& code, int n_docs,
                                        std::uint64_t seed) const {
  MonolingualCorpus corpus;
  corpus.lang = code;
  Rng rng = Rng::derive(cfg_.seed, {0x6d6f6e6f, seed});
  for (int d = 0; d < n_docs; ++d) {
    std::vector<std::string> doc;
    for (int s = 0; s < cfg_.sentences_per_doc; ++s)
      doc.push_back(render(code, sample_sentence(rng)));
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

ParallelCorpus ToyWorld::parallel(const LanguageCode& src,
                                  const LanguageCode& tgt, int n_pairs,
                                  std::uint64_t seed) const {
  ParallelCorpus corpus;
  corpus.source_lang = src;
  corpus.target_lang = tgt;
  Rng rng = Rng::derive(cfg_.seed, {0x70617261, seed});
  for (int i = 0; i < n_pairs; ++i) {
    const auto slots = sample_sentence(rng);
    corpus.pairs.push_back({render(src, slots), render(tgt, slots),
                            ParallelCorpus::Provenance::Gold});
  }
  return corpus;
}

}  // namespace xmt
