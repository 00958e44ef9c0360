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

#include "xmt/noising.hpp"

#include <algorithm>
#include <cmath>

#include "xmt/error.hpp"

namespace xmt {

std::size_t Instance::total_len() const {
  std::size_t n = 1;  // the trailing <LID>
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<TokenId> Instance::flatten() const {
  std::vector<TokenId> out;
  out.reserve(total_len());
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  out.push_back(lid);
  return out;
}

std::vector<Instance> pack(const MonolingualCorpus& corpus,
                           const Vocabulary& vocab, int max_len,
                           PackStats* stats) {
  if (max_len < 3)
    throw Error::validation("max_len too small to hold a sentence: " +
                            std::to_string(max_len));
  const TokenId lid = vocab.lid(corpus.lang);
  const TokenId eos = vocab.specials().eos;
  std::vector<Instance> out;

  for (const auto& doc : corpus.documents) {
    Instance current{corpus.lang, lid, {}};
    std::size_t current_len = 1;  // <LID>
    auto flush = [&] {
      if (!current.sentences.empty()) {
        out.push_back(std::move(current));
        current = Instance{corpus.lang, lid, {}};
        current_len = 1;
      }
    };
    for (const auto& raw : doc) {
      std::vector<TokenId> sent = vocab.encode(raw);
      const std::size_t cap = static_cast<std::size_t>(max_len) - 2;
      if (sent.size() > cap) {
        sent.resize(cap);
        if (stats) ++stats->truncated_sentences;
      }
      sent.push_back(eos);
      if (current_len + sent.size() > static_cast<std::size_t>(max_len))
        flush();
      current_len += sent.size();
      current.sentences.push_back(std::move(sent));
    }
    flush();
  }
  return out;
}

Instance permute_sentences(Instance instance, Rng& rng) {
  rng.shuffle(instance.sentences);
  return instance;
}

namespace {

/// Word segmentation of one sentence (excluding its trailing </S>):
/// half-open token ranges, a word starting at every boundary-marked token.
struct WordSpan {
  std::size_t begin, end;
};

std::vector<WordSpan> segment_words(const std::vector<TokenId>& sentence,
                                    const Vocabulary& vocab) {
  std::vector<WordSpan> words;
  const std::size_t n = sentence.empty() ? 0 : sentence.size() - 1;  // - </S>
  for (std::size_t i = 0; i < n; ++i) {
    if (words.empty() || vocab.begins_word(sentence[i]))
      words.push_back({i, i + 1});
    else
      words.back().end = i + 1;
  }
  return words;
}

}  // namespace

std::vector<std::vector<TokenId>> mask_spans(const Instance& instance,
                                             const Vocabulary& vocab,
                                             const NoiseConfig& cfg, Rng& rng,
                                             NoiseStats* stats) {
  if (!(cfg.mask_ratio >= 0.0 && cfg.mask_ratio < 1.0))
    throw Error::validation("mask_ratio must be in [0, 1)");
  if (!(cfg.span_lambda > 0.0))
    throw Error::validation("span_lambda must be positive");

  const std::size_t n_sents = instance.sentences.size();
  std::vector<std::vector<WordSpan>> words(n_sents);
  std::size_t total_words = 0;
  for (std::size_t s = 0; s < n_sents; ++s) {
    words[s] = segment_words(instance.sentences[s], vocab);
    total_words += words[s].size();
  }
  if (stats) stats->words_total += total_words;

  // Flat word index -> (sentence, word) plus mask state.
  struct WordRef {
    std::size_t sent, word;
  };
  std::vector<WordRef> refs;
  refs.reserve(total_words);
  for (std::size_t s = 0; s < n_sents; ++s)
    for (std::size_t w = 0; w < words[s].size(); ++w) refs.push_back({s, w});

  std::vector<std::vector<int>> group(n_sents);  // -1 = unmasked
  for (std::size_t s = 0; s < n_sents; ++s)
    group[s].assign(words[s].size(), -1);
  // Bare-mask insertions recorded as (sentence, word gap index); gap w means
  // "before word w", gap == word count means end of sentence.
  std::vector<std::pair<std::size_t, std::size_t>> insertions;

  const std::size_t budget = static_cast<std::size_t>(
      std::llround(cfg.mask_ratio * static_cast<double>(total_words)));
  std::size_t consumed = 0;
  int next_group = 0;

  while (consumed < budget) {
    std::size_t len = static_cast<std::size_t>(rng.poisson(cfg.span_lambda));
    if (stats) {
      ++stats->raw_span_draws;
      stats->raw_span_sum += len;
    }
    if (len == 0) {
      // Uniform gap over the whole instance.
      std::size_t n_gaps = total_words + n_sents;  // words + one end per sent
      std::size_t g = rng.uniform_int(n_gaps);
      for (std::size_t s = 0; s < n_sents; ++s) {
        if (g <= words[s].size()) {
          insertions.emplace_back(s, g);
          break;
        }
        g -= words[s].size() + 1;
      }
      if (stats) ++stats->insertions;
      continue;
    }
    len = std::min(len, budget - consumed);

    std::vector<std::size_t> unmasked;
    unmasked.reserve(total_words - consumed);
    for (std::size_t i = 0; i < refs.size(); ++i)
      if (group[refs[i].sent][refs[i].word] < 0) unmasked.push_back(i);
    const std::size_t start =
        unmasked[rng.uniform_int(unmasked.size())];
    const std::size_t s = refs[start].sent;
    std::size_t w = refs[start].word;
    const int g = next_group++;
    std::size_t taken = 0;
    while (taken < len && w < words[s].size() && group[s][w] < 0) {
      group[s][w] = g;
      ++w;
      ++taken;
    }
    consumed += taken;
  }
  if (stats) stats->words_masked += consumed;

  const TokenId mask = vocab.specials().mask;
  std::vector<std::vector<TokenId>> out(n_sents);
  for (std::size_t s = 0; s < n_sents; ++s) {
    const auto& sent = instance.sentences[s];
    auto insert_here = [&](std::size_t gap) {
      for (const auto& [is, ig] : insertions)
        if (is == s && ig == gap) out[s].push_back(mask);
    };
    for (std::size_t w = 0; w < words[s].size(); ++w) {
      insert_here(w);
      if (group[s][w] >= 0) {
        if (w == 0 || group[s][w - 1] != group[s][w]) out[s].push_back(mask);
        continue;
      }
      for (std::size_t i = words[s][w].begin; i < words[s][w].end; ++i)
        out[s].push_back(sent[i]);
    }
    insert_here(words[s].size());
    out[s].push_back(vocab.specials().eos);
  }
  return out;
}

NoisedExample make_example(const Instance& instance, const Vocabulary& vocab,
                           const NoiseConfig& cfg, Rng& rng,
                           NoiseStats* stats) {
  const Instance noised_order = cfg.permute_sentences
                                    ? permute_sentences(instance, rng)
                                    : instance;
  Instance noised = noised_order;
  noised.sentences = mask_spans(noised_order, vocab, cfg, rng, stats);

  NoisedExample ex;
  ex.source = noised.flatten();
  ex.target = instance.flatten();
  ex.decoder_input.reserve(ex.target.size());
  ex.decoder_input.push_back(instance.lid);
  ex.decoder_input.insert(ex.decoder_input.end(), ex.target.begin(),
                          ex.target.end() - 1);
  return ex;
}

std::string render_example(const NoisedExample& ex, const Vocabulary& vocab) {
  return vocab.decode(ex.source) + "\t" + vocab.decode(ex.decoder_input) +
         "\t" + vocab.decode(ex.target);
}

}  // namespace xmt
