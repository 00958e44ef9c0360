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

#include "xmt/decoding.hpp"

#include <algorithm>
#include <cmath>

#include "xmt/error.hpp"

namespace xmt {
namespace {

double normalized_score(const Hypothesis& h, double length_penalty) {
  const double len = static_cast<double>(std::max<std::size_t>(1, h.ids.size()));
  return h.score / std::pow(len, length_penalty);
}

/// Ordering for pruning: higher raw score first, then smaller ids.
bool candidate_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.ids < b.ids;
}

void validate(const BeamConfig& cfg, std::span<const TokenId> source,
              int vocab_size) {
  if (source.empty()) throw Error::validation("decode source is empty");
  if (cfg.beam_size < 1) throw Error::validation("beam_size must be >= 1");
  if (cfg.max_len < 1) throw Error::validation("max_len must be >= 1");
  if (cfg.stop_token < 0 || cfg.stop_token >= vocab_size)
    throw Error::validation("stop_token out of range");
  if (cfg.allowed) {
    if (static_cast<int>(cfg.allowed->size()) != vocab_size)
      throw Error::shape("allowed mask size does not match vocabulary");
    if (!(*cfg.allowed)[static_cast<std::size_t>(cfg.stop_token)])
      throw Error::validation("allowed mask must permit the stop token");
  }
}

}  // namespace

BeamResult beam_search(const Model& model, std::span<const TokenId> source,
                       TokenId start_token, const BeamConfig& cfg) {
  validate(cfg, source, model.config.vocab_size);
  const MatX<double> enc_out = encode_source(model, source);

  std::vector<Hypothesis> live = {Hypothesis{}};
  std::vector<Hypothesis> finished;

  for (int step = 1; step <= cfg.max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() *
                       static_cast<std::size_t>(model.config.vocab_size));
    for (const Hypothesis& h : live) {
      std::vector<TokenId> prefix;
      prefix.reserve(h.ids.size() + 1);
      prefix.push_back(start_token);
      prefix.insert(prefix.end(), h.ids.begin(), h.ids.end());
      const VecX<double> logp =
          log_softmax(VecX<double>(next_token_logits(model, enc_out, prefix)));
      for (TokenId v = 0; v < model.config.vocab_size; ++v) {
        if (cfg.allowed && !(*cfg.allowed)[static_cast<std::size_t>(v)])
          continue;
        Hypothesis c = h;
        c.ids.push_back(v);
        c.score += logp[v];
        c.finished = (v == cfg.stop_token) || (step == cfg.max_len);
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(), candidate_before);
    if (static_cast<int>(candidates.size()) > cfg.beam_size)
      candidates.resize(static_cast<std::size_t>(cfg.beam_size));
    live.clear();
    for (auto& c : candidates) {
      if (c.finished)
        finished.push_back(std::move(c));
      else
        live.push_back(std::move(c));
    }
  }

  if (finished.empty())
    throw Error::validation("beam search produced no hypotheses");
  std::sort(finished.begin(), finished.end(),
            [&](const Hypothesis& a, const Hypothesis& b) {
              const double na = normalized_score(a, cfg.length_penalty);
              const double nb = normalized_score(b, cfg.length_penalty);
              if (na != nb) return na > nb;
              return a.ids < b.ids;
            });

  BeamResult result;
  result.best = finished.front();
  result.truncated =
      result.best.ids.empty() || result.best.ids.back() != cfg.stop_token;
  result.beam = std::move(finished);
  if (static_cast<int>(result.beam.size()) > cfg.beam_size)
    result.beam.resize(static_cast<std::size_t>(cfg.beam_size));
  return result;
}

std::vector<TokenId> greedy_decode(const Model& model,
                                   std::span<const TokenId> source,
                                   TokenId start_token,
                                   const BeamConfig& cfg) {
  BeamConfig greedy = cfg;
  greedy.beam_size = 1;
  return beam_search(model, source, start_token, greedy).best.ids;
}

double score_sequence(const Model& model, std::span<const TokenId> source,
                      TokenId start_token, std::span<const TokenId> ids) {
  const MatX<double> enc_out = encode_source(model, source);
  std::vector<TokenId> prefix = {start_token};
  double score = 0.0;
  for (TokenId id : ids) {
    const VecX<double> logp =
        log_softmax(VecX<double>(next_token_logits(model, enc_out, prefix)));
    score += logp[id];
    prefix.push_back(id);
  }
  return score;
}

std::vector<std::uint8_t> build_allowed_mask(const MonolingualCorpus& corpus,
                                             const Vocabulary& vocab,
                                             double threshold, bool absolute) {
  if (corpus.documents.empty())
    throw Error::validation("allowed mask needs a nonempty corpus");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(vocab.size()), 0);
  std::int64_t total = 0;
  for (const auto& doc : corpus.documents)
    for (const auto& sentence : doc)
      for (TokenId id : vocab.encode(sentence)) {
        ++counts[static_cast<std::size_t>(id)];
        ++total;
      }
  std::vector<std::uint8_t> allowed(counts.size(), 0);
  for (std::size_t v = 0; v < counts.size(); ++v) {
    if (vocab.is_special(static_cast<TokenId>(v))) {
      allowed[v] = 1;
      continue;
    }
    if (counts[v] == 0) continue;
    const double freq = absolute
                            ? static_cast<double>(counts[v])
                            : static_cast<double>(counts[v]) /
                                  static_cast<double>(total);
    allowed[v] = freq >= threshold ? 1 : 0;
  }
  return allowed;
}

DocDecodeResult decode_document(const Model& model, const Instance& source,
                                const Vocabulary& vocab, TokenId target_lid,
                                BeamConfig cfg) {
  cfg.stop_token = target_lid;
  const auto src_ids = source.flatten();
  BeamResult res = beam_search(model, src_ids, target_lid, cfg);

  DocDecodeResult out;
  out.truncated = res.truncated;
  out.raw_ids = res.best.ids;

  std::vector<TokenId> body = res.best.ids;
  if (!body.empty() && body.back() == target_lid) body.pop_back();
  const TokenId eos = vocab.specials().eos;
  std::vector<TokenId> current;
  for (TokenId id : body) {
    if (id == eos) {
      out.sentences.push_back(vocab.decode_text(current));
      current.clear();
    } else {
      current.push_back(id);
    }
  }
  if (!current.empty()) out.sentences.push_back(vocab.decode_text(current));
  return out;
}

std::vector<TokenId> translation_source_ids(const Vocabulary& vocab,
                                            const std::string& text,
                                            const LanguageCode& source_lang,
                                            int max_len) {
  std::vector<TokenId> ids = vocab.encode(text);
  if (static_cast<int>(ids.size()) > max_len - 2)
    ids.resize(static_cast<std::size_t>(max_len - 2));
  ids.push_back(vocab.specials().eos);
  ids.push_back(vocab.lid(source_lang));
  return ids;
}

std::string translate_sentence(const Model& model, const Vocabulary& vocab,
                               const std::string& text,
                               const LanguageCode& source_lang,
                               const LanguageCode& target_lang,
                               BeamConfig cfg) {
  const TokenId tgt_lid = vocab.lid(target_lang);
  cfg.stop_token = tgt_lid;
  const auto src =
      translation_source_ids(vocab, text, source_lang, model.config.max_positions);
  BeamResult res = beam_search(model, src, tgt_lid, cfg);
  std::vector<TokenId> body = res.best.ids;
  if (!body.empty() && body.back() == tgt_lid) body.pop_back();
  return vocab.decode_text(body);
}

}  // namespace xmt
