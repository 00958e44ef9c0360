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

#include "xmt/bleu.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "xmt/error.hpp"
#include "xmt/text.hpp"

namespace xmt {
namespace {

constexpr int kMaxOrder = 4;

/// N-grams keyed by their tokens joined with an unlikely separator byte.
std::unordered_map<std::string, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size();
       ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + static_cast<std::size_t>(j)];
    }
    ++counts[key];
  }
  return counts;
}

const char* granularity_name(BleuReport::Granularity g) {
  switch (g) {
    case BleuReport::Granularity::Sentence:
      return "sentence";
    case BleuReport::Granularity::Document:
      return "document";
    default:
      return "corpus";
  }
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

const TokenizerHook& TokenizerHook::whitespace() {
  static const TokenizerHook hook{
      "whitespace",
      [](const std::string& s) { return split_whitespace(trim(s)); }};
  return hook;
}

BleuReport corpus_bleu(std::span<const std::string> hyps,
                       std::span<const std::string> refs,
                       const TokenizerHook& hook, bool smooth) {
  if (hyps.size() != refs.size())
    throw Error::validation("hypothesis/reference count mismatch: " +
                            std::to_string(hyps.size()) + " vs " +
                            std::to_string(refs.size()));
  if (refs.empty()) throw Error::validation("no references to score against");

  std::array<std::int64_t, kMaxOrder> matches{};
  std::array<std::int64_t, kMaxOrder> totals{};
  std::size_t hyp_len = 0, ref_len = 0;

  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto hyp_toks = hook.fn(hyps[i]);
    const auto ref_toks = hook.fn(refs[i]);
    hyp_len += hyp_toks.size();
    ref_len += ref_toks.size();
    for (int n = 1; n <= kMaxOrder; ++n) {
      const auto hc = ngram_counts(hyp_toks, n);
      const auto rc = ngram_counts(ref_toks, n);
      for (const auto& [gram, count] : hc) {
        totals[static_cast<std::size_t>(n - 1)] += count;
        auto it = rc.find(gram);
        if (it != rc.end())
          matches[static_cast<std::size_t>(n - 1)] +=
              std::min(count, it->second);
      }
    }
  }

  BleuReport report;
  report.hyp_len = hyp_len;
  report.ref_len = ref_len;
  report.smoothed = smooth;
  for (int n = 0; n < kMaxOrder; ++n) {
    const auto nn = static_cast<std::size_t>(n);
    if (smooth)
      report.precisions[nn] = static_cast<double>(matches[nn] + 1) /
                              static_cast<double>(totals[nn] + 1);
    else
      report.precisions[nn] =
          totals[nn] > 0
              ? static_cast<double>(matches[nn]) / static_cast<double>(totals[nn])
              : 0.0;
  }
  if (hyp_len == 0) {
    report.brevity_penalty = 0.0;
    report.score = 0.0;
    return report;
  }
  report.brevity_penalty =
      hyp_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) /
                               static_cast<double>(hyp_len));
  bool any_zero = false;
  double log_sum = 0.0;
  for (double p : report.precisions) {
    if (p <= 0.0)
      any_zero = true;
    else
      log_sum += std::log(p);
  }
  report.score = any_zero
                     ? 0.0
                     : 100.0 * report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

BleuReport doc_bleu(const std::vector<std::vector<std::string>>& hyp_docs,
                    const std::vector<std::vector<std::string>>& ref_docs,
                    const TokenizerHook& hook, bool smooth) {
  if (hyp_docs.size() != ref_docs.size())
    throw Error::validation("document count mismatch: " +
                            std::to_string(hyp_docs.size()) + " vs " +
                            std::to_string(ref_docs.size()));
  std::vector<std::string> hyps, refs;
  hyps.reserve(hyp_docs.size());
  refs.reserve(ref_docs.size());
  for (const auto& doc : hyp_docs) hyps.push_back(join(doc, " "));
  for (const auto& doc : ref_docs) refs.push_back(join(doc, " "));
  BleuReport report = corpus_bleu(hyps, refs, hook, smooth);
  report.granularity = BleuReport::Granularity::Document;
  return report;
}

AlignmentCheck sentence_alignment_check(std::span<const std::string> hyp,
                                        std::span<const std::string> ref) {
  AlignmentCheck check;
  check.hyp_sentences = hyp.size();
  check.ref_sentences = ref.size();
  check.aligned = !hyp.empty() && hyp.size() == ref.size();
  return check;
}

std::string BleuReport::render_kv() const {
  std::string out;
  out += "score=" + fmt(score) + "\n";
  out += "bp=" + fmt(brevity_penalty) + "\n";
  for (int n = 0; n < kMaxOrder; ++n)
    out += "p" + std::to_string(n + 1) + "=" +
           fmt(precisions[static_cast<std::size_t>(n)]) + "\n";
  out += "hyp_len=" + std::to_string(hyp_len) + "\n";
  out += "ref_len=" + std::to_string(ref_len) + "\n";
  out += "granularity=" + std::string(granularity_name(granularity)) + "\n";
  out += "smoothed=" + std::string(smoothed ? "1" : "0") + "\n";
  return out;
}

std::string BleuReport::tsv_header() {
  return "score\tbp\tp1\tp2\tp3\tp4\thyp_len\tref_len\tgranularity";
}

std::string BleuReport::tsv_row() const {
  std::string out = fmt(score) + "\t" + fmt(brevity_penalty);
  for (double p : precisions) out += "\t" + fmt(p);
  out += "\t" + std::to_string(hyp_len) + "\t" + std::to_string(ref_len) +
         "\t" + granularity_name(granularity);
  return out;
}

}  // namespace xmt
