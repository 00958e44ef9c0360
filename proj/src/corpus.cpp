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

#include "xmt/corpus.hpp"

#include <algorithm>
#include <cmath>

#include "xmt/error.hpp"
#include "xmt/text.hpp"

namespace xmt {

LanguageCode::LanguageCode(std::string c) : code(std::move(c)) {
  if (code.empty())
    throw Error::validation("language code must be nonempty");
  for (char ch : code) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') ||
                    ch == '_' || ch == '-';
    if (!ok)
      throw Error::validation("language code must be lowercase ASCII: '" +
                              code + "'");
  }
}

std::size_t MonolingualCorpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& doc : documents) n += doc.size();
  return n;
}

std::map<LanguageCode, double> CorpusCollection::proportions() const {
  double total = 0.0;
  for (const auto& [lang, corpus] : corpora)
    total += static_cast<double>(corpus.token_count);
  if (total <= 0.0)
    throw Error::validation("collection has zero total token count");
  std::map<LanguageCode, double> p;
  for (const auto& [lang, corpus] : corpora)
    p[lang] = static_cast<double>(corpus.token_count) / total;
  return p;
}

double SamplingWeights::lambda_for(const LanguageCode& lang) const {
  for (std::size_t i = 0; i < langs.size(); ++i)
    if (langs[i] == lang) return lambdas[i];
  throw Error::validation("unknown language in sampling weights: " + lang.code);
}

double SamplingWeights::prob_for(const LanguageCode& lang) const {
  for (std::size_t i = 0; i < langs.size(); ++i)
    if (langs[i] == lang) return probs[i];
  throw Error::validation("unknown language in sampling weights: " + lang.code);
}

MonolingualCorpus load_monolingual(const std::filesystem::path& path,
                                   const LanguageCode& lang) {
  MonolingualCorpus corpus;
  corpus.lang = lang;
  std::vector<std::string> current;
  for (const std::string& raw : read_lines(path)) {
    const std::string line = trim(raw);
    if (line.empty()) {
      if (!current.empty()) corpus.documents.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(line);
    }
  }
  if (!current.empty()) corpus.documents.push_back(std::move(current));
  if (corpus.documents.empty())
    throw Error::validation("empty corpus (no nonempty sentences): " +
                            path.string());
  return corpus;
}

CorpusCollection load_collection(const std::filesystem::path& manifest) {
  CorpusCollection collection;
  const auto base = manifest.parent_path();
  for (const std::string& raw : read_lines(manifest)) {
    if (trim(raw).empty()) continue;
    const auto cols = split(raw, '\t');
    if (cols.size() != 2)
      throw Error::config("manifest line must be <lang>\\t<path>: " + raw);
    LanguageCode lang(trim(cols[0]));
    std::filesystem::path p = trim(cols[1]);
    if (p.is_relative()) p = base / p;
    if (collection.corpora.count(lang))
      throw Error::validation("duplicate language in manifest: " + lang.code);
    collection.corpora.emplace(lang, load_monolingual(p, lang));
  }
  if (collection.corpora.empty())
    throw Error::validation("manifest lists no corpora: " + manifest.string());
  return collection;
}

ParallelCorpus load_parallel_tsv(const std::filesystem::path& path,
                                 const LanguageCode& source_lang,
                                 const LanguageCode& target_lang) {
  ParallelCorpus corpus;
  corpus.source_lang = source_lang;
  corpus.target_lang = target_lang;
  for (const std::string& raw : read_lines(path)) {
    if (trim(raw).empty()) continue;
    const auto cols = split(raw, '\t');
    if (cols.size() != 2)
      throw Error::config("parallel line must be <source>\\t<target>: " + raw);
    const std::string src = trim(cols[0]);
    const std::string tgt = trim(cols[1]);
    if (src.empty() || tgt.empty())
      throw Error::validation("parallel pair has an empty side: " + raw);
    corpus.pairs.push_back({src, tgt, ParallelCorpus::Provenance::Gold});
  }
  if (corpus.pairs.empty())
    throw Error::validation("parallel corpus has no pairs: " + path.string());
  return corpus;
}

SamplingWeights rebalance(const CorpusCollection& collection, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw Error::validation("alpha must be in (0, 1]");
  for (const auto& [lang, corpus] : collection.corpora)
    if (corpus.token_count == 0)
      throw Error::validation("language has zero token count: " + lang.code);

  const auto p = collection.proportions();
  SamplingWeights w;
  w.alpha = alpha;
  double z = 0.0;
  for (const auto& [lang, pi] : p) z += std::pow(pi, alpha);
  for (const auto& [lang, pi] : p) {
    const double qi = std::pow(pi, alpha) / z;
    w.langs.push_back(lang);
    w.probs.push_back(qi);
    w.lambdas.push_back(qi / pi);  // (1/p_i) * p_i^alpha / z
  }
  return w;
}

const LanguageCode& sample_language(const SamplingWeights& weights, Rng& rng) {
  const std::size_t i = rng.categorical(weights.probs);
  return weights.langs[i];
}

}  // namespace xmt
