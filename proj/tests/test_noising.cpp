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

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "xmt/noising.hpp"

using namespace xmt;

namespace {

struct Fixture {
  CorpusCollection collection;
  Vocabulary vocab;

  explicit Fixture(std::vector<std::vector<std::string>> docs,
                   int extra_merges = 32)
      : collection(make_collection(std::move(docs))),
        vocab(Vocabulary::train(collection, 5 + 1 + 257 + extra_merges, 0, 0)) {
  }

  const MonolingualCorpus& corpus() const {
    return collection.corpora.at(LanguageCode("en"));
  }

 private:
  static CorpusCollection make_collection(
      std::vector<std::vector<std::string>> docs) {
    CorpusCollection c;
    MonolingualCorpus m;
    m.lang = LanguageCode("en");
    m.documents = std::move(docs);
    c.corpora.emplace(m.lang, std::move(m));
    return c;
  }
};

std::string words(int n, const std::string& stem = "w") {
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += stem + std::to_string(i % 10);
  }
  return s;
}

int count_token(const std::vector<TokenId>& ids, TokenId t) {
  return static_cast<int>(std::count(ids.begin(), ids.end(), t));
}

}  // namespace

TEST_CASE("pack: one short sentence becomes [sent </S> <LID>]") {
  Fixture f({{"ab"}});
  auto instances = pack(f.corpus(), f.vocab, 64);
  REQUIRE(instances.size() == 1);
  auto flat = instances[0].flatten();
  CHECK(flat.back() == f.vocab.lid(LanguageCode("en")));
  CHECK(flat[flat.size() - 2] == f.vocab.specials().eos);
  CHECK(count_token(flat, f.vocab.specials().eos) == 1);
}

TEST_CASE("pack obeys the greedy length rule") {
  // Three sentences of exactly 200 encoded tokens with max_len 512: the
  // first two fit (2*201 + 1 <= 512), the third starts a new instance.
  Fixture f({{words(100, ""), words(100, ""), words(100, "")}}, 0);
  const auto enc_len = f.vocab.encode(words(100, "")).size();
  REQUIRE(enc_len == 200);
  auto instances = pack(f.corpus(), f.vocab, 512);
  REQUIRE(instances.size() == 2);
  CHECK(instances[0].sentences.size() == 2);
  CHECK(instances[1].sentences.size() == 1);
  CHECK(instances[0].total_len() <= 512);
}

TEST_CASE("pack never crosses document boundaries") {
  Fixture f({{"ab"}, {"cd"}});
  auto instances = pack(f.corpus(), f.vocab, 1024);
  CHECK(instances.size() == 2);
}

TEST_CASE("every sentence lands in exactly one instance") {
  Fixture f({{words(3), words(5), words(2)}, {words(4), words(6)}});
  auto instances = pack(f.corpus(), f.vocab, 32);
  std::size_t total = 0;
  for (const auto& inst : instances) total += inst.sentences.size();
  CHECK(total == f.corpus().sentence_count());
}

TEST_CASE("overlong sentences are truncated and counted") {
  Fixture f({{words(50)}});
  PackStats stats;
  auto instances = pack(f.corpus(), f.vocab, 16, &stats);
  REQUIRE(instances.size() == 1);
  CHECK(stats.truncated_sentences == 1);
  CHECK(instances[0].total_len() <= 16);
}

TEST_CASE("permute: single sentence instance is unchanged") {
  Fixture f({{"ab"}});
  auto inst = pack(f.corpus(), f.vocab, 64)[0];
  Rng rng(3);
  auto permuted = permute_sentences(inst, rng);
  CHECK(permuted.flatten() == inst.flatten());
}

TEST_CASE("permute: all six orderings of three sentences appear uniformly") {
  Fixture f({{"aa", "bb", "cc"}});
  auto inst = pack(f.corpus(), f.vocab, 256)[0];
  REQUIRE(inst.sentences.size() == 3);
  Rng rng(11);
  std::map<std::vector<TokenId>, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[permute_sentences(inst, rng).flatten()]++;
  REQUIRE(counts.size() == 6);
  // Multinomial: expected n/6, sigma = sqrt(n * (1/6)(5/6)) ~ 37.3.
  const double expected = n / 6.0;
  const double sigma = std::sqrt(n * (1.0 / 6) * (5.0 / 6));
  for (const auto& [perm, c] : counts)
    CHECK(std::abs(c - expected) <= 3 * sigma);
}

TEST_CASE("permute preserves the token multiset") {
  Fixture f({{words(4), words(7), words(2), words(5)}});
  auto inst = pack(f.corpus(), f.vocab, 512)[0];
  Rng rng(5);
  auto permuted = permute_sentences(inst, rng);
  auto a = inst.flatten();
  auto b = permuted.flatten();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("mask_spans: ratio 0 is the exact identity") {
  Fixture f({{words(10), words(8)}});
  auto inst = pack(f.corpus(), f.vocab, 512)[0];
  NoiseConfig cfg;
  cfg.mask_ratio = 0.0;
  Rng rng(1);
  auto masked = mask_spans(inst, f.vocab, cfg, rng);
  CHECK(masked == inst.sentences);
}

TEST_CASE("mask_spans consumes the budgeted word fraction") {
  Fixture f({{words(100)}});
  auto inst = pack(f.corpus(), f.vocab, 4096)[0];
  NoiseConfig cfg;  // defaults: ratio 0.35, lambda 3.5
  NoiseStats stats;
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) mask_spans(inst, f.vocab, cfg, rng, &stats);
  const double frac = static_cast<double>(stats.words_masked) /
                      static_cast<double>(stats.words_total);
  CHECK(frac >= 0.33);
  CHECK(frac <= 0.37);
  // Raw draws average the Poisson mean.
  const double mean_span = static_cast<double>(stats.raw_span_sum) /
                           static_cast<double>(stats.raw_span_draws);
  CHECK(mean_span >= 3.4);
  CHECK(mean_span <= 3.6);
}

TEST_CASE("masking never touches separators and stays within sentences") {
  Fixture f({{words(12), words(9), words(15)}});
  auto inst = pack(f.corpus(), f.vocab, 1024)[0];
  NoiseConfig cfg;
  cfg.mask_ratio = 0.5;
  Rng rng(23);
  const TokenId eos = f.vocab.specials().eos;
  const TokenId mask = f.vocab.specials().mask;
  for (int i = 0; i < 200; ++i) {
    auto masked = mask_spans(inst, f.vocab, cfg, rng);
    REQUIRE(masked.size() == inst.sentences.size());
    for (const auto& sent : masked) {
      REQUIRE(!sent.empty());
      CHECK(sent.back() == eos);
      CHECK(count_token(sent, eos) == 1);
    }
    // Masked output still has one </S> per sentence overall.
    Instance m = inst;
    m.sentences = masked;
    auto flat = m.flatten();
    CHECK(count_token(flat, eos) == static_cast<int>(inst.sentences.size()));
    CHECK(count_token(flat, mask) >= 1);
  }
}

TEST_CASE("shift law and composition") {
  Fixture f({{words(10), words(6), words(9)}});
  auto inst = pack(f.corpus(), f.vocab, 1024)[0];
  NoiseConfig cfg;
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    auto ex = make_example(inst, f.vocab, cfg, rng);
    REQUIRE(ex.decoder_input.size() == ex.target.size());
    CHECK(ex.decoder_input[0] == f.vocab.lid(LanguageCode("en")));
    for (std::size_t t = 1; t < ex.target.size(); ++t)
      CHECK(ex.decoder_input[t] == ex.target[t - 1]);
    CHECK(ex.target.back() == f.vocab.lid(LanguageCode("en")));
    // Target is clean; source has no pad.
    CHECK(count_token(ex.target, f.vocab.specials().mask) == 0);
    CHECK(count_token(ex.source, f.vocab.specials().pad) == 0);
  }
}

TEST_CASE("no noise means source equals target") {
  Fixture f({{words(5), words(3)}});
  auto inst = pack(f.corpus(), f.vocab, 512)[0];
  NoiseConfig cfg;
  cfg.mask_ratio = 0.0;
  cfg.permute_sentences = false;
  Rng rng(1);
  auto ex = make_example(inst, f.vocab, cfg, rng);
  CHECK(ex.source == ex.target);
}

TEST_CASE("fixed seed reproduces the example exactly") {
  Fixture f({{words(14), words(11)}});
  auto inst = pack(f.corpus(), f.vocab, 512)[0];
  NoiseConfig cfg;
  Rng a(77), b(77);
  auto ea = make_example(inst, f.vocab, cfg, a);
  auto eb = make_example(inst, f.vocab, cfg, b);
  CHECK(ea.source == eb.source);
  CHECK(ea.decoder_input == eb.decoder_input);
  CHECK(ea.target == eb.target);
}

TEST_CASE("unmasked source tokens keep their within-sentence order") {
  Fixture f({{words(12), words(9)}});
  auto inst = pack(f.corpus(), f.vocab, 512)[0];
  NoiseConfig cfg;
  Rng rng(41);
  const TokenId eos = f.vocab.specials().eos;
  const TokenId mask = f.vocab.specials().mask;
  for (int iter = 0; iter < 300; ++iter) {
    auto ex = make_example(inst, f.vocab, cfg, rng);
    // Split source into sentences (minus trailing <LID>).
    std::vector<std::vector<TokenId>> src_sents(1);
    for (std::size_t i = 0; i + 1 < ex.source.size(); ++i) {
      src_sents.back().push_back(ex.source[i]);
      if (ex.source[i] == eos && i + 2 < ex.source.size())
        src_sents.emplace_back();
    }
    for (const auto& sent : src_sents) {
      std::vector<TokenId> kept;
      for (TokenId t : sent)
        if (t != mask) kept.push_back(t);
      // Each noised sentence, masks removed, is a contiguous-order
      // subsequence of the target.
      std::size_t pos = 0;
      for (TokenId t : kept) {
        while (pos < ex.target.size() && ex.target[pos] != t) ++pos;
        REQUIRE(pos < ex.target.size());
        ++pos;
      }
    }
  }
}

TEST_CASE("source length never exceeds target length plus insertions") {
  Fixture f({{words(20)}});
  auto inst = pack(f.corpus(), f.vocab, 512)[0];
  NoiseConfig cfg;
  Rng rng(53);
  for (int i = 0; i < 200; ++i) {
    NoiseStats stats;
    auto ex = make_example(inst, f.vocab, cfg, rng, &stats);
    CHECK(ex.source.size() <= ex.target.size() + stats.insertions);
  }
}

TEST_CASE("render_example emits three tab-separated fields") {
  Fixture f({{"ab cd"}});
  auto inst = pack(f.corpus(), f.vocab, 64)[0];
  NoiseConfig cfg;
  cfg.mask_ratio = 0.0;
  cfg.permute_sentences = false;
  Rng rng(1);
  auto ex = make_example(inst, f.vocab, cfg, rng);
  auto line = render_example(ex, f.vocab);
  CHECK(std::count(line.begin(), line.end(), '\t') == 2);
  CHECK(line.find("</S>") != std::string::npos);
  CHECK(line.find("[en]") != std::string::npos);
}
