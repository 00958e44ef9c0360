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

#include "oracle_bleu.hpp"
#include "xmt/bleu.hpp"
#include "xmt/error.hpp"
#include "xmt/rng.hpp"

using namespace xmt;

namespace {

std::vector<std::string> random_corpus(Rng& rng, int n_segments,
                                       int vocab = 12, int max_len = 9) {
  std::vector<std::string> out;
  for (int i = 0; i < n_segments; ++i) {
    const int len = 1 + static_cast<int>(rng.uniform_int(max_len));
    std::string s;
    for (int t = 0; t < len; ++t) {
      if (t) s += ' ';
      s += "w" + std::to_string(rng.uniform_int(vocab));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("identical corpora score 100 with unit brevity penalty") {
  std::vector<std::string> text = {"the cat sat on the mat", "a dog ran"};
  auto r = corpus_bleu(text, text, TokenizerHook::whitespace());
  CHECK(r.score == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(r.brevity_penalty == 1.0);
}

TEST_CASE("disjoint vocabulary scores zero") {
  std::vector<std::string> hyp = {"aa bb cc dd"};
  std::vector<std::string> ref = {"xx yy zz ww"};
  auto r = corpus_bleu(hyp, ref, TokenizerHook::whitespace());
  CHECK(r.score == 0.0);
  CHECK(r.precisions[0] == 0.0);
}

TEST_CASE("clipping bounds repeated-token credit") {
  // "the" appears once in the reference, so only one of the four
  // hypothesis tokens can match: p1 = 1/4 and the score is 0 (no bigram).
  std::vector<std::string> hyp = {"the the the the"};
  std::vector<std::string> ref = {"the cat"};
  auto r = corpus_bleu(hyp, ref, TokenizerHook::whitespace());
  CHECK(r.precisions[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.precisions[1] == 0.0);
  CHECK(r.score == 0.0);
  auto o = oracle::bleu(hyp, ref);
  CHECK(r.precisions[0] == doctest::Approx(o.p[0]).epsilon(1e-12));
}

TEST_CASE("length mismatch is an error") {
  std::vector<std::string> hyp = {"a", "b"};
  std::vector<std::string> ref = {"a"};
  CHECK_THROWS_AS(corpus_bleu(hyp, ref, TokenizerHook::whitespace()), Error);
  CHECK_THROWS_AS(corpus_bleu({}, {}, TokenizerHook::whitespace()), Error);
}

TEST_CASE("brevity penalty punishes short hypotheses only") {
  std::vector<std::string> hyp = {"a b"};
  std::vector<std::string> ref = {"a b c d"};
  auto r = corpus_bleu(hyp, ref, TokenizerHook::whitespace());
  CHECK(r.brevity_penalty == doctest::Approx(std::exp(1.0 - 2.0)).epsilon(1e-12));
  std::vector<std::string> hyp2 = {"a b c d e f"};
  auto r2 = corpus_bleu(hyp2, ref, TokenizerHook::whitespace());
  CHECK(r2.brevity_penalty == 1.0);
}

TEST_CASE("d-BLEU equals s-BLEU exactly for single-sentence documents") {
  std::vector<std::string> hyps = {"the cat sat", "a dog ran off"};
  std::vector<std::string> refs = {"the cat sat down", "a dog ran off"};
  auto s = corpus_bleu(hyps, refs, TokenizerHook::whitespace());
  std::vector<std::vector<std::string>> hd = {{hyps[0]}, {hyps[1]}};
  std::vector<std::vector<std::string>> rd = {{refs[0]}, {refs[1]}};
  auto d = doc_bleu(hd, rd, TokenizerHook::whitespace());
  CHECK(d.score == s.score);
  CHECK(d.brevity_penalty == s.brevity_penalty);
  for (int n = 0; n < 4; ++n)
    CHECK(d.precisions[static_cast<std::size_t>(n)] ==
          s.precisions[static_cast<std::size_t>(n)]);
  CHECK(d.granularity == BleuReport::Granularity::Document);
}

TEST_CASE("swapped sentence order: d-BLEU credits content, s-BLEU does not") {
  // Frozen from an independent computation: correct sentences in the wrong
  // order inside one document.
  std::vector<std::string> ref_doc = {"the cat sat down", "a dog ran off fast"};
  std::vector<std::string> hyp_doc = {ref_doc[1], ref_doc[0]};
  auto s = corpus_bleu(hyp_doc, ref_doc, TokenizerHook::whitespace());
  CHECK(s.score == 0.0);
  auto d = doc_bleu({hyp_doc}, {ref_doc}, TokenizerHook::whitespace());
  CHECK(d.score == doctest::Approx(74.76743906106103).epsilon(1e-9));
  CHECK(d.precisions[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.precisions[1] == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(d.precisions[2] == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
  CHECK(d.precisions[3] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.score > 0.0);
}

TEST_CASE("identical documents score 100") {
  std::vector<std::vector<std::string>> docs = {{"a b c", "d e"}, {"f g"}};
  auto d = doc_bleu(docs, docs, TokenizerHook::whitespace());
  CHECK(d.score == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("alignment check gates sentence-level reporting") {
  std::vector<std::string> three = {"a", "b", "c"};
  std::vector<std::string> two = {"a", "b"};
  CHECK(sentence_alignment_check(three, three).aligned);
  auto mis = sentence_alignment_check(three, two);
  CHECK_FALSE(mis.aligned);
  CHECK(mis.hyp_sentences == 3);
  CHECK(mis.ref_sentences == 2);
  CHECK_FALSE(sentence_alignment_check({}, two).aligned);
}

TEST_CASE("corpus BLEU is invariant to pair order") {
  Rng rng(5);
  auto hyps = random_corpus(rng, 20);
  auto refs = random_corpus(rng, 20);
  auto a = corpus_bleu(hyps, refs, TokenizerHook::whitespace());
  std::vector<std::size_t> perm(hyps.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<std::string> h2, r2;
  for (std::size_t i : perm) {
    h2.push_back(hyps[i]);
    r2.push_back(refs[i]);
  }
  auto b = corpus_bleu(h2, r2, TokenizerHook::whitespace());
  CHECK(a.score == doctest::Approx(b.score).epsilon(1e-12));
}

TEST_CASE("score range and the equality law") {
  Rng rng(9);
  for (int iter = 0; iter < 100; ++iter) {
    auto hyps = random_corpus(rng, 5);
    auto refs = random_corpus(rng, 5);
    auto r = corpus_bleu(hyps, refs, TokenizerHook::whitespace());
    CHECK(r.score >= 0.0);
    CHECK(r.score <= 100.0);
    if (r.score == doctest::Approx(100.0).epsilon(1e-12)) {
      // 100 implies every hypothesis tokenizes equal to its reference.
      for (std::size_t i = 0; i < hyps.size(); ++i)
        CHECK(TokenizerHook::whitespace().fn(hyps[i]) ==
              TokenizerHook::whitespace().fn(refs[i]));
    }
  }
}

TEST_CASE("agreement with the brute-force oracle on 500 random corpora") {
  Rng rng(1234);
  for (int iter = 0; iter < 500; ++iter) {
    const int n = 1 + static_cast<int>(rng.uniform_int(6));
    auto hyps = random_corpus(rng, n);
    std::vector<std::string> refs;
    // Mix: half unrelated references, half perturbed copies so scores are
    // often nonzero.
    if (iter % 2 == 0) {
      refs = random_corpus(rng, n);
    } else {
      for (const auto& h : hyps) {
        std::string r = h;
        if (rng.uniform() < 0.5) r += " w0";
        refs.push_back(r);
      }
    }
    const bool smooth = iter % 3 == 0;
    auto mine = corpus_bleu(hyps, refs, TokenizerHook::whitespace(), smooth);
    auto ref = oracle::bleu(hyps, refs, smooth);
    CHECK(std::abs(mine.score - ref.score) < 1e-9);
    CHECK(std::abs(mine.brevity_penalty - ref.bp) < 1e-9);
    for (int k = 0; k < 4; ++k)
      CHECK(std::abs(mine.precisions[static_cast<std::size_t>(k)] -
                     ref.p[k]) < 1e-9);
    CHECK(mine.hyp_len == static_cast<std::size_t>(ref.hyp_len));
    CHECK(mine.ref_len == static_cast<std::size_t>(ref.ref_len));
  }
}

TEST_CASE("report rendering carries the exact fields") {
  std::vector<std::string> hyp = {"a b c d"};
  std::vector<std::string> ref = {"a b c"};
  auto r = corpus_bleu(hyp, ref, TokenizerHook::whitespace());
  const std::string kv = r.render_kv();
  for (const std::string key :
       {"score=", "bp=", "p1=", "p2=", "p3=", "p4=", "hyp_len=", "ref_len=",
        "granularity="})
    CHECK(kv.find(key) != std::string::npos);
  CHECK(BleuReport::tsv_header().substr(0, 5) == "score");
  CHECK(std::count(r.tsv_row().begin(), r.tsv_row().end(), '\t') == 8);
}

TEST_CASE("empty hypothesis text yields zero without crashing") {
  std::vector<std::string> hyp = {""};
  std::vector<std::string> ref = {"a b"};
  auto r = corpus_bleu(hyp, ref, TokenizerHook::whitespace());
  CHECK(r.score == 0.0);
  CHECK(r.hyp_len == 0);
}
