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

#include <cmath>

#include "xmt/checkpoint.hpp"
#include "xmt/model.hpp"

using namespace xmt;

namespace {

ModelConfig tiny_config(int vocab = 24, int d = 8) {
  ModelConfig c;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.d_model = d;
  c.heads = 2;
  c.ffn_dim = 12;
  c.vocab_size = vocab;
  c.max_positions = 16;
  return c;
}

Batch random_batch(const ModelConfig& cfg, Rng& rng, int n = 2,
                   int src_len = 5, int tgt_len = 6) {
  std::vector<NoisedExample> exs;
  for (int i = 0; i < n; ++i) {
    NoisedExample ex;
    for (int t = 0; t < src_len; ++t)
      ex.source.push_back(
          static_cast<TokenId>(rng.uniform_int(cfg.vocab_size)));
    for (int t = 0; t < tgt_len; ++t) {
      ex.decoder_input.push_back(
          static_cast<TokenId>(rng.uniform_int(cfg.vocab_size)));
      ex.target.push_back(
          static_cast<TokenId>(rng.uniform_int(cfg.vocab_size)));
    }
    exs.push_back(std::move(ex));
  }
  return Batch::from_examples(exs, /*pad=*/0);
}

double param_sum(const Seq2SeqModel<double>& m) {
  double s = 0;
  m.params.visit([&](const std::string&, const MatX<double>& t) {
    s += t.array().abs().sum();
  });
  return s;
}

}  // namespace

TEST_CASE("init is deterministic and in range") {
  auto cfg = tiny_config(100, 8);
  auto a = init_model<double>(cfg, 7);
  auto b = init_model<double>(cfg, 7);
  CHECK(param_sum(a) == param_sum(b));
  bool identical = true;
  std::vector<const MatX<double>*> ta, tb;
  a.params.visit([&](const std::string&, const MatX<double>& t) { ta.push_back(&t); });
  b.params.visit([&](const std::string&, const MatX<double>& t) { tb.push_back(&t); });
  for (std::size_t i = 0; i < ta.size(); ++i)
    identical = identical && (*ta[i] == *tb[i]);
  CHECK(identical);

  CHECK(a.params.embedding.rows() == 100);
  CHECK(a.params.embedding.cols() == 8);

  a.params.visit([&](const std::string& name, const MatX<double>& t) {
    const auto leaf = name.substr(name.rfind('.') + 1);
    if (leaf == "gamma") {
      CHECK(t.minCoeff() == 1.0);
      CHECK(t.maxCoeff() == 1.0);
    } else if (leaf == "beta" || leaf[0] == 'b') {
      CHECK(t.cwiseAbs().maxCoeff() == 0.0);
    } else {
      CHECK(t.cwiseAbs().maxCoeff() <= xavier_bound(t.rows(), t.cols()));
    }
  });

  auto c = init_model<double>(cfg, 8);
  CHECK(param_sum(a) != param_sum(c));
}

TEST_CASE("forward output shape is (B, T_dec, V)") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 1);
  Rng rng(2);
  auto batch = random_batch(cfg, rng, 3, 4, 7);
  auto logits = forward(m, batch);
  REQUIRE(logits.size() == 3);
  for (const auto& l : logits) {
    CHECK(l.rows() == 7);
    CHECK(l.cols() == cfg.vocab_size);
  }
}

TEST_CASE("softmax over logits rows sums to one") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 3);
  Rng rng(4);
  auto batch = random_batch(cfg, rng);
  auto logits = forward(m, batch);
  for (const auto& l : logits) {
    MatX<double> p = l;
    softmax_rows_inplace(p);
    for (Eigen::Index t = 0; t < p.rows(); ++t)
      CHECK(std::abs(p.row(t).sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("decoder causality: perturbation at t only moves logits at >= t") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 5);
  Rng rng(6);
  auto batch = random_batch(cfg, rng, 1, 5, 6);
  auto base = forward(m, batch)[0];

  for (int t = 1; t < 6; ++t) {
    Batch perturbed = batch;
    perturbed.decoder_input(0, t) =
        (perturbed.decoder_input(0, t) + 1) % cfg.vocab_size;
    auto moved = forward(m, perturbed)[0];
    for (int i = 0; i < t; ++i)
      CHECK((moved.row(i) - base.row(i)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((moved.row(t) - base.row(t)).cwiseAbs().maxCoeff() > 1e-12);
  }
}

TEST_CASE("appending pad to the source leaves logits unchanged") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 9);
  Rng rng(10);

  NoisedExample ex;
  for (int t = 0; t < 5; ++t)
    ex.source.push_back(static_cast<TokenId>(1 + rng.uniform_int(cfg.vocab_size - 1)));
  for (int t = 0; t < 6; ++t) {
    ex.decoder_input.push_back(static_cast<TokenId>(rng.uniform_int(cfg.vocab_size)));
    ex.target.push_back(static_cast<TokenId>(rng.uniform_int(cfg.vocab_size)));
  }
  NoisedExample longer = ex;  // same content; a second, longer row forces pads
  longer.source.push_back(2);
  longer.source.push_back(3);

  std::vector<NoisedExample> only = {ex};
  std::vector<NoisedExample> padded = {ex, longer};
  auto l_single = forward(m, Batch::from_examples(only, 0))[0];
  auto l_padded = forward(m, Batch::from_examples(padded, 0))[0];
  CHECK((l_single - l_padded).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("loss of uniform logits is ln V") {
  // A model with zeroed parameters yields identical logits for every token,
  // so the NLL must be exactly ln(vocab).
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 11);
  m.params.visit([](const std::string&, MatX<double>& t) { t.setZero(); });
  Rng rng(12);
  auto batch = random_batch(cfg, rng);
  const double loss = eval_loss(m, batch, 0.0);
  CHECK(loss == doctest::Approx(std::log(cfg.vocab_size)).epsilon(1e-9));
}

TEST_CASE("loss goes to zero with a large correct margin") {
  // Gradient descent on a single fixed batch must drive the NLL towards 0
  // as the correct-token margin grows.
  ModelConfig c2 = tiny_config(2, 8);
  auto m2 = init_model<double>(c2, 15);
  NoisedExample ex;
  ex.source = {0, 1};
  ex.decoder_input = {0, 1};
  ex.target = {1, 0};
  std::vector<NoisedExample> exs = {ex};
  auto b2 = Batch::from_examples(exs, 0);
  double prev = eval_loss(m2, b2, 0.0);
  CHECK(prev > 0);
  ParamSet<double> grads = make_param_set<double>(c2);
  for (int it = 0; it < 400; ++it) {
    grads.set_zero();
    loss_and_grad(m2, b2, 0.0, 0.0, nullptr, grads);
    std::vector<MatX<double>*> ps;
    std::vector<const MatX<double>*> gs;
    m2.params.visit([&](const std::string&, MatX<double>& t) { ps.push_back(&t); });
    grads.visit([&](const std::string&, const MatX<double>& t) { gs.push_back(&t); });
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] -= 0.5 * *gs[i];
  }
  const double after = eval_loss(m2, b2, 0.0);
  CHECK(after < 0.05);
  CHECK(after < prev);
}

TEST_CASE("label smoothing mixes in the uniform distribution") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 16);
  Rng rng(17);
  auto batch = random_batch(cfg, rng);
  const double plain = eval_loss(m, batch, 0.0);
  const double smoothed = eval_loss(m, batch, 0.2);
  CHECK(plain != smoothed);
  CHECK(std::isfinite(smoothed));
}

TEST_CASE("gradients match central finite differences") {
  for (std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    auto cfg = tiny_config();
    auto m = init_model<double>(cfg, seed);
    Rng rng(seed * 31 + 1);
    auto batch = random_batch(cfg, rng, 2, 4, 5);
    const double smoothing = 0.1;

    ParamSet<double> grads = make_param_set<double>(cfg);
    loss_and_grad(m, batch, smoothing, 0.0, nullptr, grads);

    std::vector<std::pair<std::string, MatX<double>*>> params, gs;
    m.params.visit([&](const std::string& n, MatX<double>& t) {
      params.emplace_back(n, &t);
    });
    grads.visit([&](const std::string& n, MatX<double>& t) {
      gs.emplace_back(n, &t);
    });

    const double h = 1e-5;
    double worst = 0;
    std::string worst_name;
    for (std::size_t p = 0; p < params.size(); ++p) {
      MatX<double>& tensor = *params[p].second;
      const MatX<double>& grad = *gs[p].second;
      for (Eigen::Index i = 0; i < tensor.size(); ++i) {
        const double orig = tensor.data()[i];
        tensor.data()[i] = orig + h;
        const double up = eval_loss(m, batch, smoothing);
        tensor.data()[i] = orig - h;
        const double dn = eval_loss(m, batch, smoothing);
        tensor.data()[i] = orig;
        const double fd = (up - dn) / (2 * h);
        const double an = grad.data()[i];
        if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
        const double rel =
            std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
        if (rel > worst) {
          worst = rel;
          worst_name = params[p].first;
        }
      }
    }
    INFO("worst tensor: ", worst_name);
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("tied embedding: one table serves input and output projection") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 30);
  Rng rng(31);
  auto batch = random_batch(cfg, rng, 1, 3, 3);
  auto before = forward(m, batch)[0];
  // Scaling the single table must change both the encoder input and the
  // output projection; logits scale superlinearly if storage is shared.
  m.params.embedding *= 2.0;
  auto after = forward(m, batch)[0];
  CHECK((after - before).cwiseAbs().maxCoeff() > 1e-9);
  // There is no second table to desynchronize: the checkpoint names confirm
  // single storage.
  int embedding_tensors = 0;
  m.params.visit([&](const std::string& n, const MatX<double>&) {
    if (n.find("embed") != std::string::npos) ++embedding_tensors;
  });
  CHECK(embedding_tensors == 1);
}

TEST_CASE("overlong sequences are rejected") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 32);
  NoisedExample ex;
  for (int t = 0; t < cfg.max_positions + 1; ++t) ex.source.push_back(1);
  ex.decoder_input = {1};
  ex.target = {1};
  std::vector<NoisedExample> exs = {ex};
  auto batch = Batch::from_examples(exs, 0);
  CHECK_THROWS_AS(forward(m, batch), Error);
}

TEST_CASE("dropout is reproducible and vanishes at rate 0") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 33);
  Rng rng(34);
  auto batch = random_batch(cfg, rng);
  Rng d1(55), d2(55), d3(56);
  ParamSet<double> g1 = make_param_set<double>(cfg);
  ParamSet<double> g2 = make_param_set<double>(cfg);
  const double l1 = loss_and_grad(m, batch, 0.0, 0.3, &d1, g1);
  const double l2 = loss_and_grad(m, batch, 0.0, 0.3, &d2, g2);
  CHECK(l1 == l2);
  ParamSet<double> g3 = make_param_set<double>(cfg);
  const double l3 = loss_and_grad(m, batch, 0.0, 0.3, &d3, g3);
  CHECK(l1 != l3);
  const double l0a = eval_loss(m, batch, 0.0);
  ParamSet<double> g0 = make_param_set<double>(cfg);
  const double l0b = loss_and_grad(m, batch, 0.0, 0.0, &d1, g0);
  CHECK(l0a == l0b);
}

TEST_CASE("batch invariants: loss mask zero exactly on pads") {
  auto cfg = tiny_config();
  Rng rng(60);
  NoisedExample a, b;
  a.source = {1, 2, 3};
  a.decoder_input = {4, 5};
  a.target = {5, 6};
  b.source = {1};
  b.decoder_input = {4, 5, 6, 7};
  b.target = {5, 6, 7, 8};
  std::vector<NoisedExample> exs = {a, b};
  auto batch = Batch::from_examples(exs, 0);
  CHECK(batch.source.cols() == 3);
  CHECK(batch.target.cols() == 4);
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < batch.target.cols(); ++t)
      CHECK((batch.loss_mask(i, t) == 1) == (t < batch.target_len[i]));
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < batch.source.cols(); ++t)
      CHECK((batch.source_pad_mask(i, t) == 0) == (t < batch.source_len[i]));
}

TEST_CASE("checkpoint round trip is exact and validates shapes") {
  auto cfg = tiny_config();
  auto m = init_model<double>(cfg, 70);
  auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "xmt_model.ckpt";
  save_checkpoint(m, path);
  auto loaded = load_checkpoint<double>(path);
  CHECK(loaded.config.d_model == cfg.d_model);

  std::vector<const MatX<double>*> ta, tb;
  m.params.visit([&](const std::string&, const MatX<double>& t) { ta.push_back(&t); });
  loaded.params.visit([&](const std::string&, const MatX<double>& t) { tb.push_back(&t); });
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);

  // Re-saving must be byte-identical.
  const auto path2 = dir / "xmt_model2.ckpt";
  save_checkpoint(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);

  // A truncated file is rejected.
  std::string clipped = s1.substr(0, s1.size() / 2);
  const auto bad = dir / "xmt_model_bad.ckpt";
  std::ofstream bf(bad, std::ios::binary);
  bf.write(clipped.data(), static_cast<std::streamsize>(clipped.size()));
  bf.close();
  CHECK_THROWS_AS(load_checkpoint<double>(bad), Error);
}
