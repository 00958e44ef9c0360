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

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "xmt/error.hpp"
#include "xmt/nn.hpp"
#include "xmt/noising.hpp"
#include "xmt/rng.hpp"
#include "xmt/vocab.hpp"

namespace xmt {

struct ModelConfig {
  int enc_layers = 2;
  int dec_layers = 2;
  int d_model = 64;
  int heads = 4;
  int ffn_dim = 128;
  double dropout = 0.1;
  bool final_layernorm = true;
  int vocab_size = 0;
  int max_positions = 512;

  void validate() const {
    if (enc_layers < 1 || dec_layers < 1 || d_model < 1 || heads < 1 ||
        ffn_dim < 1 || vocab_size < 1 || max_positions < 1)
      throw Error::validation("model config: all counts must be >= 1");
    if (d_model % heads != 0)
      throw Error::validation("d_model must be divisible by heads");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw Error::validation("dropout must be in [0, 1)");
  }

  static ModelConfig desk_scale(int vocab) {
    ModelConfig c;
    c.vocab_size = vocab;
    return c;
  }

  /// The large configuration: 12+12 layers, width 1024, 16 heads.
  static ModelConfig full_scale(int vocab) {
    ModelConfig c;
    c.enc_layers = 12;
    c.dec_layers = 12;
    c.d_model = 1024;
    c.heads = 16;
    c.ffn_dim = 4096;
    c.vocab_size = vocab;
    return c;
  }
};

template <class Scalar>
struct AttentionParams {
  MatX<Scalar> wq, wk, wv, wo;  // d x d
  MatX<Scalar> bq, bk, bv, bo;  // d x 1
};

template <class Scalar>
struct LayerNormParams {
  MatX<Scalar> gamma, beta;  // d x 1
};

template <class Scalar>
struct FfnParams {
  MatX<Scalar> w1;  // d x ffn
  MatX<Scalar> b1;  // ffn x 1
  MatX<Scalar> w2;  // ffn x d
  MatX<Scalar> b2;  // d x 1
};

template <class Scalar>
struct EncoderLayerParams {
  LayerNormParams<Scalar> ln_attn;
  AttentionParams<Scalar> attn;
  LayerNormParams<Scalar> ln_ffn;
  FfnParams<Scalar> ffn;
};

template <class Scalar>
struct DecoderLayerParams {
  LayerNormParams<Scalar> ln_self;
  AttentionParams<Scalar> self_attn;
  LayerNormParams<Scalar> ln_cross;
  AttentionParams<Scalar> cross_attn;
  LayerNormParams<Scalar> ln_ffn;
  FfnParams<Scalar> ffn;
};

/// All trainable tensors. The embedding table is shared by the encoder
/// input, the decoder input, and the output projection (single storage).
template <class Scalar>
struct ParamSet {
  MatX<Scalar> embedding;      // vocab x d
  MatX<Scalar> enc_positions;  // max_pos x d (learned)
  MatX<Scalar> dec_positions;  // max_pos x d
  std::vector<EncoderLayerParams<Scalar>> enc;
  std::vector<DecoderLayerParams<Scalar>> dec;
  LayerNormParams<Scalar> enc_final_ln;
  LayerNormParams<Scalar> dec_final_ln;

  template <class Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <class Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

  void set_zero() {
    visit([](const std::string&, auto& t) { t.setZero(); });
  }

 private:
  template <class Self, class Fn>
  static void visit_impl(Self& self, Fn& fn) {
    fn("embedding", self.embedding);
    fn("enc_positions", self.enc_positions);
    fn("dec_positions", self.dec_positions);
    auto visit_attn = [&](const std::string& p, auto& a) {
      fn(p + ".wq", a.wq);
      fn(p + ".bq", a.bq);
      fn(p + ".wk", a.wk);
      fn(p + ".bk", a.bk);
      fn(p + ".wv", a.wv);
      fn(p + ".bv", a.bv);
      fn(p + ".wo", a.wo);
      fn(p + ".bo", a.bo);
    };
    auto visit_ln = [&](const std::string& p, auto& l) {
      fn(p + ".gamma", l.gamma);
      fn(p + ".beta", l.beta);
    };
    auto visit_ffn = [&](const std::string& p, auto& f) {
      fn(p + ".w1", f.w1);
      fn(p + ".b1", f.b1);
      fn(p + ".w2", f.w2);
      fn(p + ".b2", f.b2);
    };
    for (std::size_t i = 0; i < self.enc.size(); ++i) {
      const std::string p = "enc." + std::to_string(i);
      visit_ln(p + ".ln_attn", self.enc[i].ln_attn);
      visit_attn(p + ".attn", self.enc[i].attn);
      visit_ln(p + ".ln_ffn", self.enc[i].ln_ffn);
      visit_ffn(p + ".ffn", self.enc[i].ffn);
    }
    for (std::size_t i = 0; i < self.dec.size(); ++i) {
      const std::string p = "dec." + std::to_string(i);
      visit_ln(p + ".ln_self", self.dec[i].ln_self);
      visit_attn(p + ".self_attn", self.dec[i].self_attn);
      visit_ln(p + ".ln_cross", self.dec[i].ln_cross);
      visit_attn(p + ".cross_attn", self.dec[i].cross_attn);
      visit_ln(p + ".ln_ffn", self.dec[i].ln_ffn);
      visit_ffn(p + ".ffn", self.dec[i].ffn);
    }
    visit_ln("enc_final_ln", self.enc_final_ln);
    visit_ln("dec_final_ln", self.dec_final_ln);
  }
};

template <class Scalar>
ParamSet<Scalar> make_param_set(const ModelConfig& cfg) {
  const int d = cfg.d_model;
  ParamSet<Scalar> p;
  p.embedding.setZero(cfg.vocab_size, d);
  p.enc_positions.setZero(cfg.max_positions, d);
  p.dec_positions.setZero(cfg.max_positions, d);
  auto attn = [&] {
    AttentionParams<Scalar> a;
    a.wq.setZero(d, d);
    a.wk.setZero(d, d);
    a.wv.setZero(d, d);
    a.wo.setZero(d, d);
    a.bq.setZero(d, 1);
    a.bk.setZero(d, 1);
    a.bv.setZero(d, 1);
    a.bo.setZero(d, 1);
    return a;
  };
  auto ln = [&] {
    LayerNormParams<Scalar> l;
    l.gamma.setZero(d, 1);
    l.beta.setZero(d, 1);
    return l;
  };
  auto ffn = [&] {
    FfnParams<Scalar> f;
    f.w1.setZero(d, cfg.ffn_dim);
    f.b1.setZero(cfg.ffn_dim, 1);
    f.w2.setZero(cfg.ffn_dim, d);
    f.b2.setZero(d, 1);
    return f;
  };
  p.enc.resize(static_cast<std::size_t>(cfg.enc_layers));
  for (auto& l : p.enc) l = {ln(), attn(), ln(), ffn()};
  p.dec.resize(static_cast<std::size_t>(cfg.dec_layers));
  for (auto& l : p.dec) l = {ln(), attn(), ln(), attn(), ln(), ffn()};
  p.enc_final_ln = ln();
  p.dec_final_ln = ln();
  return p;
}

template <class Scalar>
struct Seq2SeqModel {
  ModelConfig config;
  ParamSet<Scalar> params;
};

/// Deterministic initialization: Xavier-uniform weights, zero biases,
/// unit layer-norm gains.
template <class Scalar>
Seq2SeqModel<Scalar> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Seq2SeqModel<Scalar> m{cfg, make_param_set<Scalar>(cfg)};
  Rng rng(splitmix64(seed) ^ 0x6d6f64656cULL);
  m.params.visit([&](const std::string& name, MatX<Scalar>& t) {
    const auto leaf = name.substr(name.rfind('.') + 1);
    if (leaf == "gamma") {
      t.setOnes();
    } else if (leaf == "beta" || leaf[0] == 'b') {
      t.setZero();
    } else {
      const double r =
          std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      for (Eigen::Index i = 0; i < t.size(); ++i)
        t.data()[i] = static_cast<Scalar>(rng.uniform(-r, r));
    }
  });
  return m;
}

/// Xavier bound for a tensor, as used by init_model (tests check ranges).
inline double xavier_bound(Eigen::Index rows, Eigen::Index cols) {
  return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

template <class Scalar>
struct DropoutCache {
  MatX<Scalar> mask;  // empty when dropout was 0

  MatX<Scalar> apply(MatX<Scalar> x, double p, Rng* rng) {
    if (p <= 0.0 || rng == nullptr) {
      mask.resize(0, 0);
      return x;
    }
    mask.resize(x.rows(), x.cols());
    const Scalar keep = Scalar(1) / Scalar(1.0 - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      mask.data()[i] = rng->uniform() < p ? Scalar(0) : keep;
    return x.cwiseProduct(mask);
  }

  MatX<Scalar> backward(MatX<Scalar> dy) const {
    if (mask.size() == 0) return dy;
    return dy.cwiseProduct(mask);
  }
};

template <class Scalar>
struct AttentionCache {
  MatX<Scalar> q_in, kv_in;          // post-LN query/key inputs
  MatX<Scalar> q, k, v;              // projected
  std::vector<MatX<Scalar>> probs;   // per head, Tq x Tk
  MatX<Scalar> ctx;                  // Tq x d
};

/// Scaled dot-product attention with projections. `causal` masks keys
/// strictly after the query position.
template <class Scalar>
MatX<Scalar> attention_fwd(const AttentionParams<Scalar>& p,
                           const MatX<Scalar>& q_in, const MatX<Scalar>& kv_in,
                           bool causal, int heads,
                           AttentionCache<Scalar>& cache) {
  const Eigen::Index d = p.wq.rows();
  const Eigen::Index dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const Scalar ninf = -std::numeric_limits<Scalar>::infinity();

  cache.q_in = q_in;
  cache.kv_in = kv_in;
  cache.q = (q_in * p.wq).rowwise() + p.bq.col(0).transpose();
  cache.k = (kv_in * p.wk).rowwise() + p.bk.col(0).transpose();
  cache.v = (kv_in * p.wv).rowwise() + p.bv.col(0).transpose();

  const Eigen::Index tq = q_in.rows();
  const Eigen::Index tk = kv_in.rows();
  cache.ctx.resize(tq, d);
  cache.probs.assign(static_cast<std::size_t>(heads), MatX<Scalar>());
  for (int h = 0; h < heads; ++h) {
    auto qh = cache.q.middleCols(h * dh, dh);
    auto kh = cache.k.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    MatX<Scalar> scores = qh * kh.transpose() * scale;
    if (causal)
      for (Eigen::Index i = 0; i < tq; ++i)
        for (Eigen::Index j = i + 1; j < tk; ++j) scores(i, j) = ninf;
    softmax_rows_inplace(scores);
    cache.probs[static_cast<std::size_t>(h)] = scores;
    cache.ctx.middleCols(h * dh, dh) = scores * vh;
  }
  return (cache.ctx * p.wo).rowwise() + p.bo.col(0).transpose();
}

template <class Scalar>
void attention_bwd(const AttentionParams<Scalar>& p,
                   const AttentionCache<Scalar>& c, const MatX<Scalar>& d_out,
                   int heads, AttentionParams<Scalar>& dp,
                   MatX<Scalar>& dq_in_accum, MatX<Scalar>& dkv_in_accum) {
  const Eigen::Index d = p.wq.rows();
  const Eigen::Index dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  dp.wo += c.ctx.transpose() * d_out;
  dp.bo.col(0) += d_out.colwise().sum().transpose();
  MatX<Scalar> dctx = d_out * p.wo.transpose();

  MatX<Scalar> dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    auto qh = c.q.middleCols(h * dh, dh);
    auto kh = c.k.middleCols(h * dh, dh);
    auto vh = c.v.middleCols(h * dh, dh);
    const MatX<Scalar>& probs = c.probs[static_cast<std::size_t>(h)];
    MatX<Scalar> dctx_h = dctx.middleCols(h * dh, dh);
    MatX<Scalar> dprobs = dctx_h * vh.transpose();
    dv.middleCols(h * dh, dh) = probs.transpose() * dctx_h;
    // Softmax backward per row; masked entries have prob 0 so they vanish.
    VecX<Scalar> rowdot =
        (dprobs.array() * probs.array()).rowwise().sum();
    MatX<Scalar> dscores =
        probs.array() * (dprobs.colwise() - rowdot).array();
    dq.middleCols(h * dh, dh) = dscores * kh * scale;
    dk.middleCols(h * dh, dh) = dscores.transpose() * qh * scale;
  }

  dp.wq += c.q_in.transpose() * dq;
  dp.bq.col(0) += dq.colwise().sum().transpose();
  dp.wk += c.kv_in.transpose() * dk;
  dp.bk.col(0) += dk.colwise().sum().transpose();
  dp.wv += c.kv_in.transpose() * dv;
  dp.bv.col(0) += dv.colwise().sum().transpose();
  dq_in_accum += dq * p.wq.transpose();
  dkv_in_accum += dk * p.wk.transpose() + dv * p.wv.transpose();
}

template <class Scalar>
struct FfnCache {
  MatX<Scalar> input;  // post-LN input
  MatX<Scalar> u;      // pre-activation
  MatX<Scalar> g;      // gelu(u)
};

template <class Scalar>
MatX<Scalar> ffn_fwd(const FfnParams<Scalar>& p, const MatX<Scalar>& input,
                     FfnCache<Scalar>& cache) {
  cache.input = input;
  cache.u = (input * p.w1).rowwise() + p.b1.col(0).transpose();
  cache.g = gelu(cache.u);
  return (cache.g * p.w2).rowwise() + p.b2.col(0).transpose();
}

template <class Scalar>
MatX<Scalar> ffn_bwd(const FfnParams<Scalar>& p, const FfnCache<Scalar>& c,
                     const MatX<Scalar>& dz, FfnParams<Scalar>& dp) {
  dp.w2 += c.g.transpose() * dz;
  dp.b2.col(0) += dz.colwise().sum().transpose();
  MatX<Scalar> du = (dz * p.w2.transpose()).cwiseProduct(gelu_grad(c.u));
  dp.w1 += c.input.transpose() * du;
  dp.b1.col(0) += du.colwise().sum().transpose();
  return du * p.w1.transpose();
}

template <class Scalar>
struct EncoderLayerCache {
  LayerNormCache<Scalar> ln_attn;
  AttentionCache<Scalar> attn;
  DropoutCache<Scalar> attn_drop;
  LayerNormCache<Scalar> ln_ffn;
  FfnCache<Scalar> ffn;
  DropoutCache<Scalar> ffn_drop;
};

template <class Scalar>
struct DecoderLayerCache {
  LayerNormCache<Scalar> ln_self;
  AttentionCache<Scalar> self_attn;
  DropoutCache<Scalar> self_drop;
  LayerNormCache<Scalar> ln_cross;
  AttentionCache<Scalar> cross_attn;
  DropoutCache<Scalar> cross_drop;
  LayerNormCache<Scalar> ln_ffn;
  FfnCache<Scalar> ffn;
  DropoutCache<Scalar> ffn_drop;
};

template <class Scalar>
struct EncoderCache {
  std::vector<TokenId> ids;
  DropoutCache<Scalar> embed_drop;
  std::vector<EncoderLayerCache<Scalar>> layers;
  LayerNormCache<Scalar> final_ln;
};

template <class Scalar>
struct DecoderCache {
  std::vector<TokenId> ids;
  DropoutCache<Scalar> embed_drop;
  std::vector<DecoderLayerCache<Scalar>> layers;
  LayerNormCache<Scalar> final_ln;
  MatX<Scalar> h_out;  // final hidden states
};

namespace detail {

template <class Scalar>
MatX<Scalar> embed(const Seq2SeqModel<Scalar>& m, std::span<const TokenId> ids,
                   const MatX<Scalar>& positions) {
  if (static_cast<int>(ids.size()) > m.config.max_positions)
    throw Error::validation("sequence length " + std::to_string(ids.size()) +
                            " exceeds max_positions " +
                            std::to_string(m.config.max_positions));
  MatX<Scalar> x(ids.size(), m.config.d_model);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const TokenId id = ids[t];
    if (id < 0 || id >= m.config.vocab_size)
      throw Error::validation("token id out of range: " + std::to_string(id));
    x.row(static_cast<Eigen::Index>(t)) =
        m.params.embedding.row(id) +
        positions.row(static_cast<Eigen::Index>(t));
  }
  return x;
}

}  // namespace detail

template <class Scalar>
MatX<Scalar> encoder_fwd(const Seq2SeqModel<Scalar>& m,
                         std::span<const TokenId> src, double dropout,
                         Rng* rng, EncoderCache<Scalar>& cache) {
  cache.ids.assign(src.begin(), src.end());
  MatX<Scalar> x = cache.embed_drop.apply(
      detail::embed(m, src, m.params.enc_positions), dropout, rng);
  cache.layers.resize(m.params.enc.size());
  for (std::size_t l = 0; l < m.params.enc.size(); ++l) {
    const auto& lp = m.params.enc[l];
    auto& lc = cache.layers[l];
    MatX<Scalar> a =
        layer_norm_fwd(x, lp.ln_attn.gamma, lp.ln_attn.beta, &lc.ln_attn);
    x += lc.attn_drop.apply(
        attention_fwd(lp.attn, a, a, /*causal=*/false, m.config.heads,
                      lc.attn),
        dropout, rng);
    MatX<Scalar> f =
        layer_norm_fwd(x, lp.ln_ffn.gamma, lp.ln_ffn.beta, &lc.ln_ffn);
    x += lc.ffn_drop.apply(ffn_fwd(lp.ffn, f, lc.ffn), dropout, rng);
  }
  if (m.config.final_layernorm)
    x = layer_norm_fwd(x, m.params.enc_final_ln.gamma,
                       m.params.enc_final_ln.beta, &cache.final_ln);
  return x;
}

template <class Scalar>
MatX<Scalar> decoder_fwd(const Seq2SeqModel<Scalar>& m,
                         std::span<const TokenId> dec_input,
                         const MatX<Scalar>& enc_out, double dropout, Rng* rng,
                         DecoderCache<Scalar>& cache) {
  cache.ids.assign(dec_input.begin(), dec_input.end());
  MatX<Scalar> x = cache.embed_drop.apply(
      detail::embed(m, dec_input, m.params.dec_positions), dropout, rng);
  cache.layers.resize(m.params.dec.size());
  for (std::size_t l = 0; l < m.params.dec.size(); ++l) {
    const auto& lp = m.params.dec[l];
    auto& lc = cache.layers[l];
    MatX<Scalar> a =
        layer_norm_fwd(x, lp.ln_self.gamma, lp.ln_self.beta, &lc.ln_self);
    x += lc.self_drop.apply(
        attention_fwd(lp.self_attn, a, a, /*causal=*/true, m.config.heads,
                      lc.self_attn),
        dropout, rng);
    MatX<Scalar> q =
        layer_norm_fwd(x, lp.ln_cross.gamma, lp.ln_cross.beta, &lc.ln_cross);
    x += lc.cross_drop.apply(
        attention_fwd(lp.cross_attn, q, enc_out, /*causal=*/false,
                      m.config.heads, lc.cross_attn),
        dropout, rng);
    MatX<Scalar> f =
        layer_norm_fwd(x, lp.ln_ffn.gamma, lp.ln_ffn.beta, &lc.ln_ffn);
    x += lc.ffn_drop.apply(ffn_fwd(lp.ffn, f, lc.ffn), dropout, rng);
  }
  if (m.config.final_layernorm)
    x = layer_norm_fwd(x, m.params.dec_final_ln.gamma,
                       m.params.dec_final_ln.beta, &cache.final_ln);
  cache.h_out = x;
  return x;
}

/// Backward through the decoder stack; returns the gradient w.r.t. the
/// encoder output (accumulated over every cross-attention).
template <class Scalar>
MatX<Scalar> decoder_bwd(const Seq2SeqModel<Scalar>& m,
                         const DecoderCache<Scalar>& cache, MatX<Scalar> dx,
                         ParamSet<Scalar>& grads) {
  MatX<Scalar> denc_out =
      MatX<Scalar>::Zero(cache.layers.empty()
                             ? 0
                             : cache.layers[0].cross_attn.kv_in.rows(),
                         m.config.d_model);
  if (m.config.final_layernorm)
    dx = layer_norm_bwd(dx, cache.final_ln, m.params.dec_final_ln.gamma,
                        grads.dec_final_ln.gamma, grads.dec_final_ln.beta);
  for (std::size_t l = m.params.dec.size(); l-- > 0;) {
    const auto& lp = m.params.dec[l];
    auto& gp = grads.dec[l];
    const auto& lc = cache.layers[l];

    MatX<Scalar> d_branch = lc.ffn_drop.backward(dx);
    MatX<Scalar> df = ffn_bwd(lp.ffn, lc.ffn, d_branch, gp.ffn);
    dx += layer_norm_bwd(df, lc.ln_ffn, lp.ln_ffn.gamma, gp.ln_ffn.gamma,
                         gp.ln_ffn.beta);

    d_branch = lc.cross_drop.backward(dx);
    MatX<Scalar> dq = MatX<Scalar>::Zero(lc.cross_attn.q_in.rows(),
                                         m.config.d_model);
    attention_bwd(lp.cross_attn, lc.cross_attn, d_branch, m.config.heads,
                  gp.cross_attn, dq, denc_out);
    dx += layer_norm_bwd(dq, lc.ln_cross, lp.ln_cross.gamma,
                         gp.ln_cross.gamma, gp.ln_cross.beta);

    d_branch = lc.self_drop.backward(dx);
    MatX<Scalar> da =
        MatX<Scalar>::Zero(lc.self_attn.q_in.rows(), m.config.d_model);
    attention_bwd(lp.self_attn, lc.self_attn, d_branch, m.config.heads,
                  gp.self_attn, da, da);
    dx += layer_norm_bwd(da, lc.ln_self, lp.ln_self.gamma, gp.ln_self.gamma,
                         gp.ln_self.beta);
  }
  dx = cache.embed_drop.backward(std::move(dx));
  for (std::size_t t = 0; t < cache.ids.size(); ++t) {
    grads.embedding.row(cache.ids[t]) += dx.row(static_cast<Eigen::Index>(t));
    grads.dec_positions.row(static_cast<Eigen::Index>(t)) +=
        dx.row(static_cast<Eigen::Index>(t));
  }
  return denc_out;
}

template <class Scalar>
void encoder_bwd(const Seq2SeqModel<Scalar>& m,
                 const EncoderCache<Scalar>& cache, MatX<Scalar> dx,
                 ParamSet<Scalar>& grads) {
  if (m.config.final_layernorm)
    dx = layer_norm_bwd(dx, cache.final_ln, m.params.enc_final_ln.gamma,
                        grads.enc_final_ln.gamma, grads.enc_final_ln.beta);
  for (std::size_t l = m.params.enc.size(); l-- > 0;) {
    const auto& lp = m.params.enc[l];
    auto& gp = grads.enc[l];
    const auto& lc = cache.layers[l];

    MatX<Scalar> d_branch = lc.ffn_drop.backward(dx);
    MatX<Scalar> df = ffn_bwd(lp.ffn, lc.ffn, d_branch, gp.ffn);
    dx += layer_norm_bwd(df, lc.ln_ffn, lp.ln_ffn.gamma, gp.ln_ffn.gamma,
                         gp.ln_ffn.beta);

    d_branch = lc.attn_drop.backward(dx);
    MatX<Scalar> da =
        MatX<Scalar>::Zero(lc.attn.q_in.rows(), m.config.d_model);
    attention_bwd(lp.attn, lc.attn, d_branch, m.config.heads, gp.attn, da,
                  da);
    dx += layer_norm_bwd(da, lc.ln_attn, lp.ln_attn.gamma, gp.ln_attn.gamma,
                         gp.ln_attn.beta);
  }
  dx = cache.embed_drop.backward(std::move(dx));
  for (std::size_t t = 0; t < cache.ids.size(); ++t) {
    grads.embedding.row(cache.ids[t]) += dx.row(static_cast<Eigen::Index>(t));
    grads.enc_positions.row(static_cast<Eigen::Index>(t)) +=
        dx.row(static_cast<Eigen::Index>(t));
  }
}

// ---------------------------------------------------------------------------
// Batches and loss
// ---------------------------------------------------------------------------

/// Padded batch. The loss mask is zero exactly on pad positions.
struct Batch {
  Eigen::MatrixX<TokenId> source;         // B x Ts
  Eigen::MatrixX<TokenId> decoder_input;  // B x Tt
  Eigen::MatrixX<TokenId> target;         // B x Tt
  Eigen::MatrixX<std::uint8_t> source_pad_mask;  // 1 where pad
  Eigen::MatrixX<std::uint8_t> loss_mask;        // 1 where a real target
  std::vector<int> source_len;
  std::vector<int> target_len;

  int size() const { return static_cast<int>(source.rows()); }

  static Batch from_examples(std::span<const NoisedExample> examples,
                             TokenId pad) {
    if (examples.empty())
      throw Error::validation("cannot build an empty batch");
    Eigen::Index ts = 0, tt = 0;
    for (const auto& ex : examples) {
      if (ex.decoder_input.size() != ex.target.size())
        throw Error::validation("decoder_input/target length mismatch");
      ts = std::max<Eigen::Index>(ts, static_cast<Eigen::Index>(ex.source.size()));
      tt = std::max<Eigen::Index>(tt, static_cast<Eigen::Index>(ex.target.size()));
    }
    const Eigen::Index b = static_cast<Eigen::Index>(examples.size());
    Batch out;
    out.source.setConstant(b, ts, pad);
    out.decoder_input.setConstant(b, tt, pad);
    out.target.setConstant(b, tt, pad);
    out.source_pad_mask.setOnes(b, ts);
    out.loss_mask.setZero(b, tt);
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto& ex = examples[static_cast<std::size_t>(i)];
      out.source_len.push_back(static_cast<int>(ex.source.size()));
      out.target_len.push_back(static_cast<int>(ex.target.size()));
      for (std::size_t t = 0; t < ex.source.size(); ++t) {
        out.source(i, static_cast<Eigen::Index>(t)) = ex.source[t];
        out.source_pad_mask(i, static_cast<Eigen::Index>(t)) = 0;
      }
      for (std::size_t t = 0; t < ex.target.size(); ++t) {
        out.decoder_input(i, static_cast<Eigen::Index>(t)) =
            ex.decoder_input[t];
        out.target(i, static_cast<Eigen::Index>(t)) = ex.target[t];
        out.loss_mask(i, static_cast<Eigen::Index>(t)) = 1;
      }
    }
    return out;
  }

  std::vector<TokenId> source_row(int i) const {
    std::vector<TokenId> v(static_cast<std::size_t>(source_len[i]));
    for (int t = 0; t < source_len[i]; ++t) v[static_cast<std::size_t>(t)] = source(i, t);
    return v;
  }
  std::vector<TokenId> decoder_input_row(int i) const {
    std::vector<TokenId> v(static_cast<std::size_t>(target_len[i]));
    for (int t = 0; t < target_len[i]; ++t) v[static_cast<std::size_t>(t)] = decoder_input(i, t);
    return v;
  }
  std::vector<TokenId> target_row(int i) const {
    std::vector<TokenId> v(static_cast<std::size_t>(target_len[i]));
    for (int t = 0; t < target_len[i]; ++t) v[static_cast<std::size_t>(t)] = target(i, t);
    return v;
  }
};

/// Inference-mode forward: per-item logits, padded rows zeroed. Pad keys in
/// the source never receive attention (equivalent to -inf scores).
template <class Scalar>
std::vector<MatX<Scalar>> forward(const Seq2SeqModel<Scalar>& m,
                                  const Batch& batch) {
  std::vector<MatX<Scalar>> out;
  out.reserve(static_cast<std::size_t>(batch.size()));
  for (int i = 0; i < batch.size(); ++i) {
    const auto src = batch.source_row(i);
    const auto dec = batch.decoder_input_row(i);
    EncoderCache<Scalar> ec;
    DecoderCache<Scalar> dc;
    MatX<Scalar> enc = encoder_fwd(m, src, 0.0, nullptr, ec);
    MatX<Scalar> hid = decoder_fwd<Scalar>(m, dec, enc, 0.0, nullptr, dc);
    MatX<Scalar> logits(batch.target.cols(), m.config.vocab_size);
    logits.setZero();
    logits.topRows(hid.rows()) = hid * m.params.embedding.transpose();
    out.push_back(std::move(logits));
  }
  return out;
}

/// Mean label-smoothed negative log-likelihood over unmasked positions,
/// with gradients when `grads` is given. Smoothing mixes the one-hot target
/// with the uniform distribution over the vocabulary.
template <class Scalar>
double loss_impl(const Seq2SeqModel<Scalar>& m, const Batch& batch,
                 double label_smoothing, double dropout, Rng* rng,
                 ParamSet<Scalar>* grads) {
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw Error::validation("label smoothing must be in [0, 1)");
  std::size_t n_positions = 0;
  for (int t : batch.target_len) n_positions += static_cast<std::size_t>(t);
  if (n_positions == 0) throw Error::validation("batch has no loss positions");

  const Scalar eps = static_cast<Scalar>(label_smoothing);
  const Scalar unif = eps / static_cast<Scalar>(m.config.vocab_size);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n_positions);
  double total = 0.0;

  for (int i = 0; i < batch.size(); ++i) {
    const auto src = batch.source_row(i);
    const auto dec = batch.decoder_input_row(i);
    const auto tgt = batch.target_row(i);
    EncoderCache<Scalar> ec;
    DecoderCache<Scalar> dc;
    MatX<Scalar> enc_out = encoder_fwd(m, src, dropout, rng, ec);
    MatX<Scalar> hid = decoder_fwd<Scalar>(m, dec, enc_out, dropout, rng, dc);
    MatX<Scalar> logits = hid * m.params.embedding.transpose();

    MatX<Scalar> dlogits;
    if (grads) dlogits.setZero(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      VecX<Scalar> lp = log_softmax(VecX<Scalar>(logits.row(t).transpose()));
      const TokenId y = tgt[static_cast<std::size_t>(t)];
      const Scalar nll = -(Scalar(1) - eps) * lp[y] - unif * lp.sum();
      total += static_cast<double>(nll);
      if (grads) {
        // d/dlogits of smoothed CE: softmax(p) - q.
        VecX<Scalar> p = lp.array().exp();
        p.array() -= unif;
        p[y] -= Scalar(1) - eps;
        dlogits.row(t) = p.transpose() * inv_n;
      }
    }
    if (grads) {
      MatX<Scalar> dhid = dlogits * m.params.embedding;
      grads->embedding += dlogits.transpose() * hid;
      MatX<Scalar> denc = decoder_bwd(m, dc, std::move(dhid), *grads);
      encoder_bwd(m, ec, std::move(denc), *grads);
    }
  }
  return total / static_cast<double>(n_positions);
}

template <class Scalar>
double loss_and_grad(const Seq2SeqModel<Scalar>& m, const Batch& batch,
                     double label_smoothing, double dropout, Rng* rng,
                     ParamSet<Scalar>& grads) {
  return loss_impl(m, batch, label_smoothing, dropout, rng, &grads);
}

/// Teacher-forced loss without gradients or dropout (validation NLL).
template <class Scalar>
double eval_loss(const Seq2SeqModel<Scalar>& m, const Batch& batch,
                 double label_smoothing = 0.0) {
  return loss_impl<Scalar>(m, batch, label_smoothing, 0.0, nullptr, nullptr);
}

// ---------------------------------------------------------------------------
// Incremental decoding entry points (full-prefix recompute, no KV cache)
// ---------------------------------------------------------------------------

template <class Scalar>
MatX<Scalar> encode_source(const Seq2SeqModel<Scalar>& m,
                           std::span<const TokenId> src) {
  EncoderCache<Scalar> ec;
  return encoder_fwd(m, src, 0.0, nullptr, ec);
}

template <class Scalar>
VecX<Scalar> next_token_logits(const Seq2SeqModel<Scalar>& m,
                               const MatX<Scalar>& enc_out,
                               std::span<const TokenId> dec_prefix) {
  DecoderCache<Scalar> dc;
  MatX<Scalar> hid = decoder_fwd<Scalar>(m, dec_prefix, enc_out, 0.0, nullptr, dc);
  return m.params.embedding * hid.row(hid.rows() - 1).transpose();
}

}  // namespace xmt
