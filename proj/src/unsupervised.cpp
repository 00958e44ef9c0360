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

#include "xmt/unsupervised.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "xmt/error.hpp"

namespace xmt {
namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::vector<std::string> corpus_sentences(const MonolingualCorpus& corpus) {
  std::vector<std::string> out;
  for (const auto& doc : corpus.documents)
    for (const auto& s : doc) out.push_back(s);
  return out;
}

/// Positionwise token identity between two id sequences.
double identity_fraction(std::span<const TokenId> a,
                         std::span<const TokenId> b) {
  const std::size_t n = std::max(a.size(), b.size());
  if (n == 0) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    if (a[i] == b[i]) ++same;
  return static_cast<double>(same) / static_cast<double>(n);
}

}  // namespace

EvalScores evaluate_translations(const Model& model, const Vocabulary& vocab,
                                 const ParallelCorpus& test,
                                 const BeamConfig& beam,
                                 const TokenizerHook& hook) {
  if (test.pairs.empty()) throw Error::validation("empty test corpus");
  for (const auto& p : test.pairs)
    if (p.provenance != ParallelCorpus::Provenance::Gold)
      throw Error::validation(
          "synthetic pairs must never enter evaluation sets");
  std::vector<std::string> hyps, refs;
  std::size_t exact = 0;
  for (const auto& p : test.pairs) {
    const std::string hyp = translate_sentence(
        model, vocab, p.source, test.source_lang, test.target_lang, beam);
    if (hyp == p.target) ++exact;
    hyps.push_back(hyp);
    refs.push_back(p.target);
  }
  EvalScores scores;
  scores.bleu = corpus_bleu(hyps, refs, hook, /*smooth=*/false);
  scores.exact_match =
      static_cast<double>(exact) / static_cast<double>(test.pairs.size());
  return scores;
}

BtResult online_bt(Model& model, const MonolingualCorpus& mono_src,
                   const MonolingualCorpus& mono_tgt, const Vocabulary& vocab,
                   const BtConfig& cfg, const ParallelCorpus* dev) {
  const LanguageCode src_lang = mono_src.lang;
  const LanguageCode tgt_lang = mono_tgt.lang;
  const TokenId src_lid = vocab.lid(src_lang);
  const TokenId tgt_lid = vocab.lid(tgt_lang);
  const TokenId eos = vocab.specials().eos;

  const auto allowed_src = build_allowed_mask(
      mono_src, vocab, cfg.allowed_threshold, cfg.threshold_absolute);
  const auto allowed_tgt = build_allowed_mask(
      mono_tgt, vocab, cfg.allowed_threshold, cfg.threshold_absolute);

  const auto src_pool = corpus_sentences(mono_src);
  const auto tgt_pool = corpus_sentences(mono_tgt);
  if (src_pool.empty() || tgt_pool.empty())
    throw Error::validation("back-translation needs nonempty monolingual data");

  OptimizerConfig opt;
  opt.max_lr = cfg.max_lr;
  opt.warmup_steps = cfg.warmup_steps;
  opt.total_steps = std::max(cfg.rounds * cfg.updates_per_round,
                             cfg.warmup_steps + 1);
  opt.validate();
  Adam<double> adam(opt, model.config);
  ParamSet<double> grads = make_param_set<double>(model.config);
  Rng sampler = Rng::derive(cfg.seed, {0x6274});

  BtResult result;
  int global_step = 0;

  for (int round = 1; round <= cfg.rounds; ++round) {
    int updates_fwd = 0, updates_rev = 0;
    for (int s = 0; s < cfg.updates_per_round; ++s, ++global_step) {
      // Strict alternation: even steps train src->tgt, odd steps tgt->src.
      const bool forward_dir = (global_step % 2) == 0;
      const LanguageCode& true_lang = forward_dir ? tgt_lang : src_lang;
      const TokenId gen_lid = forward_dir ? src_lid : tgt_lid;
      const auto& pool = forward_dir ? tgt_pool : src_pool;
      const auto& gen_allowed = forward_dir ? allowed_src : allowed_tgt;
      (forward_dir ? updates_fwd : updates_rev)++;

      BeamConfig gen;
      gen.beam_size = 1;  // synthetic text is generated greedily
      gen.max_len = cfg.gen_max_len;
      gen.stop_token = gen_lid;
      const bool constrained = global_step < cfg.constrained_steps;
      if (constrained) gen.allowed = gen_allowed;

      std::vector<NoisedExample> examples;
      for (int b = 0; b < cfg.batch_sentences; ++b) {
        const std::string& text = pool[sampler.uniform_int(pool.size())];
        const auto input_ids = translation_source_ids(
            vocab, text, true_lang, model.config.max_positions);
        std::vector<TokenId> synth =
            greedy_decode(model, input_ids, gen_lid, gen);

        if (constrained)
          for (TokenId id : synth)
            if (!gen_allowed[static_cast<std::size_t>(id)])
              ++result.constrained_violations;
        if (identity_fraction(synth, input_ids) >= cfg.copy_warn_identity)
          ++result.copy_warnings;

        // Synthetic side becomes the encoder input: strip the stop <LID>,
        // ensure a trailing </S>, then append the synthetic language's id.
        if (!synth.empty() && synth.back() == gen_lid) synth.pop_back();
        if (synth.empty() || synth.back() != eos) synth.push_back(eos);
        synth.push_back(gen_lid);
        if (static_cast<int>(synth.size()) > cfg.max_len)
          synth.resize(static_cast<std::size_t>(cfg.max_len));

        // Train on (synthetic gen_lang source, true text target).
        NoisedExample pair;
        pair.source = std::move(synth);
        pair.target = vocab.encode(text);
        if (static_cast<int>(pair.target.size()) > cfg.max_len - 2)
          pair.target.resize(static_cast<std::size_t>(cfg.max_len - 2));
        pair.target.push_back(eos);
        pair.target.push_back(forward_dir ? tgt_lid : src_lid);
        pair.decoder_input.push_back(forward_dir ? tgt_lid : src_lid);
        pair.decoder_input.insert(pair.decoder_input.end(),
                                  pair.target.begin(), pair.target.end() - 1);
        examples.push_back(std::move(pair));
      }

      Batch batch = Batch::from_examples(examples, vocab.specials().pad);
      Rng dropout_rng = Rng::derive(
          cfg.seed, {0x64726f70, static_cast<std::uint64_t>(global_step)});
      grads.set_zero();
      const double loss =
          loss_and_grad(model, batch, cfg.label_smoothing, cfg.dropout,
                        &dropout_rng, grads);
      if (!std::isfinite(loss))
        throw Error::divergence("non-finite BT loss at step " +
                                std::to_string(global_step));
      adam.step(model.params, grads,
                lr_at(opt, std::min(global_step + 1, opt.total_steps)));
    }

    double dev_fwd = -1.0, dev_rev = -1.0;
    if (dev) {
      BeamConfig eval_beam;
      eval_beam.beam_size = 1;
      eval_beam.max_len = cfg.gen_max_len;
      dev_fwd = evaluate_translations(model, vocab, *dev, eval_beam)
                    .exact_match;
      ParallelCorpus reversed;
      reversed.source_lang = dev->target_lang;
      reversed.target_lang = dev->source_lang;
      for (const auto& p : dev->pairs)
        reversed.pairs.push_back({p.target, p.source, p.provenance});
      dev_rev = evaluate_translations(model, vocab, reversed, eval_beam)
                    .exact_match;
    }
    result.manifest.push_back(
        {round, src_lang.code + "->" + tgt_lang.code, updates_fwd, dev_fwd});
    result.manifest.push_back(
        {round, tgt_lang.code + "->" + src_lang.code, updates_rev, dev_rev});
  }
  return result;
}

std::string BtResult::manifest_tsv() const {
  std::ostringstream out;
  out << "round\tdirection\tupdates\tdev_exact\n";
  for (const auto& row : manifest)
    out << row.round << "\t" << row.direction << "\t" << row.updates << "\t"
        << fmt(row.dev_exact) << "\n";
  return out.str();
}

BleuReport language_transfer(const Model& model, const Vocabulary& vocab,
                             const ParallelCorpus& test,
                             const BeamConfig& beam,
                             const TokenizerHook& hook) {
  if (!vocab.has_lid(test.source_lang))
    throw Error::validation("language transfer needs a <LID> for " +
                            test.source_lang.code);
  if (!vocab.has_lid(test.target_lang))
    throw Error::validation("language transfer needs a <LID> for " +
                            test.target_lang.code);
  return evaluate_translations(model, vocab, test, beam, hook).bleu;
}

TransferBtReport transfer_plus_bt(Model& transferred,
                                  const MonolingualCorpus& mono_src,
                                  const MonolingualCorpus& mono_tgt,
                                  const Vocabulary& vocab, const BtConfig& cfg,
                                  const ParallelCorpus& test,
                                  const BeamConfig& eval_beam,
                                  std::optional<double> bt_only_score) {
  TransferBtReport report;
  report.bt_only_score = bt_only_score;
  report.transfer_score =
      language_transfer(transferred, vocab, test, eval_beam).score;
  online_bt(transferred, mono_src, mono_tgt, vocab, cfg, nullptr);
  report.combined_score =
      language_transfer(transferred, vocab, test, eval_beam).score;
  return report;
}

std::string TransferBtReport::render_tsv() const {
  std::ostringstream out;
  out << "setting\tscore\n";
  out << "transfer\t" << fmt(transfer_score) << "\n";
  out << "bt\t" << (bt_only_score ? fmt(*bt_only_score) : "-") << "\n";
  out << "combined\t" << fmt(combined_score) << "\n";
  return out.str();
}

}  // namespace xmt
