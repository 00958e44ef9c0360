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

#include "xmt/training.hpp"

#include "xmt/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "xmt/error.hpp"
#include "xmt/text.hpp"

namespace xmt {
namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_step_checkpoint(const Model& model,
                           const std::filesystem::path* dir, int step) {
  if (!dir) return;
  std::filesystem::create_directories(*dir);
  save_checkpoint(model, *dir / ("step_" + std::to_string(step) + ".ckpt"));
}

/// Greedy batching under a token budget estimated at padded size.
std::vector<std::vector<std::size_t>> budget_batches(
    const std::vector<std::size_t>& order,
    const std::vector<std::size_t>& cost, int token_budget) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> current;
  std::size_t current_max = 0;
  for (std::size_t idx : order) {
    const std::size_t c = cost[idx];
    const std::size_t padded =
        std::max(current_max, c) * (current.size() + 1);
    if (!current.empty() &&
        padded > static_cast<std::size_t>(token_budget)) {
      batches.push_back(std::move(current));
      current.clear();
      current_max = 0;
    }
    current.push_back(idx);
    current_max = std::max(current_max, c);
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

}  // namespace

double dropout_at(const PretrainSchedule& sched, int step, int total_steps) {
  if (sched.dropout_stages.empty()) return 0.0;
  double prev = -1.0;
  for (const auto& [frac, _] : sched.dropout_stages) {
    if (!(frac >= 0.0 && frac < 1.0) || frac <= prev)
      throw Error::validation(
          "dropout stages must have strictly increasing thresholds in [0,1)");
    prev = frac;
  }
  const double progress =
      static_cast<double>(step) / static_cast<double>(total_steps);
  double value = sched.dropout_stages.front().second;
  for (const auto& [frac, d] : sched.dropout_stages)
    if (progress >= frac) value = d;
  return value;
}

PretrainResult pretrain(Model& model, const CorpusCollection& collection,
                        const SamplingWeights& weights,
                        const Vocabulary& vocab, const NoiseConfig& noise,
                        const PretrainSchedule& sched,
                        const OptimizerConfig& opt, std::uint64_t seed,
                        const std::filesystem::path* ckpt_dir) {
  opt.validate();
  PretrainResult result;

  std::map<LanguageCode, std::vector<Instance>> instances;
  for (const auto& [lang, corpus] : collection.corpora) {
    instances[lang] = pack(corpus, vocab, sched.max_len, &result.pack_stats);
    if (instances[lang].empty())
      throw Error::validation("no instances packed for language " + lang.code);
  }

  Adam<double> adam(opt, model.config);
  ParamSet<double> grads = make_param_set<double>(model.config);
  Rng sampler = Rng::derive(seed, {0x7074});

  for (int step = 1; step <= opt.total_steps; ++step) {
    const double dropout = dropout_at(sched, step, opt.total_steps);
    const LanguageCode& lang = sample_language(weights, sampler);
    const auto& pool = instances.at(lang);

    std::vector<NoisedExample> examples;
    std::size_t tokens = 0;
    std::size_t slot = 0;
    while (tokens < static_cast<std::size_t>(sched.token_budget)) {
      const std::size_t pick = sampler.uniform_int(pool.size());
      Rng noise_rng = Rng::derive(seed, {0x6e6f69, static_cast<std::uint64_t>(step),
                                         static_cast<std::uint64_t>(slot++)});
      examples.push_back(make_example(pool[pick], vocab, noise, noise_rng));
      tokens += pool[pick].total_len() * 2;  // source + target sides
      if (examples.size() >= 512) break;
    }

    Batch batch = Batch::from_examples(examples, vocab.specials().pad);
    Rng dropout_rng = Rng::derive(seed, {0x64726f70, static_cast<std::uint64_t>(step)});
    grads.set_zero();
    const double loss = loss_and_grad(model, batch, sched.label_smoothing,
                                      dropout, &dropout_rng, grads);
    if (!std::isfinite(loss))
      throw Error::divergence("non-finite pre-training loss at step " +
                              std::to_string(step));
    const double lr = lr_at(opt, step);
    adam.step(model.params, grads, lr);
    result.curve.push_back({step, loss, lr, dropout});

    if (sched.checkpoint_interval > 0 && step % sched.checkpoint_interval == 0)
      write_step_checkpoint(model, ckpt_dir, step);
  }
  write_step_checkpoint(model, ckpt_dir, opt.total_steps);
  return result;
}

NoisedExample make_translation_example(const Vocabulary& vocab,
                                       const std::string& source,
                                       const std::string& target,
                                       const LanguageCode& source_lang,
                                       const LanguageCode& target_lang,
                                       int max_len) {
  const TokenId eos = vocab.specials().eos;
  NoisedExample ex;
  ex.source = vocab.encode(source);
  if (static_cast<int>(ex.source.size()) > max_len - 2)
    ex.source.resize(static_cast<std::size_t>(max_len - 2));
  ex.source.push_back(eos);
  ex.source.push_back(vocab.lid(source_lang));

  ex.target = vocab.encode(target);
  if (static_cast<int>(ex.target.size()) > max_len - 2)
    ex.target.resize(static_cast<std::size_t>(max_len - 2));
  ex.target.push_back(eos);
  ex.target.push_back(vocab.lid(target_lang));

  ex.decoder_input.reserve(ex.target.size());
  ex.decoder_input.push_back(vocab.lid(target_lang));
  ex.decoder_input.insert(ex.decoder_input.end(), ex.target.begin(),
                          ex.target.end() - 1);
  return ex;
}

std::pair<ParallelCorpus, ParallelCorpus> split_validation(
    const ParallelCorpus& corpus, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw Error::validation("validation fraction must be in (0, 1)");
  const std::size_t n = corpus.pairs.size();
  const std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  if (n_val >= n)
    throw Error::validation("corpus too small to split validation from");
  ParallelCorpus train = corpus, val = corpus;
  train.pairs.assign(corpus.pairs.begin(),
                     corpus.pairs.end() - static_cast<std::ptrdiff_t>(n_val));
  val.pairs.assign(corpus.pairs.end() - static_cast<std::ptrdiff_t>(n_val),
                   corpus.pairs.end());
  return {std::move(train), std::move(val)};
}

FinetuneResult finetune(Model& model, const ParallelCorpus& train,
                        const ParallelCorpus& val, const Vocabulary& vocab,
                        const FinetuneSchedule& sched, std::uint64_t seed,
                        const std::filesystem::path* ckpt_dir) {
  if (val.pairs.empty())
    throw Error::validation("empty validation split");
  if (train.pairs.empty()) throw Error::validation("empty training corpus");
  if (!vocab.has_lid(train.source_lang) || !vocab.has_lid(train.target_lang))
    throw Error::validation("both languages need <LID> tokens");

  std::vector<NoisedExample> train_ex, val_ex;
  for (const auto& p : train.pairs)
    train_ex.push_back(make_translation_example(vocab, p.source, p.target,
                                                train.source_lang,
                                                train.target_lang,
                                                sched.max_len));
  for (const auto& p : val.pairs)
    val_ex.push_back(make_translation_example(vocab, p.source, p.target,
                                              val.source_lang, val.target_lang,
                                              sched.max_len));
  const Batch val_batch = Batch::from_examples(val_ex, vocab.specials().pad);

  std::vector<std::size_t> cost(train_ex.size());
  for (std::size_t i = 0; i < train_ex.size(); ++i)
    cost[i] = train_ex[i].source.size() + train_ex[i].target.size();

  const OptimizerConfig opt = sched.optimizer();
  opt.validate();
  Adam<double> adam(opt, model.config);
  ParamSet<double> grads = make_param_set<double>(model.config);

  FinetuneResult result;
  ParamSet<double> best_params = model.params;
  result.best_val_nll = eval_loss(model, val_batch);
  result.best_step = 0;

  auto evaluate = [&](int step, double train_loss, double lr) {
    const double nll = eval_loss(model, val_batch);
    result.curve.push_back({step, train_loss, nll, lr});
    if (nll < result.best_val_nll) {
      result.best_val_nll = nll;
      result.best_step = step;
      best_params = model.params;
    }
    write_step_checkpoint(model, ckpt_dir, step);
  };

  int step = 0;
  int epoch = 0;
  double last_loss = 0.0;
  while (step < sched.max_updates) {
    // Length-bucketed epoch: sort by cost with a seeded jitter for ties,
    // then shuffle batch order.
    std::vector<std::size_t> order(train_ex.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng erng = Rng::derive(seed, {0x6570, static_cast<std::uint64_t>(epoch)});
    erng.shuffle(order);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return cost[a] < cost[b];
                     });
    auto batches = budget_batches(order, cost, sched.token_budget);
    erng.shuffle(batches);

    for (const auto& batch_idx : batches) {
      if (step >= sched.max_updates) break;
      ++step;
      std::vector<NoisedExample> exs;
      exs.reserve(batch_idx.size());
      for (std::size_t i : batch_idx) exs.push_back(train_ex[i]);
      Batch batch = Batch::from_examples(exs, vocab.specials().pad);
      Rng dropout_rng =
          Rng::derive(seed, {0x64726f70, static_cast<std::uint64_t>(step)});
      grads.set_zero();
      last_loss = loss_and_grad(model, batch, sched.label_smoothing,
                                sched.dropout, &dropout_rng, grads);
      if (!std::isfinite(last_loss))
        throw Error::divergence("non-finite fine-tuning loss at step " +
                                std::to_string(step));
      const double lr = lr_at(opt, std::min(step, opt.total_steps));
      adam.step(model.params, grads, lr);
      if (step % sched.eval_interval == 0)
        evaluate(step, last_loss, lr);
    }
    ++epoch;
  }
  if (result.curve.empty() || result.curve.back().step != step)
    if (step > 0) evaluate(step, last_loss, lr_at(opt, std::min(step, opt.total_steps)));

  model.params = best_params;
  if (ckpt_dir) {
    std::filesystem::create_directories(*ckpt_dir);
    save_checkpoint(model, *ckpt_dir / "best.ckpt");
  }
  return result;
}

void write_pretrain_curve_tsv(const std::filesystem::path& path,
                              const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "step\tloss\tlr\tdropout\n";
  for (const auto& p : curve)
    out << p.step << "\t" << fmt(p.loss) << "\t" << fmt(p.lr) << "\t"
        << fmt(p.dropout) << "\n";
  write_file(path, out.str());
}

void write_finetune_curve_tsv(const std::filesystem::path& path,
                              const std::vector<ValPoint>& curve) {
  std::ostringstream out;
  out << "step\ttrain_loss\tval_nll\tlr\n";
  for (const auto& p : curve)
    out << p.step << "\t" << fmt(p.train_loss) << "\t" << fmt(p.val_nll)
        << "\t" << fmt(p.lr) << "\n";
  write_file(path, out.str());
}

}  // namespace xmt
