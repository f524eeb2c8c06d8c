#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tfmcl/augment.hpp"
#include "tfmcl/autodiff.hpp"
#include "tfmcl/data.hpp"
#include "tfmcl/errors.hpp"
#include "tfmcl/loss.hpp"
#include "tfmcl/model.hpp"
#include "tfmcl/signal.hpp"

namespace tfmcl {

struct TrainConfig {
  LossWeights weights;
  AugPolicy policy;
  EncoderConfig encoder;
  int batch_size = 128;
  int epochs_pretrain = 100;
  int epochs_finetune = 200;
  double learning_rate = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  // Component toggles for the ablation rows: disabling fused-representation
  // learning redistributes its weight to the time/frequency terms (alpha
  // behaves as 1); disabling the dispersion term forces beta to 0. The
  // disabled components are still computed and logged, they just stop
  // contributing to the optimized total.
  bool enable_frl = true;
  bool enable_tfdl = true;

  double effective_alpha() const { return enable_frl ? weights.alpha : 1.0; }
  double effective_beta() const { return enable_tfdl ? weights.beta : 0.0; }
};

inline void validate_train_config(const TrainConfig& c) {
  validate_weights(c.weights);
  validate_policy(c.policy);
  validate_config(c.encoder);
  require(c.batch_size >= 2, "train: batch_size must be >= 2");
  require(c.epochs_pretrain >= 1 && c.epochs_finetune >= 1,
          "train: epochs must be >= 1");
  require(c.learning_rate > 0.0, "train: learning_rate must be positive");
  require(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 &&
              c.adam_beta2 < 1.0,
          "train: adam betas must be in [0, 1)");
  require(c.adam_eps > 0.0, "train: adam_eps must be positive");
}

// ---- optimizer ----

struct AdamState {
  std::vector<Matrix> m, v;
  std::int64_t t = 0;
};

inline AdamState make_adam_state(const ParamSet<double>& params) {
  AdamState s;
  s.m.reserve(params.entries.size());
  s.v.reserve(params.entries.size());
  for (const auto& e : params.entries) {
    s.m.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
    s.v.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
  }
  return s;
}

// One bias-corrected Adam update, elementwise over every tensor. Advances
// state.t (so the first call uses t = 1).
inline void adam_step(ParamSet<double>& params,
                      const std::vector<Matrix>& grads, AdamState& state,
                      double lr, double beta1, double beta2, double eps) {
  require(grads.size() == params.entries.size() &&
              state.m.size() == params.entries.size(),
          "adam_step: gradient/state tables do not match params");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    Matrix& p = params.entries[i].value;
    const Matrix& g = grads[i];
    require(g.rows() == p.rows() && g.cols() == p.cols(),
            "adam_step: gradient shape mismatch at " + params.entries[i].name);
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g.cwiseProduct(g);
    const Matrix mhat = state.m[i] / bc1;
    const Matrix vhat = state.v[i] / bc2;
    p.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
}

// ---- shared forward plumbing ----

// Normalized per-sample encoder inputs for one batch.
template <typename Scalar>
struct BatchInputs {
  std::vector<MatX<Scalar>> t, t_aug, f, f_aug;
};

template <typename Scalar = double>
BatchInputs<Scalar> normalize_views(const std::vector<ViewPair>& views) {
  BatchInputs<Scalar> b;
  for (const ViewPair& vp : views) {
    b.t.push_back(normalize_time(vp.t).template cast<Scalar>());
    b.t_aug.push_back(normalize_time(vp.t_aug).template cast<Scalar>());
    b.f.push_back(vp.f.template cast<Scalar>());
    b.f_aug.push_back(vp.f_aug.template cast<Scalar>());
  }
  return b;
}

template <typename Scalar>
struct BatchReprVars {
  typename Tape<Scalar>::Var rt, rf, rt_aug, rf_aug, y, y_aug;  // stacked N x ·
};

// Encodes all four views of every sample and fuses the two domain pairs,
// stacking per-sample rows into batch matrices.
template <typename Scalar>
BatchReprVars<Scalar> batch_repr_graph(Tape<Scalar>& tape,
                                       const ParamVars<Scalar>& pv,
                                       const EncoderConfig& cfg,
                                       const BatchInputs<Scalar>& batch) {
  using Var = typename Tape<Scalar>::Var;
  const std::size_t n = batch.t.size();
  require(n >= 2 && batch.t_aug.size() == n && batch.f.size() == n &&
              batch.f_aug.size() == n,
          "batch_repr: need N >= 2 consistent views");
  std::vector<Var> rt, rf, rta, rfa, y, ya;
  for (std::size_t i = 0; i < n; ++i) {
    rt.push_back(encode_graph(tape, pv, cfg, false, tape.leaf(batch.t[i])));
    rta.push_back(
        encode_graph(tape, pv, cfg, false, tape.leaf(batch.t_aug[i])));
    rf.push_back(encode_graph(tape, pv, cfg, true, tape.leaf(batch.f[i])));
    rfa.push_back(
        encode_graph(tape, pv, cfg, true, tape.leaf(batch.f_aug[i])));
    y.push_back(fuse_graph(tape, pv, cfg, rt.back(), rf.back()));
    ya.push_back(fuse_graph(tape, pv, cfg, rta.back(), rfa.back()));
  }
  BatchReprVars<Scalar> out;
  out.rt = tape.concat_rows(rt);
  out.rf = tape.concat_rows(rf);
  out.rt_aug = tape.concat_rows(rta);
  out.rf_aug = tape.concat_rows(rfa);
  out.y = tape.concat_rows(y);
  out.y_aug = tape.concat_rows(ya);
  return out;
}

// The full pre-training objective on one batch: representations plus the
// multi-domain contrastive combination.
template <typename Scalar>
PretrainLossVars<Scalar> pretrain_loss_graph(Tape<Scalar>& tape,
                                             const ParamVars<Scalar>& pv,
                                             const EncoderConfig& cfg,
                                             const BatchInputs<Scalar>& batch,
                                             const LossWeights& weights,
                                             double eff_alpha,
                                             double eff_beta) {
  const auto reprs = batch_repr_graph(tape, pv, cfg, batch);
  return mcl_graph(tape, reprs.rt, reprs.rf, reprs.rt_aug, reprs.rf_aug,
                   reprs.y, reprs.y_aug, weights, eff_alpha, eff_beta);
}

// ---- pre-training ----

struct LossRecord {
  int epoch = 0;
  int batch = 0;
  double l_t = 0.0, l_f = 0.0, l_z = 0.0, l_tf = 0.0, total = 0.0;
};

struct PretrainResult {
  ParamSet<double> params;
  std::vector<LossRecord> log;
};

namespace detail {

inline std::vector<const Window*> gather_windows(const Dataset& ds,
                                                 const std::vector<int>& idx) {
  std::vector<const Window*> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(&ds.windows[static_cast<std::size_t>(i)]);
  return out;
}

inline void check_finite_breakdown(const LossRecord& r) {
  auto bad = [](double v) { return !std::isfinite(v); };
  const char* name = bad(r.l_t)   ? "l_t"
                     : bad(r.l_f) ? "l_f"
                     : bad(r.l_z) ? "l_z"
                     : bad(r.l_tf) ? "l_tf"
                     : bad(r.total) ? "total"
                                    : nullptr;
  if (name)
    throw NumericError("pretrain: non-finite " + std::string(name) +
                       " at epoch " + std::to_string(r.epoch) + " batch " +
                       std::to_string(r.batch));
}

}  // namespace detail

// Self-supervised pre-training: one Adam step per batch on the combined
// objective, all four components logged per batch.
inline PretrainResult pretrain(const Dataset& ds, const TrainConfig& cfg) {
  validate_train_config(cfg);
  validate_dataset(ds);
  require(ds.n_channels == cfg.encoder.n_channels &&
              ds.window_len == cfg.encoder.window_len,
          "pretrain: encoder geometry disagrees with dataset");

  PretrainResult result;
  result.params = init_params<double>(cfg.encoder, cfg.seed);
  AdamState state = make_adam_state(result.params);
  const std::uint64_t batch_seed = derive_stream({cfg.seed, 0x12E7ull});
  const double eff_alpha = cfg.effective_alpha();
  const double eff_beta = cfg.effective_beta();

  for (int epoch = 0; epoch < cfg.epochs_pretrain; ++epoch) {
    const auto batches =
        make_batches(static_cast<int>(ds.windows.size()), cfg.batch_size,
                     batch_seed, epoch, /*drop_last=*/false);
    require(!batches.empty(),
            "pretrain: no usable batches (dataset smaller than 2 windows?)");
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto views =
          make_view_pairs(detail::gather_windows(ds, batches[b]), cfg.policy,
                          cfg.seed, epoch, static_cast<int>(b));
      LossRecord rec;
      rec.epoch = epoch;
      rec.batch = static_cast<int>(b);
      try {
        Tape<double> tape;
        const auto pv = register_params(tape, result.params);
        const auto losses =
            pretrain_loss_graph(tape, pv, cfg.encoder, normalize_views(views),
                                cfg.weights, eff_alpha, eff_beta);
        rec.l_t = tape.value(losses.l_t)(0, 0);
        rec.l_f = tape.value(losses.l_f)(0, 0);
        rec.l_z = tape.value(losses.l_z)(0, 0);
        rec.l_tf = tape.value(losses.l_tf)(0, 0);
        rec.total = tape.value(losses.total)(0, 0);
        detail::check_finite_breakdown(rec);
        tape.backward(losses.total);
        adam_step(result.params, collect_grads(tape, pv), state,
                  cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_eps);
      } catch (const NumericError& e) {
        throw NumericError("pretrain: epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(b) + ": " + e.what());
      }
      result.log.push_back(rec);
    }
  }
  return result;
}

// ---- evaluation ----

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // positive class = label 1
  std::array<std::array<std::int64_t, 2>, 2> counts{};  // [true][predicted]
  std::array<std::array<double, 2>, 2> row_norm{};      // rows sum to 1
};

// Plain forward pass over a labeled set. Ties in the logits resolve to
// class 0 so evaluation is deterministic.
inline Metrics evaluate(const ParamSet<double>& params, const Dataset& ds) {
  validate_dataset(ds);
  require(ds.labeled(), "evaluate: dataset must be fully labeled");
  require(ds.n_channels == params.config.n_channels &&
              ds.window_len == params.config.window_len,
          "evaluate: encoder geometry disagrees with dataset");

  Metrics m;
  // Chunked so one tape (and one parameter registration) serves many windows.
  const std::size_t chunk = 128;
  for (std::size_t start = 0; start < ds.windows.size(); start += chunk) {
    const std::size_t stop = std::min(start + chunk, ds.windows.size());
    Tape<double> tape;
    const auto pv = register_params(tape, params);
    for (std::size_t i = start; i < stop; ++i) {
      const Window& w = ds.windows[i];
      auto rt = encode_graph(tape, pv, params.config, false,
                             tape.leaf(normalize_time(w)));
      auto rf = encode_graph(tape, pv, params.config, true,
                             tape.leaf(normalize_psd(window_psd(w))));
      auto y = fuse_graph(tape, pv, params.config, rt, rf);
      auto logits = classify_graph(tape, pv, y);
      const auto& row = tape.value(logits);
      const int pred = row(0, 1) > row(0, 0) ? 1 : 0;
      m.counts[static_cast<std::size_t>(*w.label)]
              [static_cast<std::size_t>(pred)] += 1;
    }
  }

  const auto total = static_cast<double>(ds.windows.size());
  m.accuracy =
      (static_cast<double>(m.counts[0][0]) + static_cast<double>(m.counts[1][1])) /
      total;
  const auto tp = static_cast<double>(m.counts[1][1]);
  const auto fp = static_cast<double>(m.counts[0][1]);
  const auto fn = static_cast<double>(m.counts[1][0]);
  const double precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
  const double recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = (precision + recall) > 0
             ? 2.0 * precision * recall / (precision + recall)
             : 0.0;
  for (int r = 0; r < 2; ++r) {
    const auto row_sum = static_cast<double>(m.counts[static_cast<std::size_t>(r)][0] +
                                             m.counts[static_cast<std::size_t>(r)][1]);
    for (int c = 0; c < 2; ++c)
      m.row_norm[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
          row_sum > 0 ? static_cast<double>(
                            m.counts[static_cast<std::size_t>(r)]
                                    [static_cast<std::size_t>(c)]) /
                            row_sum
                      : 0.0;
  }
  return m;
}

// ---- fine-tuning ----

struct FinetuneEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  Metrics val;
};

struct FinetuneResult {
  ParamSet<double> best_params;
  int best_epoch = 0;
  Metrics best_val;
  std::vector<FinetuneEpoch> log;
};

// Supervised fine-tuning of every parameter on cross-entropy over original
// views only. Keeps the parameters from the epoch with the highest
// validation accuracy (first such epoch on ties).
inline FinetuneResult finetune(const ParamSet<double>& start,
                               const Dataset& train_ds, const Dataset& val_ds,
                               const TrainConfig& cfg) {
  validate_train_config(cfg);
  validate_dataset(train_ds);
  validate_dataset(val_ds);
  require(train_ds.labeled() && val_ds.labeled(),
          "finetune: datasets must be fully labeled");
  require(start.config == cfg.encoder,
          "finetune: checkpoint config disagrees with train config");
  require(train_ds.n_channels == cfg.encoder.n_channels &&
              train_ds.window_len == cfg.encoder.window_len,
          "finetune: encoder geometry disagrees with dataset");

  FinetuneResult result;
  ParamSet<double> params = start;
  AdamState state = make_adam_state(params);
  const std::uint64_t batch_seed = derive_stream({cfg.seed, 0xF17Eull});
  double best_acc = -1.0;

  for (int epoch = 0; epoch < cfg.epochs_finetune; ++epoch) {
    const auto batches =
        make_batches(static_cast<int>(train_ds.windows.size()), cfg.batch_size,
                     batch_seed, epoch, /*drop_last=*/false);
    require(!batches.empty(), "finetune: no usable batches");
    double loss_sum = 0.0;
    std::size_t n_seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      try {
        Tape<double> tape;
        const auto pv = register_params(tape, params);
        std::vector<Tape<double>::Var> fused;
        std::vector<int> labels;
        for (int i : idx) {
          const Window& w = train_ds.windows[static_cast<std::size_t>(i)];
          auto rt = encode_graph(tape, pv, cfg.encoder, false,
                                 tape.leaf(normalize_time(w)));
          auto rf = encode_graph(tape, pv, cfg.encoder, true,
                                 tape.leaf(normalize_psd(window_psd(w))));
          fused.push_back(fuse_graph(tape, pv, cfg.encoder, rt, rf));
          labels.push_back(*w.label);
        }
        auto logits = classify_graph(tape, pv, tape.concat_rows(fused));
        auto loss = softmax_xent_graph(tape, logits, labels);
        const double loss_val = tape.value(loss)(0, 0);
        if (!std::isfinite(loss_val))
          throw NumericError("non-finite cross-entropy");
        tape.backward(loss);
        adam_step(params, collect_grads(tape, pv), state, cfg.learning_rate,
                  cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        loss_sum += loss_val * static_cast<double>(idx.size());
        n_seen += idx.size();
      } catch (const NumericError& e) {
        throw NumericError("finetune: epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(b) + ": " + e.what());
      }
    }

    FinetuneEpoch rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_seen);
    rec.val = evaluate(params, val_ds);
    if (rec.val.accuracy > best_acc) {
      best_acc = rec.val.accuracy;
      result.best_params = params;
      result.best_epoch = epoch;
      result.best_val = rec.val;
    }
    result.log.push_back(std::move(rec));
  }
  return result;
}

}  // namespace tfmcl
