#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tfmcl/augment.hpp"
#include "tfmcl/model.hpp"
#include "tfmcl/rng.hpp"
#include "tfmcl/train.hpp"

namespace tfmcl {

// Small enough that central differences over every parameter stay cheap,
// large enough that every architectural piece (both towers, attention,
// fusion, all loss components) is exercised.
inline EncoderConfig tiny_config() {
  EncoderConfig c;
  c.n_channels = 4;
  c.window_len = 64;  // freq length 32
  c.time_kernel = 8;  // 8 time tokens
  c.freq_kernel = 4;  // 8 frequency tokens
  c.n_step_filters = 4;
  c.n_channel_filters = 4;
  c.ffn_hidden = 8;
  c.repr_dim = 8;
  c.fusion_dim = 8;
  return c;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  int n_elements = 0;
  double tolerance = 1e-4;
  bool pass = false;
  std::vector<std::pair<std::string, double>> per_tensor;
};

namespace detail {

inline std::vector<ViewPair> random_view_batch(const EncoderConfig& cfg, int n,
                                               const AugPolicy& policy,
                                               std::uint64_t seed) {
  std::vector<Window> windows(static_cast<std::size_t>(n));
  Rng rng(derive_stream({seed, 0x6CADull}));
  for (int i = 0; i < n; ++i) {
    Window& w = windows[static_cast<std::size_t>(i)];
    w.fs_hz = 64.0;
    w.subject_id = "g" + std::to_string(i);
    w.samples.resize(cfg.n_channels, cfg.window_len);
    for (int r = 0; r < cfg.n_channels; ++r)
      for (int c = 0; c < cfg.window_len; ++c) w.samples(r, c) = rng.normal();
  }
  std::vector<const Window*> ptrs;
  for (const auto& w : windows) ptrs.push_back(&w);
  return make_view_pairs(ptrs, policy, seed, 0, 0);
}

}  // namespace detail

// Central-difference check of the reverse-mode gradients of the combined
// pre-training objective with respect to every parameter element.
// rel = |analytic - numeric| / max(1, |analytic|, |numeric|).
inline GradCheckReport gradcheck_mcl(const TrainConfig& cfg, int batch_n = 4,
                                     double fd_eps = 1e-5,
                                     double tolerance = 1e-4) {
  validate_train_config(cfg);
  require(batch_n >= 2, "gradcheck: batch must have N >= 2");
  require(fd_eps > 0.0 && tolerance > 0.0,
          "gradcheck: eps and tolerance must be positive");

  const auto views =
      detail::random_view_batch(cfg.encoder, batch_n, cfg.policy, cfg.seed);
  const auto batch = normalize_views<double>(views);
  const double eff_alpha = cfg.effective_alpha();
  const double eff_beta = cfg.effective_beta();

  ParamSet<double> params = init_params<double>(cfg.encoder, cfg.seed);

  const auto objective = [&](const ParamSet<double>& p) {
    Tape<double> tape;
    const auto pv = register_params(tape, p);
    const auto losses = pretrain_loss_graph(tape, pv, cfg.encoder, batch,
                                            cfg.weights, eff_alpha, eff_beta);
    return tape.value(losses.total)(0, 0);
  };

  std::vector<Matrix> analytic;
  {
    Tape<double> tape;
    const auto pv = register_params(tape, params);
    const auto losses = pretrain_loss_graph(tape, pv, cfg.encoder, batch,
                                            cfg.weights, eff_alpha, eff_beta);
    tape.backward(losses.total);
    analytic = collect_grads(tape, pv);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t e = 0; e < params.entries.size(); ++e) {
    auto& tensor = params.entries[e].value;
    double tensor_max = 0.0;
    for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
      for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
        const double saved = tensor(r, c);
        tensor(r, c) = saved + fd_eps;
        const double up = objective(params);
        tensor(r, c) = saved - fd_eps;
        const double down = objective(params);
        tensor(r, c) = saved;
        const double numeric = (up - down) / (2.0 * fd_eps);
        const double a = analytic[e](r, c);
        const double rel = std::abs(a - numeric) /
                           std::max({1.0, std::abs(a), std::abs(numeric)});
        tensor_max = std::max(tensor_max, rel);
        ++report.n_elements;
      }
    }
    report.per_tensor.emplace_back(params.entries[e].name, tensor_max);
    if (tensor_max > report.max_rel_error) {
      report.max_rel_error = tensor_max;
      report.worst_tensor = params.entries[e].name;
    }
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace tfmcl
