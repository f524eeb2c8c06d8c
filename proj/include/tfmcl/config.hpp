#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tfmcl/augment.hpp"
#include "tfmcl/data.hpp"
#include "tfmcl/jsonio.hpp"
#include "tfmcl/loss.hpp"
#include "tfmcl/synth.hpp"
#include "tfmcl/train.hpp"

namespace tfmcl {

// One JSON document drives a whole run. Every key is optional and defaults
// to the owning module's default; unknown keys are rejected outright.
struct RunConfig {
  std::uint64_t seed = 42;
  SynthSpec synth;
  SplitSpec split;
  TrainConfig train;  // encoder n_channels/window_len of 0 = take from data
  std::string eval_partition = "test";
};

namespace detail {

inline TimeAug time_aug_from_string(const std::string& s) {
  for (TimeAug m : {TimeAug::resample, TimeAug::channel_substitution,
                    TimeAug::timing_inversion, TimeAug::noise_addition,
                    TimeAug::channel_perturbation})
    if (s == to_string(m)) return m;
  throw InvalidArgument("augment: unknown time method '" + s + "'");
}

inline FreqAug freq_aug_from_string(const std::string& s) {
  for (FreqAug m : {FreqAug::band_removal, FreqAug::band_addition})
    if (s == to_string(m)) return m;
  throw InvalidArgument("augment: unknown frequency method '" + s + "'");
}

inline std::array<double, 2> range_from_json(const Json& j,
                                             const std::string& where) {
  if (!j.is_array() || j.size() != 2)
    throw InvalidArgument(where + ": expected [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline Json synth_spec_to_json(const SynthSpec& s) {
  return Json{{"n_subjects", s.n_subjects},
              {"windows_per_subject", s.windows_per_subject},
              {"n_channels", s.n_channels},
              {"window_len", s.window_len},
              {"fs_hz", s.fs_hz},
              {"band_lo_hz", s.band_lo_hz},
              {"band_hi_hz", s.band_hi_hz},
              {"power_ratio", s.power_ratio},
              {"noise_sigma", s.noise_sigma}};
}

inline SynthSpec synth_spec_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j,
                      {"n_subjects", "windows_per_subject", "n_channels",
                       "window_len", "fs_hz", "band_lo_hz", "band_hi_hz",
                       "power_ratio", "noise_sigma"},
                      where);
  SynthSpec s;
  read_field(j, "n_subjects", s.n_subjects, where);
  read_field(j, "windows_per_subject", s.windows_per_subject, where);
  read_field(j, "n_channels", s.n_channels, where);
  read_field(j, "window_len", s.window_len, where);
  read_field(j, "fs_hz", s.fs_hz, where);
  read_field(j, "band_lo_hz", s.band_lo_hz, where);
  read_field(j, "band_hi_hz", s.band_hi_hz, where);
  read_field(j, "power_ratio", s.power_ratio, where);
  read_field(j, "noise_sigma", s.noise_sigma, where);
  return s;
}

inline Json split_spec_to_json(const SplitSpec& s) {
  return Json{{"strategy", s.strategy == SplitSpec::Strategy::subject_wise
                               ? "subject_wise"
                               : "window_wise"},
              {"train_frac", s.train_frac},
              {"val_frac", s.val_frac},
              {"test_frac", s.test_frac}};
}

inline SplitSpec split_spec_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j, {"strategy", "train_frac", "val_frac", "test_frac"},
                      where);
  SplitSpec s;
  if (j.contains("strategy")) {
    const auto v = j.at("strategy").get<std::string>();
    if (v == "subject_wise")
      s.strategy = SplitSpec::Strategy::subject_wise;
    else if (v == "window_wise")
      s.strategy = SplitSpec::Strategy::window_wise;
    else
      throw InvalidArgument(where + ": unknown strategy '" + v + "'");
  }
  read_field(j, "train_frac", s.train_frac, where);
  read_field(j, "val_frac", s.val_frac, where);
  read_field(j, "test_frac", s.test_frac, where);
  return s;
}

inline Json loss_weights_to_json(const LossWeights& w) {
  return Json{
      {"alpha", w.alpha},
      {"beta", w.beta},
      {"tau", w.tau},
      {"tfdl_variant",
       w.tfdl_variant == TfdlVariant::dispersion ? "dispersion" : "verbatim"},
      {"tfdl_inputs", w.tfdl_inputs == TfdlInputs::original    ? "original"
                      : w.tfdl_inputs == TfdlInputs::augmented ? "augmented"
                                                               : "both"}};
}

inline LossWeights loss_weights_from_json(const Json& j,
                                          const std::string& where) {
  reject_unknown_keys(j, {"alpha", "beta", "tau", "tfdl_variant", "tfdl_inputs"},
                      where);
  LossWeights w;
  read_field(j, "alpha", w.alpha, where);
  read_field(j, "beta", w.beta, where);
  read_field(j, "tau", w.tau, where);
  if (j.contains("tfdl_variant")) {
    const auto v = j.at("tfdl_variant").get<std::string>();
    if (v == "dispersion")
      w.tfdl_variant = TfdlVariant::dispersion;
    else if (v == "verbatim")
      w.tfdl_variant = TfdlVariant::verbatim;
    else
      throw InvalidArgument(where + ": unknown tfdl_variant '" + v + "'");
  }
  if (j.contains("tfdl_inputs")) {
    const auto v = j.at("tfdl_inputs").get<std::string>();
    if (v == "original")
      w.tfdl_inputs = TfdlInputs::original;
    else if (v == "augmented")
      w.tfdl_inputs = TfdlInputs::augmented;
    else if (v == "both")
      w.tfdl_inputs = TfdlInputs::both;
    else
      throw InvalidArgument(where + ": unknown tfdl_inputs '" + v + "'");
  }
  return w;
}

inline Json aug_policy_to_json(const AugPolicy& p) {
  Json tm = Json::array();
  for (TimeAug m : p.time_methods) tm.push_back(to_string(m));
  Json fm = Json::array();
  for (FreqAug m : p.freq_methods) fm.push_back(to_string(m));
  return Json{{"time_methods", tm},
              {"freq_methods", fm},
              {"noise_sigma_frac", p.noise_sigma_frac},
              {"resample_factor_range",
               {p.resample_factor_range[0], p.resample_factor_range[1]}},
              {"perturb_scale_range",
               {p.perturb_scale_range[0], p.perturb_scale_range[1]}},
              {"band_frac", p.band_frac},
              {"band_add_amp_frac", p.band_add_amp_frac}};
}

inline AugPolicy aug_policy_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j,
                      {"time_methods", "freq_methods", "noise_sigma_frac",
                       "resample_factor_range", "perturb_scale_range",
                       "band_frac", "band_add_amp_frac"},
                      where);
  AugPolicy p;
  if (j.contains("time_methods")) {
    p.time_methods.clear();
    for (const auto& v : j.at("time_methods"))
      p.time_methods.push_back(
          detail::time_aug_from_string(v.get<std::string>()));
  }
  if (j.contains("freq_methods")) {
    p.freq_methods.clear();
    for (const auto& v : j.at("freq_methods"))
      p.freq_methods.push_back(
          detail::freq_aug_from_string(v.get<std::string>()));
  }
  read_field(j, "noise_sigma_frac", p.noise_sigma_frac, where);
  if (j.contains("resample_factor_range"))
    p.resample_factor_range = detail::range_from_json(
        j.at("resample_factor_range"), where + ".resample_factor_range");
  if (j.contains("perturb_scale_range"))
    p.perturb_scale_range = detail::range_from_json(
        j.at("perturb_scale_range"), where + ".perturb_scale_range");
  read_field(j, "band_frac", p.band_frac, where);
  read_field(j, "band_add_amp_frac", p.band_add_amp_frac, where);
  return p;
}

inline Json run_config_to_json(const RunConfig& rc) {
  Json j;
  j["seed"] = rc.seed;
  j["data"] = Json{{"synth", synth_spec_to_json(rc.synth)},
                   {"split", split_spec_to_json(rc.split)}};
  j["encoder"] = encoder_config_to_json(rc.train.encoder);
  j["loss"] = loss_weights_to_json(rc.train.weights);
  j["augment"] = aug_policy_to_json(rc.train.policy);
  j["train"] = Json{{"batch_size", rc.train.batch_size},
                    {"epochs_pretrain", rc.train.epochs_pretrain},
                    {"epochs_finetune", rc.train.epochs_finetune},
                    {"learning_rate", rc.train.learning_rate},
                    {"adam_beta1", rc.train.adam_beta1},
                    {"adam_beta2", rc.train.adam_beta2},
                    {"adam_eps", rc.train.adam_eps},
                    {"enable_frl", rc.train.enable_frl},
                    {"enable_tfdl", rc.train.enable_tfdl}};
  j["eval"] = Json{{"partition", rc.eval_partition}};
  return j;
}

inline RunConfig run_config_from_json(const Json& j) {
  reject_unknown_keys(
      j, {"seed", "data", "encoder", "loss", "augment", "train", "eval"},
      "config");
  RunConfig rc;
  // Encoder geometry defaults to "resolve from the dataset".
  rc.train.encoder.n_channels = 0;
  rc.train.encoder.window_len = 0;
  read_field(j, "seed", rc.seed, "config");
  if (j.contains("data")) {
    reject_unknown_keys(j.at("data"), {"synth", "split"}, "config.data");
    if (j.at("data").contains("synth"))
      rc.synth = synth_spec_from_json(j.at("data").at("synth"),
                                      "config.data.synth");
    if (j.at("data").contains("split"))
      rc.split = split_spec_from_json(j.at("data").at("split"),
                                      "config.data.split");
  }
  if (j.contains("encoder"))
    rc.train.encoder = encoder_config_from_json(j.at("encoder"),
                                                "config.encoder");
  if (j.contains("loss"))
    rc.train.weights = loss_weights_from_json(j.at("loss"), "config.loss");
  if (j.contains("augment"))
    rc.train.policy = aug_policy_from_json(j.at("augment"), "config.augment");
  if (j.contains("train")) {
    const Json& t = j.at("train");
    reject_unknown_keys(t,
                        {"batch_size", "epochs_pretrain", "epochs_finetune",
                         "learning_rate", "adam_beta1", "adam_beta2",
                         "adam_eps", "enable_frl", "enable_tfdl"},
                        "config.train");
    read_field(t, "batch_size", rc.train.batch_size, "config.train");
    read_field(t, "epochs_pretrain", rc.train.epochs_pretrain, "config.train");
    read_field(t, "epochs_finetune", rc.train.epochs_finetune, "config.train");
    read_field(t, "learning_rate", rc.train.learning_rate, "config.train");
    read_field(t, "adam_beta1", rc.train.adam_beta1, "config.train");
    read_field(t, "adam_beta2", rc.train.adam_beta2, "config.train");
    read_field(t, "adam_eps", rc.train.adam_eps, "config.train");
    read_field(t, "enable_frl", rc.train.enable_frl, "config.train");
    read_field(t, "enable_tfdl", rc.train.enable_tfdl, "config.train");
  }
  if (j.contains("eval")) {
    reject_unknown_keys(j.at("eval"), {"partition"}, "config.eval");
    read_field(j.at("eval"), "partition", rc.eval_partition, "config.eval");
    require(rc.eval_partition == "train" || rc.eval_partition == "val" ||
                rc.eval_partition == "test",
            "config.eval: partition must be train, val or test");
  }
  rc.train.seed = rc.seed;
  rc.split.seed = rc.seed;
  // Statically checkable sections are rejected at parse time so every
  // command fails fast on a bad file, not just the ones that train.
  validate_weights(rc.train.weights);
  validate_policy(rc.train.policy);
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open config");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

// Fills data-derived encoder geometry and validates the final result. When
// the config pins geometry explicitly it must agree with the dataset.
inline TrainConfig resolved_train_config(const RunConfig& rc,
                                         const Dataset& ds) {
  TrainConfig cfg = rc.train;
  if (cfg.encoder.n_channels == 0) cfg.encoder.n_channels = ds.n_channels;
  if (cfg.encoder.window_len == 0) cfg.encoder.window_len = ds.window_len;
  require(cfg.encoder.n_channels == ds.n_channels &&
              cfg.encoder.window_len == ds.window_len,
          "config: encoder geometry disagrees with dataset");
  validate_train_config(cfg);
  return cfg;
}

}  // namespace tfmcl
