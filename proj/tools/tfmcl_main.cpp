// tfmcl command-line tool: synthetic data generation, dataset validation,
// PSD extraction, pre-training, fine-tuning, evaluation, gradient checking
// and parameter sweeps. Every run directory receives the fully resolved
// configuration, the seed and the tool version so a run can be reproduced
// from its artifacts alone.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tfmcl/tfmcl.hpp"

namespace fs = std::filesystem;
using tfmcl::Json;

namespace {

void print_error(const std::string& type, const std::string& message) {
  Json err{{"error", Json{{"type", type}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw tfmcl::IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw tfmcl::IoError("short write to " + path.string());
}

tfmcl::RunConfig load_config_or_default(const std::string& config_path) {
  if (config_path.empty()) return tfmcl::RunConfig{};
  return tfmcl::load_run_config(config_path);
}

// Resolved config + seed + version, echoed into every run directory.
void write_run_stamp(const fs::path& dir, const tfmcl::RunConfig& rc,
                     const std::string& command) {
  fs::create_directories(dir);
  write_text(dir / "config.resolved.json",
             tfmcl::run_config_to_json(rc).dump(2) + "\n");
  Json info{{"command", command},
            {"seed", rc.seed},
            {"tool_version", tfmcl::kVersion}};
  write_text(dir / "run_info.json", info.dump(2) + "\n");
}

std::string pretrain_log_ndjson(const std::vector<tfmcl::LossRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    Json row{{"epoch", r.epoch},   {"batch", r.batch}, {"l_t", r.l_t},
             {"l_f", r.l_f},       {"l_z", r.l_z},     {"l_tf", r.l_tf},
             {"total", r.total}};
    out += row.dump();
    out += "\n";
  }
  return out;
}

Json metrics_to_json(const tfmcl::Metrics& m) {
  return Json{{"accuracy", m.accuracy},
              {"f1", m.f1},
              {"confusion",
               Json{{"counts",
                     Json::array({Json::array({m.counts[0][0], m.counts[0][1]}),
                                  Json::array({m.counts[1][0], m.counts[1][1]})})},
                    {"row_norm",
                     Json::array(
                         {Json::array({m.row_norm[0][0], m.row_norm[0][1]}),
                          Json::array({m.row_norm[1][0], m.row_norm[1][1]})})}}}};
}

int cmd_gen_synth(const std::string& config_path, const std::string& out_dir) {
  const tfmcl::RunConfig rc = load_config_or_default(config_path);
  tfmcl::validate_synth_spec(rc.synth);
  const tfmcl::Dataset ds = tfmcl::gen_synthetic_dataset(rc.synth, rc.seed);
  tfmcl::save_dataset(ds, out_dir);
  write_run_stamp(out_dir, rc, "gen-synth");
  Json summary{{"windows", ds.windows.size()},
               {"n_channels", ds.n_channels},
               {"window_len", ds.window_len},
               {"fs_hz", ds.fs_hz},
               {"out", out_dir}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_validate(const std::string& dir) {
  const tfmcl::Dataset ds = tfmcl::load_dataset(dir);
  tfmcl::validate_dataset(ds);
  std::size_t labeled = 0;
  for (const auto& w : ds.windows)
    if (w.label.has_value()) ++labeled;
  Json summary{{"ok", true},
               {"windows", ds.windows.size()},
               {"labeled", labeled},
               {"subjects", ds.subjects().size()},
               {"n_channels", ds.n_channels},
               {"window_len", ds.window_len},
               {"fs_hz", ds.fs_hz}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_psd(const std::string& in_path, int channels, int len, double fs_hz,
            const std::string& out_path) {
  tfmcl::require(channels >= 1 && len >= 4, "psd: bad --channels/--len");
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw tfmcl::IoError("cannot open " + in_path);
  const std::size_t n = static_cast<std::size_t>(channels) *
                        static_cast<std::size_t>(len);
  std::vector<float> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float))
    throw tfmcl::IoError(in_path + ": expected " +
                         std::to_string(n * sizeof(float)) + " bytes");
  in.peek();
  if (!in.eof()) throw tfmcl::IoError(in_path + ": trailing bytes");

  tfmcl::Window w;
  w.fs_hz = fs_hz;
  w.subject_id = "cli";
  w.samples.resize(channels, len);
  for (int e = 0; e < channels; ++e)
    for (int t = 0; t < len; ++t)
      w.samples(e, t) =
          static_cast<double>(raw[static_cast<std::size_t>(e * len + t)]);
  tfmcl::require(w.samples.allFinite(), "psd: non-finite samples in input");

  const tfmcl::Matrix p = tfmcl::window_psd(w);
  Json freq = Json::array();
  for (int m = 0; m < len / 2; ++m) freq.push_back(m * fs_hz / len);
  Json rows = Json::array();
  for (int e = 0; e < channels; ++e) {
    Json row = Json::array();
    for (int m = 0; m < len / 2; ++m) row.push_back(p(e, m));
    rows.push_back(std::move(row));
  }
  Json out{{"fs_hz", fs_hz},
           {"n_channels", channels},
           {"window_len", len},
           {"freq_hz", std::move(freq)},
           {"psd", std::move(rows)}};
  write_text(out_path, out.dump(2) + "\n");
  return 0;
}

int cmd_pretrain(const std::string& data_dir, const std::string& config_path,
                 const std::string& out_dir) {
  const tfmcl::RunConfig rc = load_config_or_default(config_path);
  const tfmcl::Dataset ds = tfmcl::load_dataset(data_dir);
  const tfmcl::TrainConfig tc = tfmcl::resolved_train_config(rc, ds);
  const tfmcl::SplitResult parts = tfmcl::split(ds, rc.split);

  tfmcl::RunConfig resolved = rc;
  resolved.train = tc;
  write_run_stamp(out_dir, resolved, "pretrain");

  const tfmcl::PretrainResult result = tfmcl::pretrain(parts.train, tc);
  tfmcl::save_checkpoint(result.params, fs::path(out_dir) / "checkpoint.tfmcl");
  write_text(fs::path(out_dir) / "pretrain_log.ndjson",
             pretrain_log_ndjson(result.log));
  Json summary{{"out", out_dir},
               {"train_windows", parts.train.windows.size()},
               {"epochs", tc.epochs_pretrain},
               {"final_total", result.log.empty() ? 0.0
                                                  : result.log.back().total}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_finetune(const std::string& data_dir, const std::string& ckpt_path,
                 const std::string& config_path, const std::string& out_dir) {
  const tfmcl::RunConfig rc = load_config_or_default(config_path);
  const tfmcl::Dataset ds = tfmcl::load_dataset(data_dir);
  const tfmcl::TrainConfig tc = tfmcl::resolved_train_config(rc, ds);
  const tfmcl::SplitResult parts = tfmcl::split(ds, rc.split);
  const tfmcl::ParamSet<double> start = tfmcl::load_checkpoint(ckpt_path);

  tfmcl::RunConfig resolved = rc;
  resolved.train = tc;
  write_run_stamp(out_dir, resolved, "finetune");

  const tfmcl::FinetuneResult result =
      tfmcl::finetune(start, parts.train, parts.val, tc);
  const fs::path best_path = fs::path(out_dir) / "checkpoint.tfmcl";
  tfmcl::save_checkpoint(result.best_params, best_path);

  std::string log_text;
  for (const auto& row : result.log) {
    Json j{{"epoch", row.epoch},
           {"train_loss", row.train_loss},
           {"val_accuracy", row.val.accuracy},
           {"val_f1", row.val.f1}};
    log_text += j.dump();
    log_text += "\n";
  }
  write_text(fs::path(out_dir) / "finetune_log.ndjson", log_text);

  // Final metrics come from the checkpoint as written (f32 payload), so the
  // reported numbers match any later re-evaluation of the artifact.
  const tfmcl::ParamSet<double> reloaded = tfmcl::load_checkpoint(best_path);
  const tfmcl::Metrics val = tfmcl::evaluate(reloaded, parts.val);
  Json metrics{{"best_epoch", result.best_epoch},
               {"val", metrics_to_json(val)}};
  write_text(fs::path(out_dir) / "metrics.json", metrics.dump(2) + "\n");
  std::cout << metrics.dump() << "\n";
  return 0;
}

const tfmcl::Dataset& pick_partition(const tfmcl::SplitResult& parts,
                                     const std::string& name) {
  if (name == "train") return parts.train;
  if (name == "val") return parts.val;
  return parts.test;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt_path,
             const std::string& config_path, const std::string& out_path) {
  const tfmcl::Dataset ds = tfmcl::load_dataset(data_dir);
  const tfmcl::ParamSet<double> params = tfmcl::load_checkpoint(ckpt_path);

  std::string partition = "all";
  tfmcl::Metrics m;
  std::size_t n_windows = 0;
  if (config_path.empty()) {
    m = tfmcl::evaluate(params, ds);
    n_windows = ds.windows.size();
  } else {
    const tfmcl::RunConfig rc = tfmcl::load_run_config(config_path);
    const tfmcl::SplitResult parts = tfmcl::split(ds, rc.split);
    const tfmcl::Dataset& part = pick_partition(parts, rc.eval_partition);
    m = tfmcl::evaluate(params, part);
    partition = rc.eval_partition;
    n_windows = part.windows.size();
  }

  Json report = metrics_to_json(m);
  report["partition"] = partition;
  report["n_windows"] = n_windows;
  report["tool_version"] = tfmcl::kVersion;
  write_text(out_path, report.dump(2) + "\n");
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& config_path) {
  tfmcl::TrainConfig tc;
  tc.encoder = tfmcl::tiny_config();
  if (!config_path.empty()) {
    const tfmcl::RunConfig rc = tfmcl::load_run_config(config_path);
    tc = rc.train;
    // encoder geometry of 0 means "resolve from data"; gradcheck has no data,
    // so unresolved configs fall back to the built-in tiny model.
    if (rc.train.encoder.n_channels > 0 && rc.train.encoder.window_len > 0)
      tc.encoder = rc.train.encoder;
    else
      tc.encoder = tfmcl::tiny_config();
  }
  const tfmcl::GradCheckReport report = tfmcl::gradcheck_mcl(tc);
  Json j{{"max_rel_error", report.max_rel_error},
         {"worst_tensor", report.worst_tensor},
         {"n_elements", report.n_elements},
         {"tolerance", report.tolerance},
         {"pass", report.pass}};
  std::cout << j.dump() << "\n";
  return report.pass ? 0 : 1;
}

int cmd_sweep(const std::string& param, const std::string& values_csv,
              const std::string& config_path, const std::string& out_dir) {
  tfmcl::require(param == "alpha" || param == "beta" || param == "tau",
                 "sweep: --param must be one of alpha, beta, tau");
  std::vector<std::string> tokens;
  std::string token;
  for (char c : values_csv) {
    if (c == ',') {
      tokens.push_back(token);
      token.clear();
    } else {
      token += c;
    }
  }
  tokens.push_back(token);
  tfmcl::require(!tokens.empty() && !tokens.front().empty(),
                 "sweep: --values must be a comma-separated list");
  std::vector<double> values;
  for (const auto& t : tokens) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw tfmcl::InvalidArgument("sweep: bad value '" + t + "'");
    }
    if (used != t.size())
      throw tfmcl::InvalidArgument("sweep: bad value '" + t + "'");
    values.push_back(v);
  }

  const tfmcl::RunConfig base = load_config_or_default(config_path);
  write_run_stamp(out_dir, base, "sweep");

  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < values.size(); ++i) {
    tfmcl::RunConfig rc = base;
    if (param == "alpha")
      rc.train.weights.alpha = values[i];
    else if (param == "beta")
      rc.train.weights.beta = values[i];
    else
      rc.train.weights.tau = values[i];
    tfmcl::validate_weights(rc.train.weights);

    const fs::path run_dir = fs::path(out_dir) / (param + "_" + tokens[i]);
    const tfmcl::Dataset ds = tfmcl::gen_synthetic_dataset(rc.synth, rc.seed);
    const tfmcl::TrainConfig tc = tfmcl::resolved_train_config(rc, ds);
    const tfmcl::SplitResult parts = tfmcl::split(ds, rc.split);

    tfmcl::RunConfig resolved = rc;
    resolved.train = tc;
    write_run_stamp(run_dir, resolved, "sweep");

    const tfmcl::PretrainResult pre = tfmcl::pretrain(parts.train, tc);
    const tfmcl::FinetuneResult ft =
        tfmcl::finetune(pre.params, parts.train, parts.val, tc);
    const fs::path best_path = run_dir / "checkpoint.tfmcl";
    tfmcl::save_checkpoint(ft.best_params, best_path);
    write_text(run_dir / "pretrain_log.ndjson", pretrain_log_ndjson(pre.log));

    const tfmcl::ParamSet<double> reloaded = tfmcl::load_checkpoint(best_path);
    const tfmcl::Dataset& part = pick_partition(parts, base.eval_partition);
    const tfmcl::Metrics m = tfmcl::evaluate(reloaded, part);
    Json record = metrics_to_json(m);
    record["value"] = values[i];
    record["partition"] = base.eval_partition;
    write_text(run_dir / "metrics.json", record.dump(2) + "\n");
    results[tokens[i]] = record;
  }

  nlohmann::ordered_json summary{{"param", param}, {"results", results}};
  write_text(fs::path(out_dir) / "sweep_results.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("TFMCL_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 0)
      Eigen::setNbThreads(static_cast<int>(n));
  }

  CLI::App app{"time-frequency contrastive representation learning toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tfmcl::kVersion));

  std::string config_path, data_dir, out_path, in_path, ckpt_path;
  std::string sweep_param, sweep_values;
  int channels = 0, len = 0;
  double fs_hz = 1.0;

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset");
  gen->add_option("--out", out_path, "output dataset directory")->required();
  gen->add_option("--config", config_path, "run configuration JSON");

  auto* val = app.add_subcommand("validate", "validate a dataset directory");
  val->add_option("dir", data_dir, "dataset directory")->required();

  auto* psd = app.add_subcommand("psd", "PSD of one raw window file");
  psd->add_option("--in", in_path, "raw f32le window file")->required();
  psd->add_option("--channels", channels, "channel count")->required();
  psd->add_option("--len", len, "window length in samples")->required();
  psd->add_option("--fs", fs_hz, "sampling rate in Hz (default 1)");
  psd->add_option("--out", out_path, "output JSON path")->required();

  auto* pre = app.add_subcommand("pretrain", "self-supervised pre-training");
  pre->add_option("--data", data_dir, "dataset directory")->required();
  pre->add_option("--config", config_path, "run configuration JSON");
  pre->add_option("--out", out_path, "output run directory")->required();

  auto* fin = app.add_subcommand("finetune", "supervised fine-tuning");
  fin->add_option("--data", data_dir, "dataset directory")->required();
  fin->add_option("--ckpt", ckpt_path, "pre-trained checkpoint")->required();
  fin->add_option("--config", config_path, "run configuration JSON");
  fin->add_option("--out", out_path, "output run directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  ev->add_option("--config", config_path,
                 "run configuration JSON (evaluates its eval partition)");
  ev->add_option("--out", out_path, "output report JSON path")->required();

  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference gradient check");
  gc->add_option("--config", config_path, "run configuration JSON");

  auto* sw = app.add_subcommand("sweep", "loss-weight sweep on synthetic data");
  sw->add_option("--param", sweep_param, "alpha, beta or tau")->required();
  sw->add_option("--values", sweep_values, "comma-separated values")
      ->required();
  sw->add_option("--config", config_path, "run configuration JSON");
  sw->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    print_error("usage", e.what());
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(config_path, out_path);
    if (val->parsed()) return cmd_validate(data_dir);
    if (psd->parsed()) return cmd_psd(in_path, channels, len, fs_hz, out_path);
    if (pre->parsed()) return cmd_pretrain(data_dir, config_path, out_path);
    if (fin->parsed())
      return cmd_finetune(data_dir, ckpt_path, config_path, out_path);
    if (ev->parsed()) return cmd_eval(data_dir, ckpt_path, config_path, out_path);
    if (gc->parsed()) return cmd_gradcheck(config_path);
    if (sw->parsed())
      return cmd_sweep(sweep_param, sweep_values, config_path, out_path);
  } catch (const tfmcl::InvalidArgument& e) {
    print_error("invalid_argument", e.what());
    return 1;
  } catch (const tfmcl::DegenerateInput& e) {
    print_error("degenerate_input", e.what());
    return 1;
  } catch (const tfmcl::NumericError& e) {
    print_error("numeric_error", e.what());
    return 1;
  } catch (const tfmcl::IoError& e) {
    print_error("io_error", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
