#include <cmath>
#include <cstdlib>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <sys/wait.h>

#include "tfmcl/signal.hpp"
#include "tfmcl/version.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Runs the installed binary with stdout/stderr captured to files.
CliResult run_cli(const std::string& args) {
  static const std::string bin = TFMCL_CLI_PATH;
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / "tfmcl_cli_stdout.txt";
  const fs::path err = dir / "tfmcl_cli_stderr.txt";
  const std::string cmd =
      bin + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  fs::remove(out);
  fs::remove(err);
  return r;
}

// Fresh working directory per test case, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("tfmcl_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Small synth + short schedules so CLI round trips stay subsecond.
Json tiny_config_json() {
  return Json{
      {"seed", 11},
      {"data",
       Json{{"synth", Json{{"n_subjects", 5},
                           {"windows_per_subject", 4},
                           {"n_channels", 4},
                           {"window_len", 64},
                           {"fs_hz", 64.0},
                           {"band_lo_hz", 8.0},
                           {"band_hi_hz", 12.0},
                           {"power_ratio", 3.0},
                           {"noise_sigma", 0.5}}},
            {"split", Json{{"strategy", "window_wise"},
                           {"train_frac", 0.6},
                           {"val_frac", 0.2},
                           {"test_frac", 0.2}}}}},
      {"encoder", Json{{"n_channels", 4},
                       {"window_len", 64},
                       {"time_kernel", 8},
                       {"freq_kernel", 4},
                       {"n_step_filters", 4},
                       {"n_channel_filters", 4},
                       {"ffn_hidden", 8},
                       {"repr_dim", 8},
                       {"fusion_dim", 8}}},
      {"train", Json{{"batch_size", 6},
                     {"epochs_pretrain", 2},
                     {"epochs_finetune", 3},
                     {"learning_rate", 0.001}}}};
}

void write_json(const fs::path& p, const Json& j) {
  std::ofstream(p) << j.dump(2) << "\n";
}

Json parse(const std::string& text) { return Json::parse(text); }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("cli: version and help exit cleanly") {
  const CliResult v = run_cli("--version");
  CHECK(v.code == 0);
  CHECK(v.out.find(tfmcl::kVersion) != std::string::npos);

  const CliResult h = run_cli("--help");
  CHECK(h.code == 0);
  CHECK(h.out.find("gen-synth") != std::string::npos);
  CHECK(h.out.find("pretrain") != std::string::npos);
}

TEST_CASE("cli: usage errors report structured JSON on stderr") {
  SUBCASE("no subcommand") {
    const CliResult r = run_cli("");
    CHECK(r.code != 0);
    CHECK(parse(r.err)["error"]["type"] == "usage");
  }
  SUBCASE("unknown flag") {
    const CliResult r = run_cli("validate --frobnicate x");
    CHECK(r.code != 0);
    CHECK(parse(r.err)["error"]["type"] == "usage");
  }
  SUBCASE("missing required option") {
    const CliResult r = run_cli("gen-synth");
    CHECK(r.code != 0);
    CHECK(parse(r.err)["error"]["type"] == "usage");
  }
}

TEST_CASE("cli: gen-synth writes a loadable dataset plus run stamps") {
  TempDir tmp("gen");
  const fs::path cfg = tmp.path / "config.json";
  write_json(cfg, tiny_config_json());
  const fs::path data = tmp.path / "data";

  const CliResult gen =
      run_cli("gen-synth --config " + q(cfg) + " --out " + q(data));
  REQUIRE(gen.code == 0);
  const Json summary = parse(gen.out);
  CHECK(summary["windows"] == 20);
  CHECK(summary["n_channels"] == 4);
  CHECK(summary["window_len"] == 64);
  CHECK(fs::exists(data / "manifest.json"));
  CHECK(fs::exists(data / "w_000000.f32"));

  const Json stamp = parse(slurp(data / "config.resolved.json"));
  CHECK(stamp["seed"] == 11);
  CHECK(stamp["data"]["synth"]["n_subjects"] == 5);
  const Json info = parse(slurp(data / "run_info.json"));
  CHECK(info["command"] == "gen-synth");
  CHECK(info["seed"] == 11);
  CHECK(info["tool_version"] == tfmcl::kVersion);

  const CliResult val = run_cli("validate " + q(data));
  CHECK(val.code == 0);
  const Json report = parse(val.out);
  CHECK(report["ok"] == true);
  CHECK(report["windows"] == 20);
  CHECK(report["labeled"] == 20);
  CHECK(report["subjects"] == 5);
}

TEST_CASE("cli: gen-synth is bitwise reproducible") {
  TempDir tmp("repro");
  const fs::path cfg = tmp.path / "config.json";
  write_json(cfg, tiny_config_json());
  const CliResult a =
      run_cli("gen-synth --config " + q(cfg) + " --out " + q(tmp.path / "a"));
  const CliResult b =
      run_cli("gen-synth --config " + q(cfg) + " --out " + q(tmp.path / "b"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(tmp.path / "a" / "manifest.json") ==
        slurp(tmp.path / "b" / "manifest.json"));
  CHECK(slurp(tmp.path / "a" / "w_000007.f32") ==
        slurp(tmp.path / "b" / "w_000007.f32"));
  CHECK(slurp(tmp.path / "a" / "run_info.json") ==
        slurp(tmp.path / "b" / "run_info.json"));
}

TEST_CASE("cli: domain errors map to typed JSON and exit 1") {
  TempDir tmp("err");
  SUBCASE("missing dataset directory") {
    const CliResult r = run_cli("validate " + q(tmp.path / "nope"));
    CHECK(r.code == 1);
    const Json e = parse(r.err);
    CHECK(e["error"]["type"] == "io_error");
    CHECK(e["error"]["message"].get<std::string>().size() > 0);
  }
  SUBCASE("unknown config key") {
    Json cfg = tiny_config_json();
    cfg["surprise"] = 1;
    const fs::path p = tmp.path / "bad.json";
    write_json(p, cfg);
    const CliResult r =
        run_cli("gen-synth --config " + q(p) + " --out " + q(tmp.path / "d"));
    CHECK(r.code == 1);
    CHECK(parse(r.err)["error"]["type"] == "invalid_argument");
  }
  SUBCASE("config file is not JSON") {
    const fs::path p = tmp.path / "garbage.json";
    std::ofstream(p) << "not json {";
    const CliResult r =
        run_cli("gen-synth --config " + q(p) + " --out " + q(tmp.path / "d"));
    CHECK(r.code == 1);
    CHECK(parse(r.err)["error"]["type"] == "io_error");
  }
  SUBCASE("invalid hyperparameter") {
    Json cfg = tiny_config_json();
    cfg["loss"] = Json{{"alpha", 1.5}, {"beta", 1.0}, {"tau", 0.2}};
    const fs::path p = tmp.path / "alpha.json";
    write_json(p, cfg);
    const CliResult r =
        run_cli("gen-synth --config " + q(p) + " --out " + q(tmp.path / "d"));
    CHECK(r.code == 1);
    CHECK(parse(r.err)["error"]["type"] == "invalid_argument");
  }
}

TEST_CASE("cli: psd output matches the library computation") {
  TempDir tmp("psd");
  const int channels = 2, len = 16;
  // deterministic fixture: cosine on channel 0, ramp on channel 1
  const double two_pi = 6.283185307179586;
  tfmcl::Matrix samples(channels, len);
  for (int t = 0; t < len; ++t) {
    samples(0, t) = std::cos(two_pi * 4.0 * t / len);
    samples(1, t) = 0.1 * t - 0.5;
  }
  // the CLI reads float32, so the reference passes through the same cast
  const Eigen::MatrixXf as_f32 = samples.cast<float>();

  const fs::path raw = tmp.path / "win.f32";
  {
    std::ofstream out(raw, std::ios::binary);
    for (int e = 0; e < channels; ++e)
      for (int t = 0; t < len; ++t) {
        const float v = as_f32(e, t);
        out.write(reinterpret_cast<const char*>(&v), sizeof(float));
      }
  }

  const fs::path out_json = tmp.path / "psd.json";
  const CliResult r = run_cli("psd --in " + q(raw) + " --channels 2 --len 16" +
                              " --fs 16 --out " + q(out_json));
  REQUIRE(r.code == 0);
  const Json report = parse(slurp(out_json));
  CHECK(report["fs_hz"] == 16.0);
  CHECK(report["n_channels"] == 2);
  CHECK(report["window_len"] == 16);
  REQUIRE(report["freq_hz"].size() == 8);
  CHECK(report["freq_hz"][0] == 0.0);
  CHECK(report["freq_hz"][1].get<double>() == doctest::Approx(1.0));
  REQUIRE(report["psd"].size() == 2);
  REQUIRE(report["psd"][0].size() == 8);

  tfmcl::Window ref;
  ref.fs_hz = 16.0;
  ref.subject_id = "ref";
  ref.samples = as_f32.cast<double>();
  const tfmcl::Matrix expect = tfmcl::window_psd(ref);
  for (int e = 0; e < channels; ++e)
    for (int m = 0; m < 8; ++m)
      CHECK(report["psd"][e][m].get<double>() ==
            doctest::Approx(expect(e, m)).epsilon(1e-12));

  SUBCASE("short file is rejected") {
    fs::resize_file(raw, 60);
    const CliResult bad = run_cli("psd --in " + q(raw) +
                                  " --channels 2 --len 16 --fs 16 --out " +
                                  q(tmp.path / "x.json"));
    CHECK(bad.code == 1);
    CHECK(parse(bad.err)["error"]["type"] == "io_error");
  }
  SUBCASE("trailing bytes are rejected") {
    std::ofstream(raw, std::ios::binary | std::ios::app) << "XX";
    const CliResult bad = run_cli("psd --in " + q(raw) +
                                  " --channels 2 --len 16 --fs 16 --out " +
                                  q(tmp.path / "x.json"));
    CHECK(bad.code == 1);
    CHECK(parse(bad.err)["error"]["type"] == "io_error");
  }
}

TEST_CASE("cli: pretrain, finetune and eval chain end to end") {
  TempDir tmp("chain");
  const fs::path cfg = tmp.path / "config.json";
  write_json(cfg, tiny_config_json());
  const fs::path data = tmp.path / "data";
  REQUIRE(run_cli("gen-synth --config " + q(cfg) + " --out " + q(data)).code ==
          0);

  // pretrain
  const fs::path pre_dir = tmp.path / "pre";
  const CliResult pre = run_cli("pretrain --data " + q(data) + " --config " +
                                q(cfg) + " --out " + q(pre_dir));
  REQUIRE(pre.code == 0);
  CHECK(fs::exists(pre_dir / "checkpoint.tfmcl"));
  CHECK(fs::exists(pre_dir / "config.resolved.json"));
  {
    std::ifstream log(pre_dir / "pretrain_log.ndjson");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
      const Json row = parse(line);
      CHECK(row.contains("epoch"));
      CHECK(row.contains("total"));
      CHECK(std::isfinite(row["total"].get<double>()));
      ++lines;
    }
    // 12 train windows (0.6 of 20), batch 6 -> 2 batches x 2 epochs
    CHECK(lines == 4);
    // the resolved stamp records the data-derived encoder geometry
    const Json stamp = parse(slurp(pre_dir / "config.resolved.json"));
    CHECK(stamp["encoder"]["n_channels"] == 4);
    CHECK(stamp["encoder"]["window_len"] == 64);
  }

  // finetune from the pre-trained checkpoint
  const fs::path ft_dir = tmp.path / "ft";
  const CliResult fin = run_cli(
      "finetune --data " + q(data) + " --ckpt " +
      q(pre_dir / "checkpoint.tfmcl") + " --config " + q(cfg) + " --out " +
      q(ft_dir));
  REQUIRE(fin.code == 0);
  CHECK(fs::exists(ft_dir / "checkpoint.tfmcl"));
  CHECK(fs::exists(ft_dir / "finetune_log.ndjson"));
  const Json ft_metrics = parse(slurp(ft_dir / "metrics.json"));
  CHECK(ft_metrics["best_epoch"].get<int>() >= 0);
  const double val_acc = ft_metrics["val"]["accuracy"].get<double>();
  CHECK(val_acc >= 0.0);
  CHECK(val_acc <= 1.0);

  // eval on the held-out partition named by the config
  const fs::path report_path = tmp.path / "report.json";
  const CliResult ev = run_cli("eval --data " + q(data) + " --ckpt " +
                               q(ft_dir / "checkpoint.tfmcl") + " --config " +
                               q(cfg) + " --out " + q(report_path));
  REQUIRE(ev.code == 0);
  const Json report = parse(slurp(report_path));
  CHECK(report["partition"] == "test");
  CHECK(report["n_windows"] == 4);  // 0.2 of 20
  const auto& counts = report["confusion"]["counts"];
  const auto total = counts[0][0].get<int>() + counts[0][1].get<int>() +
                     counts[1][0].get<int>() + counts[1][1].get<int>();
  CHECK(total == 4);

  // eval without a config covers the whole set
  const fs::path all_path = tmp.path / "all.json";
  const CliResult all = run_cli("eval --data " + q(data) + " --ckpt " +
                                q(ft_dir / "checkpoint.tfmcl") + " --out " +
                                q(all_path));
  REQUIRE(all.code == 0);
  const Json all_report = parse(slurp(all_path));
  CHECK(all_report["partition"] == "all");
  CHECK(all_report["n_windows"] == 20);

  // a stale checkpoint against mismatched geometry fails loudly
  Json other = tiny_config_json();
  other["data"]["synth"]["n_channels"] = 8;
  other["encoder"]["n_channels"] = 8;
  const fs::path cfg8 = tmp.path / "cfg8.json";
  write_json(cfg8, other);
  const fs::path data8 = tmp.path / "data8";
  REQUIRE(
      run_cli("gen-synth --config " + q(cfg8) + " --out " + q(data8)).code ==
      0);
  const CliResult bad = run_cli("eval --data " + q(data8) + " --ckpt " +
                                q(ft_dir / "checkpoint.tfmcl") + " --out " +
                                q(tmp.path / "bad.json"));
  CHECK(bad.code == 1);
  CHECK(parse(bad.err)["error"]["type"] == "invalid_argument");
}

TEST_CASE("cli: gradcheck passes and reports its tolerance") {
  const CliResult r = run_cli("gradcheck");
  REQUIRE(r.code == 0);
  const Json report = parse(r.out);
  CHECK(report["pass"] == true);
  CHECK(report["max_rel_error"].get<double>() <= 1e-4);
  CHECK(report["n_elements"].get<int>() > 1000);
}

TEST_CASE("cli: sweep writes one run per value plus a summary") {
  TempDir tmp("sweep");
  const fs::path cfg = tmp.path / "config.json";
  Json j = tiny_config_json();
  j["train"]["epochs_pretrain"] = 1;
  j["train"]["epochs_finetune"] = 1;
  write_json(cfg, j);

  const fs::path out = tmp.path / "runs";
  const CliResult r = run_cli("sweep --param alpha --values 0.2,0.8" +
                              std::string(" --config ") + q(cfg) + " --out " +
                              q(out));
  REQUIRE(r.code == 0);
  const Json summary = parse(slurp(out / "sweep_results.json"));
  CHECK(summary["param"] == "alpha");
  REQUIRE(summary["results"].contains("0.2"));
  REQUIRE(summary["results"].contains("0.8"));
  for (const auto& key : {"0.2", "0.8"}) {
    const double acc = summary["results"][key]["accuracy"].get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(fs::exists(out / (std::string("alpha_") + key) / "metrics.json"));
  }

  SUBCASE("unknown parameter name") {
    const CliResult bad = run_cli("sweep --param gamma --values 0.5 --out " +
                                  q(tmp.path / "x"));
    CHECK(bad.code == 1);
    CHECK(parse(bad.err)["error"]["type"] == "invalid_argument");
  }
  SUBCASE("unparseable value") {
    const CliResult bad = run_cli(
        "sweep --param alpha --values 0.2x --out " + q(tmp.path / "y"));
    CHECK(bad.code == 1);
    CHECK(parse(bad.err)["error"]["type"] == "invalid_argument");
  }
}
