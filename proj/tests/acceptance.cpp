// Acceptance suite: ten standalone go/no-go checks over the whole toolkit,
// each printed as one [PASS]/[FAIL] line with its measured numbers and
// runtime. Exits 0 only if every criterion holds. Tolerances and time
// budgets are pinned next to each check.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "tfmcl/tfmcl.hpp"

using namespace tfmcl;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double max_rel(const Vector& a, const Vector& b) {
  const double scale =
      std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Two-sided transform of the biased autocorrelation estimate at the DFT
// frequencies: S(m) = R[0] + 2 sum_k R[k] cos(2 pi m k / T). Independent
// of the FFT path under test.
Vector autocorr_spectrum(const Vector& x) {
  const auto t = x.size();
  const Vector r = autocorrelation(x).r;
  Vector s(t);
  for (Eigen::Index m = 0; m < t; ++m) {
    double acc = r(0);
    for (Eigen::Index k = 1; k < t; ++k)
      acc += 2.0 * r(k) * std::cos(kTwoPi * static_cast<double>(m) *
                                   static_cast<double>(k) /
                                   static_cast<double>(t));
    s(m) = acc;
  }
  return s;
}

// ---- criterion 1: the periodogram equals the autocorrelation transform ----

bool c1_spectral_identity(std::string& detail) {
  double worst = 0.0;
  int signals = 0;
  for (int t : {8, 16, 64, 128, 512}) {
    for (int i = 0; i < 20; ++i) {
      const Vector x =
          random_vector(t, 1000 + static_cast<std::uint64_t>(signals));
      const Vector p_fft = periodogram(x);
      const Vector p_ac = autocorr_spectrum(x);
      worst = std::max(worst, max_rel(p_fft, p_ac));
      // the one-sided output must be exactly the first T/2 two-sided bins
      const Vector one_sided = psd(x).psd;
      if (one_sided.size() != t / 2) return false;
      if ((one_sided - p_fft.head(t / 2)).cwiseAbs().maxCoeff() != 0.0)
        return false;
      ++signals;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d signals, max rel %.2e", signals, worst);
  detail = buf;
  return worst <= 1e-9;
}

// ---- criterion 2: the periodogram preserves signal energy ----

bool c2_energy_preservation(std::string& detail) {
  double worst = 0.0;
  int signals = 0;
  for (int t : {8, 16, 64, 128, 512}) {
    for (int i = 0; i < 20; ++i) {
      const Vector x =
          random_vector(t, 2000 + static_cast<std::uint64_t>(signals));
      const double lhs = periodogram(x).sum();
      const double rhs = x.squaredNorm();
      worst = std::max(worst, rel(lhs, rhs));
      ++signals;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d signals, max rel %.2e", signals, worst);
  detail = buf;
  return worst <= 1e-9;
}

// ---- criterion 3: contrastive loss closed forms ----

bool c3_contrastive_closed_forms(std::string& detail) {
  double worst = 0.0;
  // identical rows: uniform softmax over 2N-1 candidates -> log(2N-1)
  for (int n : {2, 4, 8}) {
    const Matrix z = Matrix::Ones(n, 5);
    for (double tau : {0.2, 0.5}) {
      const double expected = std::log(2.0 * n - 1.0);
      worst = std::max(worst, rel(paired_nce(z, z, tau), expected));
    }
  }
  // orthogonal positive among opposite negatives: log(1 + 2 e^{-1/tau})
  Matrix z(4, 2);
  z << 1, 0, 0, 1, -1, 0, -1, 0;
  for (double tau : {0.2, 0.5}) {
    const double expected = std::log(1.0 + 2.0 * std::exp(-1.0 / tau));
    worst = std::max(worst, rel(ntxent_pair(0, 1, z, tau), expected));
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max rel %.2e", worst);
  detail = buf;
  return worst <= 1e-9;
}

// ---- criterion 4: contrastive loss is scale invariant ----

bool c4_scale_invariance(std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix a = random_matrix(6, 9, 3000 + s);
    const Matrix b = random_matrix(6, 9, 3100 + s);
    const double base = paired_nce(a, b, 0.2);
    worst = std::max(worst, rel(paired_nce((7.0 * a).eval(), b, 0.2), base));
    worst =
        std::max(worst, rel(paired_nce(a, (0.003 * b).eval(), 0.2), base));
    Matrix a_row = a;
    a_row.row(static_cast<Eigen::Index>(s % 6)) *= 40.0;
    worst = std::max(worst, rel(paired_nce(a_row, b, 0.2), base));
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "50 batches, max rel %.2e", worst);
  detail = buf;
  return worst <= 1e-9;
}

// ---- criterion 5: dispersion loss extremes and variant relation ----

bool c5_dispersion_extremes(std::string& detail) {
  double worst = 0.0;
  const Matrix rt = random_matrix(5, 8, 4000);
  worst = std::max(worst, rel(tfdl(rt, rt, TfdlVariant::dispersion),
                              std::exp(1.0)));
  worst = std::max(worst, rel(tfdl(rt, (-rt).eval(), TfdlVariant::dispersion),
                              std::exp(-1.0)));
  Matrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 2;
  b << 0, 3, -1, 0;
  worst = std::max(worst, rel(tfdl(a, b, TfdlVariant::dispersion), 1.0));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix x = random_matrix(4, 6, 4100 + s);
    const Matrix y = random_matrix(4, 6, 4200 + s);
    const double disp = tfdl(x, y, TfdlVariant::dispersion);
    const double verb = tfdl(x, y, TfdlVariant::verbatim);
    worst = std::max(worst, rel(verb, 1.0 / disp));
    if (disp < std::exp(-1.0) - 1e-12 || disp > std::exp(1.0) + 1e-12)
      return false;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max rel %.2e", worst);
  detail = buf;
  return worst <= 1e-12;
}

// ---- criterion 6: analytic gradients match finite differences ----

bool c6_gradient_check(std::string& detail) {
  TrainConfig cfg;
  cfg.encoder = tiny_config();
  const GradCheckReport report = gradcheck_mcl(cfg, 4, 1e-5, 1e-4);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d elements, max rel %.2e (worst %s)",
                report.n_elements, report.max_rel_error,
                report.worst_tensor.c_str());
  detail = buf;
  return report.pass && report.n_elements > 1000;
}

// ---- criterion 7: pre-training is bitwise reproducible ----

bool c7_reproducibility(std::string& detail) {
  SynthSpec spec;
  spec.n_subjects = 10;
  spec.windows_per_subject = 20;
  spec.n_channels = 4;
  spec.window_len = 128;
  spec.fs_hz = 64.0;
  spec.band_lo_hz = 8.0;
  spec.band_hi_hz = 12.0;
  spec.power_ratio = 3.0;
  spec.noise_sigma = 1.0;
  const Dataset ds = gen_synthetic_dataset(spec, 99);

  TrainConfig cfg;
  cfg.encoder.n_channels = 4;
  cfg.encoder.window_len = 128;
  cfg.encoder.time_kernel = 16;
  cfg.encoder.freq_kernel = 8;
  cfg.encoder.n_step_filters = 8;
  cfg.encoder.n_channel_filters = 8;
  cfg.encoder.ffn_hidden = 32;
  cfg.encoder.repr_dim = 32;
  cfg.encoder.fusion_dim = 32;
  cfg.batch_size = 32;
  cfg.epochs_pretrain = 5;
  cfg.seed = 21;

  const PretrainResult a = pretrain(ds, cfg);
  const PretrainResult b = pretrain(ds, cfg);
  if (a.log.size() != b.log.size() || a.log.empty()) return false;
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    if (a.log[i].total != b.log[i].total) return false;
    if (a.log[i].l_t != b.log[i].l_t || a.log[i].l_f != b.log[i].l_f ||
        a.log[i].l_z != b.log[i].l_z || a.log[i].l_tf != b.log[i].l_tf)
      return false;
  }
  for (std::size_t i = 0; i < a.params.entries.size(); ++i)
    if ((a.params.entries[i].value - b.params.entries[i].value)
            .cwiseAbs()
            .maxCoeff() != 0.0)
      return false;

  // the serialized checkpoints must agree byte for byte
  const fs::path pa = fs::temp_directory_path() / "tfmcl_accept_a.ckpt";
  const fs::path pb = fs::temp_directory_path() / "tfmcl_accept_b.ckpt";
  save_checkpoint(a.params, pa);
  save_checkpoint(b.params, pb);
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  const bool same = slurp(pa) == slurp(pb);
  fs::remove(pa);
  fs::remove(pb);
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "%zu batch records and %zu tensors identical twice",
                a.log.size(), a.params.entries.size());
  detail = buf;
  return same;
}

// ---- criterion 8: end-to-end learning on band-structured data ----

// Per-channel log band power in [lo, hi] Hz: the independent feature the
// generator plants, used to verify the task is solvable at all.
Matrix band_features(const Dataset& ds, double lo, double hi) {
  Matrix f(static_cast<int>(ds.windows.size()), ds.n_channels);
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    const Matrix p = window_psd(ds.windows[i]);
    Vector acc = Vector::Zero(ds.n_channels);
    int used = 0;
    for (int m = 0; m < p.cols(); ++m) {
      const double hz =
          static_cast<double>(m) * ds.fs_hz / ds.window_len;
      if (hz >= lo && hz <= hi) {
        acc += p.col(m);
        ++used;
      }
    }
    f.row(static_cast<int>(i)) =
        (acc.array() / used + 1e-12).log().matrix().transpose();
  }
  return f;
}

// Hand-rolled logistic regression on the band features; shares no code with
// the model under test.
double logistic_oracle_acc(const Dataset& train, const Dataset& test) {
  const Matrix ftr = band_features(train, 8.0, 12.0);
  const Matrix fte = band_features(test, 8.0, 12.0);
  const int n = static_cast<int>(ftr.rows());
  const Eigen::RowVectorXd mu = ftr.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((ftr.rowwise() - mu).array().square().colwise().mean().sqrt() + 1e-12);
  const Matrix x = (ftr.rowwise() - mu).array().rowwise() / sd.array();
  const Matrix xte = (fte.rowwise() - mu).array().rowwise() / sd.array();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double bias = 0.0;
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd z = x * w;
    z.array() += bias;
    Eigen::VectorXd p = 1.0 / (1.0 + (-z.array()).exp());
    for (int i = 0; i < n; ++i)
      p(i) -= *train.windows[static_cast<std::size_t>(i)].label;
    w -= 0.5 * (x.transpose() * p) / n;
    bias -= 0.5 * p.mean();
  }
  int ok = 0;
  for (int i = 0; i < xte.rows(); ++i) {
    const double z = (xte.row(i) * w)(0) + bias;
    ok += (z > 0.0 ? 1 : 0) ==
          *test.windows[static_cast<std::size_t>(i)].label;
  }
  return static_cast<double>(ok) / static_cast<double>(xte.rows());
}

bool c8_end_to_end(std::string& detail) {
  SynthSpec spec;
  spec.n_subjects = 20;
  spec.windows_per_subject = 20;
  spec.n_channels = 8;
  spec.window_len = 512;
  spec.fs_hz = 256.0;
  spec.band_lo_hz = 8.0;
  spec.band_hi_hz = 12.0;
  spec.power_ratio = 3.0;
  spec.noise_sigma = 1.0;
  const Dataset ds = gen_synthetic_dataset(spec, 2026);

  SplitSpec sp;
  sp.seed = 1;  // subject-wise 0.6/0.2/0.2
  const SplitResult parts = split(ds, sp);

  // gate: an independent band-power classifier must find the planted
  // structure, otherwise the task itself is broken
  const double oracle = logistic_oracle_acc(parts.train, parts.test);
  if (oracle < 0.95) {
    detail = "oracle accuracy " + std::to_string(oracle) + " below 0.95";
    return false;
  }

  TrainConfig cfg;  // stock hyperparameters, geometry from the data
  cfg.encoder.n_channels = 8;
  cfg.encoder.window_len = 512;
  cfg.batch_size = 32;
  cfg.epochs_pretrain = 30;
  cfg.epochs_finetune = 50;
  cfg.seed = 7;

  const PretrainResult pre = pretrain(parts.train, cfg);
  const FinetuneResult ft = finetune(pre.params, parts.train, parts.val, cfg);
  const Metrics test = evaluate(ft.best_params, parts.test);

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "oracle %.3f, test accuracy %.3f, f1 %.3f (threshold 0.85)",
                oracle, test.accuracy, test.f1);
  detail = buf;
  return test.accuracy >= 0.85;
}

// ---- criterion 9: loss-component ablations recombine exactly ----

bool c9_ablations(std::string& detail) {
  SynthSpec spec;
  spec.n_subjects = 6;
  spec.windows_per_subject = 6;
  spec.n_channels = 4;
  spec.window_len = 64;
  spec.fs_hz = 64.0;
  spec.band_lo_hz = 8.0;
  spec.band_hi_hz = 12.0;
  spec.power_ratio = 3.0;
  spec.noise_sigma = 0.5;
  const Dataset ds = gen_synthetic_dataset(spec, 77);

  TrainConfig base;
  base.encoder = tiny_config();
  base.batch_size = 6;
  base.epochs_pretrain = 2;
  base.seed = 5;

  struct Case {
    bool frl, tfdl;
    PretrainResult r;
  };
  std::vector<Case> cases{{true, true, {}},
                          {false, true, {}},
                          {true, false, {}},
                          {false, false, {}}};
  double worst = 0.0;
  for (auto& c : cases) {
    TrainConfig cfg = base;
    cfg.enable_frl = c.frl;
    cfg.enable_tfdl = c.tfdl;
    c.r = pretrain(ds, cfg);
    const double ea = cfg.effective_alpha();
    const double eb = cfg.effective_beta();
    for (const auto& rec : c.r.log) {
      const double expect = ea * (rec.l_t + rec.l_f) + (1.0 - ea) * rec.l_z +
                            eb * rec.l_tf;
      worst = std::max(worst, rel(rec.total, expect));
      if (!std::isfinite(rec.l_tf) || !std::isfinite(rec.l_z)) return false;
    }
  }

  // before the first update every variant sees identical parameters and
  // views, so the first-batch components must agree bitwise and the totals
  // must differ only through the weighting
  const LossRecord f0 = cases[0].r.log.front();   // both on
  const LossRecord nf0 = cases[1].r.log.front();  // fused term off
  const LossRecord nt0 = cases[2].r.log.front();  // dispersion off
  const LossRecord nn0 = cases[3].r.log.front();  // both off
  for (const LossRecord* rec : {&nf0, &nt0, &nn0}) {
    if (rec->l_t != f0.l_t || rec->l_f != f0.l_f || rec->l_z != f0.l_z ||
        rec->l_tf != f0.l_tf)
      return false;
  }
  const double beta = base.weights.beta;
  worst = std::max(worst, rel(f0.total - nt0.total, beta * f0.l_tf));
  worst = std::max(worst, rel(nf0.total - nn0.total, beta * f0.l_tf));
  worst = std::max(worst, rel(nn0.total, f0.l_t + f0.l_f));

  char buf[128];
  std::snprintf(buf, sizeof(buf), "4 variants x %zu records, max rel %.2e",
                cases[0].r.log.size(), worst);
  detail = buf;
  return worst <= 1e-12;
}

// ---- criterion 10: augmentation invariants across random draws ----

bool c10_augmentation_invariants(std::string& detail) {
  SynthSpec spec;
  spec.n_subjects = 2;
  spec.windows_per_subject = 2;
  spec.n_channels = 4;
  spec.window_len = 64;
  spec.fs_hz = 64.0;
  spec.band_lo_hz = 8.0;
  spec.band_hi_hz = 12.0;
  spec.power_ratio = 3.0;
  spec.noise_sigma = 0.5;
  const Dataset ds = gen_synthetic_dataset(spec, 88);

  AugPolicy policy;
  int cases = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Window& w = ds.windows[static_cast<std::size_t>(i % 4)];
    Rng rng(5000 + i);

    // reversing time twice restores the window exactly
    const Window inv = augment_time(w, TimeAug::timing_inversion, policy, rng);
    const Window inv2 =
        augment_time(inv, TimeAug::timing_inversion, policy, rng);
    if ((inv2.samples - w.samples).cwiseAbs().maxCoeff() != 0.0) return false;

    // zero-amplitude noise is the identity
    AugPolicy quiet = policy;
    quiet.noise_sigma_frac = 0.0;
    const Window still = augment_time(w, TimeAug::noise_addition, quiet, rng);
    if ((still.samples - w.samples).cwiseAbs().maxCoeff() != 0.0) return false;

    // a degenerate scale range forces an exact global factor
    AugPolicy doubled = policy;
    doubled.perturb_scale_range = {2.0, 2.0};
    const Window twice =
        augment_time(w, TimeAug::channel_perturbation, doubled, rng);
    if ((twice.samples - 2.0 * w.samples).cwiseAbs().maxCoeff() != 0.0)
      return false;

    // frequency-domain checks run on the normalized spectrum
    const Matrix f = normalize_psd(window_psd(w));

    AugPolicy flat = policy;
    flat.band_add_amp_frac = 0.0;
    const Matrix same = augment_freq(f, FreqAug::band_addition, flat, rng);
    if ((same - f).cwiseAbs().maxCoeff() != 0.0) return false;

    const Matrix removed = augment_freq(f, FreqAug::band_removal, policy, rng);
    const auto band_len = static_cast<Eigen::Index>(
        std::ceil(policy.band_frac * static_cast<double>(f.cols())));
    Eigen::Index changed = 0;
    for (Eigen::Index m = 0; m < f.cols(); ++m) {
      const bool diff = (removed.col(m) - f.col(m)).cwiseAbs().maxCoeff() > 0;
      if (diff) {
        ++changed;
        if ((removed.col(m).array() != f.minCoeff()).any()) return false;
      }
    }
    if (changed > band_len) return false;

    // a unit resample factor reproduces the window to round-off
    AugPolicy unit = policy;
    unit.resample_factor_range = {1.0, 1.0};
    const Window resampled = augment_time(w, TimeAug::resample, unit, rng);
    if ((resampled.samples - w.samples).cwiseAbs().maxCoeff() > 1e-12)
      return false;

    // paired views keep the frequency branch tied to the raw spectrum
    std::vector<const Window*> batch{&ds.windows[0], &ds.windows[1],
                                     &ds.windows[2], &ds.windows[3]};
    if (i < 20) {
      const auto views = make_view_pairs(batch, policy, 6000 + i, 0, 0);
      const auto views2 = make_view_pairs(batch, policy, 6000 + i, 0, 0);
      for (std::size_t k = 0; k < views.size(); ++k) {
        const Matrix expect = normalize_psd(window_psd(*batch[k]));
        if ((views[k].f - expect).cwiseAbs().maxCoeff() != 0.0) return false;
        if ((views[k].t_aug.samples - views2[k].t_aug.samples)
                .cwiseAbs()
                .maxCoeff() != 0.0)
          return false;
        if ((views[k].f_aug - views2[k].f_aug).cwiseAbs().maxCoeff() != 0.0)
          return false;
      }
      cases += 4;
    }
    cases += 7;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d property cases", cases);
  detail = buf;
  return true;
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"periodogram matches the autocorrelation transform", 5.0,
       c1_spectral_identity},
      {"periodogram preserves signal energy", 5.0, c2_energy_preservation},
      {"contrastive loss closed forms", 5.0, c3_contrastive_closed_forms},
      {"contrastive loss scale invariance", 5.0, c4_scale_invariance},
      {"dispersion loss extremes and variant relation", 5.0,
       c5_dispersion_extremes},
      {"analytic gradients match finite differences", 120.0,
       c6_gradient_check},
      {"pre-training is bitwise reproducible", 300.0, c7_reproducibility},
      {"end-to-end learning on band-structured data", 600.0, c8_end_to_end},
      {"loss-component ablations recombine exactly", 600.0, c9_ablations},
      {"augmentation invariants across random draws", 5.0,
       c10_augmentation_invariants},
  };

  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    std::string text;
    bool ok = false;
    try {
      ok = criteria[i].run(text);
    } catch (const std::exception& e) {
      text = std::string("exception: ") + e.what();
      ok = false;
    }
    const double elapsed =
        std::chrono::duration<double>(Clock::now() - t0).count();
    if (elapsed > criteria[i].budget_s) {
      ok = false;
      text += " [over time budget]";
    }
    std::printf("[%s] %2zu/10 %-48s %s (%.2fs)\n", ok ? "PASS" : "FAIL",
                i + 1, criteria[i].name, text.c_str(), elapsed);
    std::fflush(stdout);
    passed += ok ? 1 : 0;
  }
  std::printf("%d/10 criteria passed\n", passed);
  return passed == 10 ? 0 : 1;
}
