#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "tfmcl/data.hpp"
#include "tfmcl/rng.hpp"
#include "tfmcl/signal.hpp"

namespace tfmcl {

struct SynthSpec {
  int n_subjects = 20;
  int windows_per_subject = 20;
  int n_channels = 8;
  int window_len = 512;
  double fs_hz = 256.0;
  double band_lo_hz = 8.0;
  double band_hi_hz = 12.0;
  // Amplitude multiplier of the class-1 tone relative to class 0. Because
  // the tone amplitude scales linearly, in-band *power* scales by its square
  // (ratio 3 -> PSD ratio 9).
  double power_ratio = 3.0;
  double noise_sigma = 1.0;
};

inline void validate_synth_spec(const SynthSpec& s) {
  require(s.n_subjects >= 1 && s.windows_per_subject >= 1, "synth: counts must be >= 1");
  require(s.n_channels >= 1, "synth: n_channels must be >= 1");
  require(s.window_len >= 8 && s.window_len % 2 == 0,
          "synth: window_len must be even and >= 8");
  require(s.fs_hz > 0.0, "synth: fs_hz must be positive");
  require(s.power_ratio > 1.0, "synth: power_ratio must be > 1");
  require(s.noise_sigma >= 0.0, "synth: noise_sigma must be >= 0");
  require(s.band_lo_hz >= 0.0 && s.band_lo_hz < s.band_hi_hz &&
              s.band_hi_hz <= s.fs_hz / 2.0,
          "synth: class band must satisfy 0 <= lo < hi <= fs/2");
}

namespace detail {

// DFT bin range covered by [lo_hz, hi_hz], clamped away from DC and Nyquist
// so a one-bin tone always lands strictly inside the one-sided PSD.
inline std::pair<int, int> band_bins(double lo_hz, double hi_hz, double fs_hz,
                                     int t) {
  const double bin_hz = fs_hz / static_cast<double>(t);
  int lo = static_cast<int>(std::ceil(lo_hz / bin_hz - 1e-9));
  int hi = static_cast<int>(std::floor(hi_hz / bin_hz + 1e-9));
  lo = std::max(lo, 1);
  hi = std::min(hi, t / 2 - 1);
  require(lo <= hi, "synth: class band covers no usable DFT bin");
  return {lo, hi};
}

// 1/f-shaped noise by spectral synthesis: unit-magnitude bins scaled by
// 1/sqrt(m) with random phases, inverse-transformed and rescaled so the
// time-domain population std equals sigma.
inline Vector pink_noise(int t, double sigma, Rng& rng) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(t),
                                         std::complex<double>(0.0, 0.0));
  for (int m = 1; m < t / 2; ++m) {
    const double mag = 1.0 / std::sqrt(static_cast<double>(m));
    const double phase = rng.uniform(0.0, kTwoPi);
    const std::complex<double> v(mag * std::cos(phase), mag * std::sin(phase));
    spec[static_cast<std::size_t>(m)] = v;
    spec[static_cast<std::size_t>(t - m)] = std::conj(v);
  }
  Eigen::FFT<double> fft;
  std::vector<double> x;
  fft.inv(x, spec);
  Vector out = Eigen::Map<Vector>(x.data(), t);
  const double mu = out.mean();
  const double sd = std::sqrt((out.array() - mu).square().mean());
  if (sd > 0.0) out = (out.array() - mu) / sd * sigma;
  return out;
}

}  // namespace detail

// Deterministic labeled toy dataset: subject s gets class s % 2; every
// channel carries one tone at a random DFT bin inside the class band (class 1
// tones have power_ratio times the amplitude) plus independent 1/f noise.
inline Dataset gen_synthetic_dataset(const SynthSpec& spec,
                                     std::uint64_t seed) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  validate_synth_spec(spec);
  const int t = spec.window_len;
  const auto [bin_lo, bin_hi] =
      detail::band_bins(spec.band_lo_hz, spec.band_hi_hz, spec.fs_hz, t);

  Dataset ds;
  ds.fs_hz = spec.fs_hz;
  ds.n_channels = spec.n_channels;
  ds.window_len = t;
  for (int s = 0; s < spec.n_subjects; ++s) {
    const int label = s % 2;
    char sid[16];
    std::snprintf(sid, sizeof(sid), "s%03d", s);
    for (int k = 0; k < spec.windows_per_subject; ++k) {
      Rng rng(derive_stream({seed, 0x5F17ull, static_cast<std::uint64_t>(s),
                             static_cast<std::uint64_t>(k)}));
      Window w;
      w.fs_hz = spec.fs_hz;
      w.subject_id = sid;
      w.label = label;
      w.samples.resize(spec.n_channels, t);
      const double amp = (label == 1) ? spec.power_ratio : 1.0;
      for (int e = 0; e < spec.n_channels; ++e) {
        const int bin =
            bin_lo + static_cast<int>(rng.uniform_int(
                         static_cast<std::uint64_t>(bin_hi - bin_lo + 1)));
        const double phase = rng.uniform(0.0, kTwoPi);
        for (int n = 0; n < t; ++n)
          w.samples(e, n) =
              amp * std::cos(kTwoPi * bin * n / static_cast<double>(t) + phase);
        if (spec.noise_sigma > 0.0)
          w.samples.row(e) +=
              detail::pink_noise(t, spec.noise_sigma, rng).transpose();
      }
      ds.windows.push_back(std::move(w));
    }
  }
  return ds;
}

}  // namespace tfmcl
