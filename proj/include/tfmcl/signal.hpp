#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "tfmcl/errors.hpp"

namespace tfmcl {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatX<double>;
using Vector = VecX<double>;

// Additive floor inside log() when compressing PSDs.
inline constexpr double kPsdLogEps = 1e-10;
// Variance floor for z-scoring, so constant channels map to zero instead of
// dividing by zero.
inline constexpr double kZscoreVarEps = 1e-12;

// One multichannel recording slice: E channels x T samples.
struct Window {
  Matrix samples;  // E x T
  double fs_hz = 0.0;
  std::string subject_id;
  std::optional<int> label;  // 0 or 1 when present

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index length() const { return samples.cols(); }
};

struct Autocorrelation {
  Vector r;  // lags 0 .. T-1
};

struct Spectrum {
  Vector psd;  // one-sided, T/2 bins (DC included, Nyquist excluded)
  double fs_hz = 0.0;
};

inline void validate_window(const Window& w) {
  require(w.samples.rows() >= 1, "window: needs at least one channel");
  require(w.samples.cols() >= 8, "window: length must be >= 8");
  require(w.samples.cols() % 2 == 0, "window: length must be even");
  require(w.fs_hz > 0.0, "window: fs_hz must be positive");
  if (!w.samples.allFinite()) throw NumericError("window: non-finite sample");
  if (w.label && *w.label != 0 && *w.label != 1)
    throw InvalidArgument("window: label must be 0 or 1");
}

// Biased autocorrelation estimate r[k] = (1/T) sum_n x[n] x[n+k].
template <typename Derived>
Autocorrelation autocorrelation(const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Index t = x.size();
  require(t >= 1, "autocorrelation: empty input");
  const Vector xv = x.template cast<double>().reshaped();
  if (!xv.allFinite()) throw NumericError("autocorrelation: non-finite input");
  Autocorrelation out;
  out.r.resize(t);
  for (Eigen::Index k = 0; k < t; ++k)
    out.r(k) = xv.head(t - k).dot(xv.tail(t - k)) / static_cast<double>(t);
  return out;
}

// Full two-sided periodogram: |X[m]|^2 / T for all T DFT bins.
template <typename Derived>
Vector periodogram(const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Index t = x.size();
  require(t >= 2, "periodogram: input too short");
  const Vector xv = x.template cast<double>().reshaped();
  if (!xv.allFinite()) throw NumericError("periodogram: non-finite input");
  Eigen::FFT<double> fft;
  std::vector<double> in(xv.data(), xv.data() + t);
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, in);
  Vector p(t);
  for (Eigen::Index m = 0; m < t; ++m)
    p(m) = std::norm(spec[static_cast<std::size_t>(m)]) / static_cast<double>(t);
  return p;
}

// One-sided PSD: the first T/2 periodogram bins (DC in, Nyquist out).
template <typename Derived>
Spectrum psd(const Eigen::MatrixBase<Derived>& x, double fs_hz = 0.0) {
  const Eigen::Index t = x.size();
  require(t >= 4, "psd: input too short");
  require(t % 2 == 0, "psd: input length must be even");
  Spectrum out;
  out.psd = periodogram(x).head(t / 2);
  out.fs_hz = fs_hz;
  return out;
}

// Per-channel one-sided PSD of a window: E x T/2, channel order preserved.
inline Matrix window_psd(const Window& w) {
  validate_window(w);
  const Eigen::Index e = w.channels();
  const Eigen::Index f = w.length() / 2;
  Matrix p(e, f);
  for (Eigen::Index c = 0; c < e; ++c)
    p.row(c) = psd(w.samples.row(c).transpose(), w.fs_hz).psd.transpose();
  return p;
}

// Zero-phase band filter via a frequency-domain mask: keeps |f| within
// [lo_hz, hi_hz] (inclusive), then zeroes |f| within the notch (inclusive).
// The mask is applied symmetrically to positive and negative frequencies, so
// the output stays real and the operation is idempotent.
inline Window bandpass_notch(
    const Window& w, double lo_hz, double hi_hz,
    std::optional<std::pair<double, double>> notch = std::nullopt) {
  validate_window(w);
  const double nyquist = w.fs_hz / 2.0;
  require(lo_hz >= 0.0 && lo_hz < hi_hz,
          "bandpass_notch: need 0 <= lo_hz < hi_hz");
  require(hi_hz <= nyquist, "bandpass_notch: hi_hz exceeds Nyquist");
  if (notch) {
    require(notch->first >= 0.0 && notch->first < notch->second,
            "bandpass_notch: need 0 <= notch_lo < notch_hi");
    require(notch->second <= nyquist, "bandpass_notch: notch exceeds Nyquist");
  }

  const Eigen::Index t = w.length();
  const double bin_hz = w.fs_hz / static_cast<double>(t);
  Eigen::FFT<double> fft;
  Window out = w;
  std::vector<double> in(static_cast<std::size_t>(t));
  std::vector<std::complex<double>> spec;
  for (Eigen::Index c = 0; c < w.channels(); ++c) {
    for (Eigen::Index n = 0; n < t; ++n) in[static_cast<std::size_t>(n)] = w.samples(c, n);
    fft.fwd(spec, in);
    for (Eigen::Index m = 0; m < t; ++m) {
      const double signed_bin =
          (m <= t / 2) ? static_cast<double>(m) : static_cast<double>(m - t);
      const double f_abs = std::abs(signed_bin) * bin_hz;
      bool keep = (f_abs >= lo_hz && f_abs <= hi_hz);
      if (keep && notch && f_abs >= notch->first && f_abs <= notch->second)
        keep = false;
      if (!keep) spec[static_cast<std::size_t>(m)] = 0.0;
    }
    std::vector<double> rec;
    fft.inv(rec, spec);
    for (Eigen::Index n = 0; n < t; ++n) out.samples(c, n) = rec[static_cast<std::size_t>(n)];
  }
  return out;
}

// Per-row z-score using the population variance plus a small floor.
template <typename Derived>
Matrix zscore_rows(const Eigen::MatrixBase<Derived>& m) {
  require(m.rows() >= 1 && m.cols() >= 1, "zscore_rows: empty matrix");
  Matrix src = m.template cast<double>();
  if (!src.allFinite()) throw NumericError("zscore_rows: non-finite input");
  Matrix out(src.rows(), src.cols());
  for (Eigen::Index r = 0; r < src.rows(); ++r) {
    const double mu = src.row(r).mean();
    const double var = (src.row(r).array() - mu).square().mean();
    const double sd = std::sqrt(var + kZscoreVarEps);
    out.row(r) = (src.row(r).array() - mu) / sd;
  }
  return out;
}

// Time-domain view fed to the time encoder: per-channel z-scored samples.
inline Matrix normalize_time(const Window& w) {
  validate_window(w);
  return zscore_rows(w.samples);
}

// Frequency-domain view fed to the frequency encoder: log-compressed PSD,
// then per-channel z-score.
template <typename Derived>
Matrix normalize_psd(const Eigen::MatrixBase<Derived>& raw_psd) {
  require(raw_psd.rows() >= 1 && raw_psd.cols() >= 1,
          "normalize_psd: empty matrix");
  Matrix p = raw_psd.template cast<double>();
  if (!p.allFinite()) throw NumericError("normalize_psd: non-finite input");
  require(p.minCoeff() >= 0.0, "normalize_psd: negative PSD value");
  return zscore_rows((p.array() + kPsdLogEps).log().matrix());
}

}  // namespace tfmcl
