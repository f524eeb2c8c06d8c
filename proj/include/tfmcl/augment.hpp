#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tfmcl/errors.hpp"
#include "tfmcl/rng.hpp"
#include "tfmcl/signal.hpp"

namespace tfmcl {

enum class TimeAug {
  resample,
  channel_substitution,
  timing_inversion,
  noise_addition,
  channel_perturbation,
};

enum class FreqAug {
  band_removal,
  band_addition,
};

inline const char* to_string(TimeAug m) {
  switch (m) {
    case TimeAug::resample: return "resample";
    case TimeAug::channel_substitution: return "channel_substitution";
    case TimeAug::timing_inversion: return "timing_inversion";
    case TimeAug::noise_addition: return "noise_addition";
    case TimeAug::channel_perturbation: return "channel_perturbation";
  }
  throw InvalidArgument("unknown time augmentation");
}

inline const char* to_string(FreqAug m) {
  switch (m) {
    case FreqAug::band_removal: return "band_removal";
    case FreqAug::band_addition: return "band_addition";
  }
  throw InvalidArgument("unknown frequency augmentation");
}

struct AugPolicy {
  std::vector<TimeAug> time_methods = {
      TimeAug::resample, TimeAug::channel_substitution,
      TimeAug::timing_inversion, TimeAug::noise_addition,
      TimeAug::channel_perturbation};
  std::vector<FreqAug> freq_methods = {FreqAug::band_removal,
                                       FreqAug::band_addition};
  double noise_sigma_frac = 0.1;
  std::array<double, 2> resample_factor_range = {0.8, 1.2};
  std::array<double, 2> perturb_scale_range = {0.7, 1.3};
  double band_frac = 0.1;
  double band_add_amp_frac = 0.5;
};

inline void validate_policy(const AugPolicy& p) {
  require(!p.time_methods.empty(), "augment: time method set is empty");
  require(!p.freq_methods.empty(), "augment: frequency method set is empty");
  require(p.noise_sigma_frac >= 0.0, "augment: noise_sigma_frac must be >= 0");
  require(p.resample_factor_range[0] > 0.0 &&
              p.resample_factor_range[0] <= p.resample_factor_range[1],
          "augment: resample_factor_range must be ordered and positive");
  require(p.perturb_scale_range[0] > 0.0 &&
              p.perturb_scale_range[0] <= p.perturb_scale_range[1],
          "augment: perturb_scale_range must be ordered and positive");
  require(p.band_frac > 0.0 && p.band_frac <= 1.0,
          "augment: band_frac must be in (0, 1]");
  require(p.band_add_amp_frac >= 0.0,
          "augment: band_add_amp_frac must be >= 0");
}

// A training sample's four views. f is the normalized PSD of the original t;
// f_aug perturbs f directly rather than re-deriving a PSD from t_aug.
struct ViewPair {
  Window t;
  Window t_aug;
  Matrix f;      // E x T/2
  Matrix f_aug;  // E x T/2
};

namespace detail {

// Linear interpolation of each channel onto `t_new` evenly spaced positions
// covering the original support, then center-crop / edge-pad back to T.
inline Matrix resample_to_len(const Matrix& x, int t_new) {
  const Eigen::Index e = x.rows();
  const Eigen::Index t = x.cols();
  Matrix y(e, t_new);
  if (t_new == 1) {
    y.col(0) = x.col(0);
    return y;
  }
  const double step = static_cast<double>(t - 1) / static_cast<double>(t_new - 1);
  for (int j = 0; j < t_new; ++j) {
    const double pos = j * step;
    const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index i1 = std::min(i0 + 1, t - 1);
    const double frac = pos - static_cast<double>(i0);
    y.col(j) = (1.0 - frac) * x.col(i0) + frac * x.col(i1);
  }
  return y;
}

inline Matrix fit_to_len(const Matrix& y, Eigen::Index t) {
  const Eigen::Index t2 = y.cols();
  if (t2 == t) return y;
  Matrix out(y.rows(), t);
  if (t2 > t) {  // center crop
    const Eigen::Index off = (t2 - t) / 2;
    out = y.middleCols(off, t);
  } else {  // pad with edge values, centered
    const Eigen::Index left = (t - t2) / 2;
    for (Eigen::Index j = 0; j < left; ++j) out.col(j) = y.col(0);
    out.middleCols(left, t2) = y;
    for (Eigen::Index j = left + t2; j < t; ++j) out.col(j) = y.col(t2 - 1);
  }
  return out;
}

inline double channel_std(const Matrix& x, Eigen::Index e) {
  const double mu = x.row(e).mean();
  return std::sqrt((x.row(e).array() - mu).square().mean());
}

}  // namespace detail

// Applies one time-domain method. Draw order is part of the contract so that
// tests can replay the stream: resample draws one factor; channel_substitution
// draws source then destination; noise_addition draws channel-major,
// time-minor; channel_perturbation draws one scale per channel in order.
inline Window augment_time(const Window& t, TimeAug method,
                           const AugPolicy& policy, Rng& rng) {
  validate_window(t);
  Window out = t;
  switch (method) {
    case TimeAug::resample: {
      const double factor = rng.uniform(policy.resample_factor_range[0],
                                        policy.resample_factor_range[1]);
      const int t_new = std::max(
          2, static_cast<int>(std::floor(static_cast<double>(t.length()) * factor)));
      out.samples = detail::fit_to_len(
          detail::resample_to_len(t.samples, t_new), t.length());
      break;
    }
    case TimeAug::channel_substitution: {
      const Eigen::Index e = t.channels();
      require(e >= 2, "channel_substitution: needs at least 2 channels");
      const auto src = static_cast<Eigen::Index>(
          rng.uniform_int(static_cast<std::uint64_t>(e)));
      auto dst = static_cast<Eigen::Index>(
          rng.uniform_int(static_cast<std::uint64_t>(e - 1)));
      if (dst >= src) ++dst;  // distinct destination
      out.samples.row(dst) = t.samples.row(src);
      break;
    }
    case TimeAug::timing_inversion:
      out.samples = t.samples.rowwise().reverse();
      break;
    case TimeAug::noise_addition: {
      for (Eigen::Index e = 0; e < t.channels(); ++e) {
        const double sigma =
            policy.noise_sigma_frac * detail::channel_std(t.samples, e);
        for (Eigen::Index n = 0; n < t.length(); ++n)
          out.samples(e, n) += sigma * rng.normal();
      }
      break;
    }
    case TimeAug::channel_perturbation: {
      for (Eigen::Index e = 0; e < t.channels(); ++e)
        out.samples.row(e) *= rng.uniform(policy.perturb_scale_range[0],
                                          policy.perturb_scale_range[1]);
      break;
    }
    default:
      throw InvalidArgument("augment_time: unknown method");
  }
  return out;
}

// Applies one frequency-domain method to a normalized spectrum matrix. Both
// methods pick one contiguous interval of ceil(band_frac * F) bins; its start
// is the single uniform draw.
inline Matrix augment_freq(const Matrix& f, FreqAug method,
                           const AugPolicy& policy, Rng& rng) {
  const Eigen::Index n_bins = f.cols();
  require(f.rows() >= 1 && n_bins >= 2, "augment_freq: needs E >= 1, F >= 2");
  const auto band_len = std::min<Eigen::Index>(
      n_bins, static_cast<Eigen::Index>(
                  std::ceil(policy.band_frac * static_cast<double>(n_bins))));
  const auto start = static_cast<Eigen::Index>(rng.uniform_int(
      static_cast<std::uint64_t>(n_bins - band_len + 1)));
  Matrix out = f;
  switch (method) {
    case FreqAug::band_removal:
      out.middleCols(start, band_len).setConstant(f.minCoeff());
      break;
    case FreqAug::band_addition:
      out.middleCols(start, band_len).array() +=
          policy.band_add_amp_frac * f.mean();
      break;
    default:
      throw InvalidArgument("augment_freq: unknown method");
  }
  return out;
}

// Builds the four views for each window of a batch. Per-sample streams are
// derived from (seed, epoch, batch_index, sample_index); within a stream the
// draw order is: time method index, frequency method index, time-method
// draws, frequency-method draws.
inline std::vector<ViewPair> make_view_pairs(
    const std::vector<const Window*>& batch, const AugPolicy& policy,
    std::uint64_t seed, int epoch, int batch_index) {
  validate_policy(policy);
  require(batch.size() >= 2, "make_view_pairs: batch must have N >= 2");
  require(epoch >= 0 && batch_index >= 0,
          "make_view_pairs: negative stream coordinate");
  std::vector<ViewPair> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Window& w = *batch[i];
    Rng rng(derive_stream({seed, 0xA0Bull, static_cast<std::uint64_t>(epoch),
                           static_cast<std::uint64_t>(batch_index),
                           static_cast<std::uint64_t>(i)}));
    const TimeAug tm =
        policy.time_methods[rng.uniform_int(policy.time_methods.size())];
    const FreqAug fm =
        policy.freq_methods[rng.uniform_int(policy.freq_methods.size())];
    ViewPair vp;
    vp.t = w;
    vp.f = normalize_psd(window_psd(w));
    vp.t_aug = augment_time(w, tm, policy, rng);
    vp.f_aug = augment_freq(vp.f, fm, policy, rng);
    out.push_back(std::move(vp));
  }
  return out;
}

}  // namespace tfmcl
