#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tfmcl/rng.hpp"
#include "tfmcl/signal.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Max-norm relative disagreement between two vectors/matrices.
template <typename A, typename B>
double max_rel_diff(const A& a, const B& b) {
  const double scale =
      std::max(1e-300, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline tfmcl::Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  tfmcl::Rng rng(seed);
  tfmcl::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline tfmcl::Matrix random_matrix(Eigen::Index r, Eigen::Index c,
                                   std::uint64_t seed) {
  tfmcl::Rng rng(seed);
  tfmcl::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

inline tfmcl::Window random_window(int e, int t, double fs,
                                   std::uint64_t seed) {
  tfmcl::Window w;
  w.samples = random_matrix(e, t, seed);
  w.fs_hz = fs;
  w.subject_id = "s000";
  return w;
}

}  // namespace testutil
