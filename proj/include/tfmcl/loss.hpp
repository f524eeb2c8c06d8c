#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tfmcl/autodiff.hpp"
#include "tfmcl/errors.hpp"
#include "tfmcl/signal.hpp"

namespace tfmcl {

// Row r of the pairwise-similarity logits gets this added on its diagonal
// entry so exp(masked)/exp(anything) underflows to exactly zero: the sample
// itself never acts as its own negative.
inline constexpr double kSelfMask = -1e30;

enum class TfdlVariant { dispersion, verbatim };
enum class TfdlInputs { original, augmented, both };

struct LossWeights {
  double alpha = 0.2;
  double beta = 1.0;
  double tau = 0.2;
  TfdlVariant tfdl_variant = TfdlVariant::dispersion;
  TfdlInputs tfdl_inputs = TfdlInputs::original;
};

inline void validate_weights(const LossWeights& w) {
  require(w.alpha >= 0.0 && w.alpha <= 1.0, "loss: alpha must be in [0, 1]");
  require(w.beta >= 0.0, "loss: beta must be >= 0");
  require(w.tau > 0.0, "loss: tau must be positive");
}

struct LossBreakdown {
  double l_t = 0.0, l_f = 0.0, l_z = 0.0, l_tf = 0.0, total = 0.0;
};

template <typename DerivedA, typename DerivedB>
double cosine_sim(const Eigen::MatrixBase<DerivedA>& a,
                  const Eigen::MatrixBase<DerivedB>& b) {
  require(a.size() == b.size() && a.size() > 0,
          "cosine_sim: size mismatch or empty");
  const Vector av = a.template cast<double>().reshaped();
  const Vector bv = b.template cast<double>().reshaped();
  const double na = av.norm();
  const double nb = bv.norm();
  if (na == 0.0 || nb == 0.0)
    throw DegenerateInput("cosine_sim: zero-norm vector");
  return av.dot(bv) / (na * nb);
}

// One NT-Xent term for anchor i with positive j over the pooled rows of Z:
// -log[ exp(sim(z_i,z_j)/tau) / sum_{k != i} exp(sim(z_i,z_k)/tau) ].
// Only k = i is excluded; the positive stays in the denominator.
template <typename Scalar>
double ntxent_pair(int i, int j, const MatX<Scalar>& z, double tau) {
  const int rows = static_cast<int>(z.rows());
  require(rows >= 4, "ntxent_pair: needs at least 4 pooled rows (N >= 2)");
  require(i >= 0 && i < rows && j >= 0 && j < rows && i != j,
          "ntxent_pair: bad indices");
  require(tau > 0.0, "ntxent_pair: tau must be positive");
  std::vector<double> logits;
  logits.reserve(static_cast<std::size_t>(rows) - 1);
  double pos = 0.0;
  for (int k = 0; k < rows; ++k) {
    if (k == i) continue;
    const double s = cosine_sim(z.row(i), z.row(k)) / tau;
    logits.push_back(s);
    if (k == j) pos = s;
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - mx);
  return (mx + std::log(denom)) - pos;
}

// Symmetric InfoNCE over N positive pairs. Z interleaves the inputs
// (z_{2k-1} = A_k, z_{2k} = B_k, 1-based) and each pair contributes both
// directions: (1/2N) sum_k [ l(2k-1, 2k) + l(2k, 2k-1) ].
template <typename Scalar>
double paired_nce(const MatX<Scalar>& a, const MatX<Scalar>& b, double tau) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "paired_nce: shape mismatch");
  const int n = static_cast<int>(a.rows());
  require(n >= 2, "paired_nce: needs N >= 2");
  MatX<Scalar> z(2 * n, a.cols());
  for (int k = 0; k < n; ++k) {
    z.row(2 * k) = a.row(k);
    z.row(2 * k + 1) = b.row(k);
  }
  double acc = 0.0;
  for (int k = 0; k < n; ++k)
    acc += ntxent_pair(2 * k, 2 * k + 1, z, tau) +
           ntxent_pair(2 * k + 1, 2 * k, z, tau);
  return acc / (2.0 * n);
}

// Mean exponentiated cosine alignment between paired rows:
// m = (1/N) sum_i exp(cos(rt_i, rf_i)). `dispersion` returns m (minimizing
// it spreads the two domains apart); `verbatim` returns 1/m.
template <typename Scalar>
double tfdl(const MatX<Scalar>& rt, const MatX<Scalar>& rf,
            TfdlVariant variant) {
  require(rt.rows() == rf.rows() && rt.cols() == rf.cols(),
          "tfdl: shape mismatch");
  require(rt.rows() >= 1, "tfdl: empty input");
  double m = 0.0;
  for (Eigen::Index i = 0; i < rt.rows(); ++i)
    m += std::exp(cosine_sim(rt.row(i), rf.row(i)));
  m /= static_cast<double>(rt.rows());
  return variant == TfdlVariant::dispersion ? m : 1.0 / m;
}

// Eq-style combination: total = alpha (l_t + l_f) + (1 - alpha) l_z
// + beta l_tf.
inline LossBreakdown mcl(double l_t, double l_f, double l_z, double l_tf,
                         const LossWeights& w) {
  validate_weights(w);
  if (!(std::isfinite(l_t) && std::isfinite(l_f) && std::isfinite(l_z) &&
        std::isfinite(l_tf)))
    throw NumericError("mcl: non-finite loss component");
  LossBreakdown out;
  out.l_t = l_t;
  out.l_f = l_f;
  out.l_z = l_z;
  out.l_tf = l_tf;
  out.total = w.alpha * (l_t + l_f) + (1.0 - w.alpha) * l_z + w.beta * l_tf;
  if (!std::isfinite(out.total)) throw NumericError("mcl: non-finite total");
  return out;
}

// ---- tape builders (the differentiable versions) ----

// Interleave A_k, B_k row-wise and compute the symmetric NT-Xent mean. a, b:
// N x dim vars; returns a 1 x 1 var.
template <typename Scalar>
typename Tape<Scalar>::Var paired_nce_graph(Tape<Scalar>& tape,
                                            typename Tape<Scalar>::Var a,
                                            typename Tape<Scalar>::Var b,
                                            Scalar tau) {
  const auto n = static_cast<int>(tape.value(a).rows());
  require(tape.value(b).rows() == n &&
              tape.value(b).cols() == tape.value(a).cols(),
          "paired_nce: shape mismatch");
  require(n >= 2, "paired_nce: needs N >= 2");
  require(tau > Scalar(0), "paired_nce: tau must be positive");

  std::vector<int> interleave(static_cast<std::size_t>(2 * n));
  for (int k = 0; k < n; ++k) {
    interleave[static_cast<std::size_t>(2 * k)] = k;          // A_k
    interleave[static_cast<std::size_t>(2 * k + 1)] = n + k;  // B_k
  }
  auto z = tape.gather_rows(tape.concat_rows({a, b}), interleave);
  auto zn = tape.row_l2_normalize(z);
  auto sims = tape.scale(tape.matmul(zn, tape.transpose(zn)), Scalar(1) / tau);

  // Self-similarities off the table; partners read from the unmasked logits.
  MatX<Scalar> mask = MatX<Scalar>::Zero(2 * n, 2 * n);
  mask.diagonal().setConstant(static_cast<Scalar>(kSelfMask));
  auto denom = tape.row_logsumexp(tape.add_const(sims, mask));

  std::vector<int> partner(static_cast<std::size_t>(2 * n));
  for (int r = 0; r < 2 * n; ++r) {
    const int p = (r % 2 == 0) ? r + 1 : r - 1;
    partner[static_cast<std::size_t>(r)] = r * 2 * n + p;  // row-major index
  }
  auto pos = tape.gather_linear(sims, partner, 2 * n, 1);
  return tape.mean_all(tape.sub(denom, pos));
}

// Differentiable TFDL for one (RT, RF) input pair.
template <typename Scalar>
typename Tape<Scalar>::Var tfdl_graph(Tape<Scalar>& tape,
                                      typename Tape<Scalar>::Var rt,
                                      typename Tape<Scalar>::Var rf,
                                      TfdlVariant variant) {
  require(tape.value(rt).rows() == tape.value(rf).rows() &&
              tape.value(rt).cols() == tape.value(rf).cols(),
          "tfdl: shape mismatch");
  auto cos = tape.rowwise_sum(
      tape.hadamard(tape.row_l2_normalize(rt), tape.row_l2_normalize(rf)));
  auto m = tape.mean_all(tape.exp_elem(cos));
  return variant == TfdlVariant::dispersion ? m : tape.reciprocal(m);
}

// Mean softmax cross-entropy of logits (N x 2) against integer labels.
template <typename Scalar>
typename Tape<Scalar>::Var softmax_xent_graph(Tape<Scalar>& tape,
                                              typename Tape<Scalar>::Var logits,
                                              const std::vector<int>& labels) {
  const auto n = static_cast<int>(tape.value(logits).rows());
  const auto c = static_cast<int>(tape.value(logits).cols());
  require(static_cast<int>(labels.size()) == n,
          "softmax_xent: label count mismatch");
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    require(labels[static_cast<std::size_t>(r)] >= 0 &&
                labels[static_cast<std::size_t>(r)] < c,
            "softmax_xent: label out of range");
    idx[static_cast<std::size_t>(r)] = r * c + labels[static_cast<std::size_t>(r)];
  }
  auto lse = tape.row_logsumexp(logits);
  auto tru = tape.gather_linear(logits, idx, n, 1);
  return tape.mean_all(tape.sub(lse, tru));
}

template <typename Scalar>
struct PretrainLossVars {
  typename Tape<Scalar>::Var l_t, l_f, l_z, l_tf, total;
};

// Full multi-domain objective over one batch's representations. The TFDL
// input selection follows weights.tfdl_inputs; eff_alpha / eff_beta let the
// trainer implement the component toggles without changing the formula.
template <typename Scalar>
PretrainLossVars<Scalar> mcl_graph(
    Tape<Scalar>& tape, typename Tape<Scalar>::Var rt,
    typename Tape<Scalar>::Var rf, typename Tape<Scalar>::Var rt_aug,
    typename Tape<Scalar>::Var rf_aug, typename Tape<Scalar>::Var y,
    typename Tape<Scalar>::Var y_aug, const LossWeights& weights,
    double eff_alpha, double eff_beta) {
  validate_weights(weights);
  const auto tau = static_cast<Scalar>(weights.tau);
  PretrainLossVars<Scalar> out;
  out.l_t = paired_nce_graph(tape, rt, rt_aug, tau);
  out.l_f = paired_nce_graph(tape, rf, rf_aug, tau);
  out.l_z = paired_nce_graph(tape, y, y_aug, tau);
  switch (weights.tfdl_inputs) {
    case TfdlInputs::original:
      out.l_tf = tfdl_graph(tape, rt, rf, weights.tfdl_variant);
      break;
    case TfdlInputs::augmented:
      out.l_tf = tfdl_graph(tape, rt_aug, rf_aug, weights.tfdl_variant);
      break;
    case TfdlInputs::both:
      out.l_tf = tape.scale(
          tape.add(tfdl_graph(tape, rt, rf, weights.tfdl_variant),
                   tfdl_graph(tape, rt_aug, rf_aug, weights.tfdl_variant)),
          Scalar(0.5));
      break;
  }
  auto frl = tape.scale(tape.add(out.l_t, out.l_f),
                        static_cast<Scalar>(eff_alpha));
  auto fused = tape.scale(out.l_z, static_cast<Scalar>(1.0 - eff_alpha));
  auto disp = tape.scale(out.l_tf, static_cast<Scalar>(eff_beta));
  out.total = tape.add(tape.add(frl, fused), disp);
  return out;
}

}  // namespace tfmcl
