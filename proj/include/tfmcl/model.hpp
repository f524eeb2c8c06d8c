#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tfmcl/autodiff.hpp"
#include "tfmcl/errors.hpp"
#include "tfmcl/rng.hpp"
#include "tfmcl/signal.hpp"

namespace tfmcl {

inline constexpr double kLayerNormEps = 1e-5;

// Geometry of the dual encoders, fusion head and classifier. n_channels and
// window_len come from the data; everything else defaults per the model's
// hyperparameter table.
struct EncoderConfig {
  int n_channels = 0;       // E; also the channel-conv kernel height
  int window_len = 0;       // T; frequency input length is T/2
  int time_kernel = 20;     // step-conv width (= stride) in the time encoder
  int freq_kernel = 10;     // step-conv width (= stride) in the frequency encoder
  int n_step_filters = 16;  // feature maps out of the step conv
  int n_channel_filters = 16;  // token width out of the channel conv
  int attn_heads = 1;
  int encoder_layers = 1;
  int ffn_hidden = 64;
  int repr_dim = 64;    // d
  int fusion_dim = 64;  // d_z
  int fmh_mlp_layers = 3;

  int freq_len() const { return window_len / 2; }
  int time_tokens() const { return window_len / time_kernel; }
  int freq_tokens() const { return freq_len() / freq_kernel; }

  bool operator==(const EncoderConfig&) const = default;
};

inline void validate_config(const EncoderConfig& c) {
  require(c.n_channels >= 1, "config: n_channels must be >= 1");
  require(c.window_len >= 8 && c.window_len % 2 == 0,
          "config: window_len must be even and >= 8");
  require(c.time_kernel >= 1 && c.freq_kernel >= 1,
          "config: kernels must be >= 1");
  require(c.n_step_filters >= 1 && c.n_channel_filters >= 1,
          "config: filter counts must be >= 1");
  require(c.ffn_hidden >= 1 && c.repr_dim >= 1 && c.fusion_dim >= 1,
          "config: dims must be >= 1");
  require(c.attn_heads == 1, "config: only single-head attention is supported");
  require(c.encoder_layers == 1,
          "config: only one transformer encoder layer is supported");
  require(c.fmh_mlp_layers == 3, "config: fusion MLP depth is fixed at 3");
  require(c.time_tokens() >= 2,
          "config: time token count < 2 (attention needs >= 2 tokens)");
  require(c.freq_tokens() >= 2,
          "config: frequency token count < 2 (attention needs >= 2 tokens)");
}

enum class ParamKind { weight, bias, gain };

struct ParamSpec {
  std::string name;
  ParamKind kind;
  int rows, cols;
};

// Canonical parameter table: names, kinds and shapes in their fixed
// (initialization and checkpoint) order.
inline std::vector<ParamSpec> param_specs(const EncoderConfig& c) {
  std::vector<ParamSpec> specs;
  auto encoder = [&](const std::string& p, int kernel, int tokens) {
    const int a = c.n_step_filters;
    const int w = c.n_channel_filters;
    specs.push_back({p + "step_conv.weight", ParamKind::weight, a, kernel});
    specs.push_back({p + "step_conv.bias", ParamKind::bias, a, 1});
    specs.push_back({p + "chan_conv.weight", ParamKind::weight, w,
                     a * c.n_channels});
    specs.push_back({p + "chan_conv.bias", ParamKind::bias, w, 1});
    specs.push_back({p + "pos", ParamKind::weight, tokens, w});
    for (const char* m : {"wq", "wk", "wv", "wo"})
      specs.push_back({p + "attn." + m, ParamKind::weight, w, w});
    for (const char* m : {"bq", "bk", "bv", "bo"})
      specs.push_back({p + "attn." + m, ParamKind::bias, 1, w});
    specs.push_back({p + "ln1.gain", ParamKind::gain, 1, w});
    specs.push_back({p + "ln1.bias", ParamKind::bias, 1, w});
    specs.push_back({p + "ffn.w1", ParamKind::weight, w, c.ffn_hidden});
    specs.push_back({p + "ffn.b1", ParamKind::bias, 1, c.ffn_hidden});
    specs.push_back({p + "ffn.w2", ParamKind::weight, c.ffn_hidden, w});
    specs.push_back({p + "ffn.b2", ParamKind::bias, 1, w});
    specs.push_back({p + "ln2.gain", ParamKind::gain, 1, w});
    specs.push_back({p + "ln2.bias", ParamKind::bias, 1, w});
    specs.push_back({p + "fc.weight", ParamKind::weight, w, c.repr_dim});
    specs.push_back({p + "fc.bias", ParamKind::bias, 1, c.repr_dim});
  };
  encoder("enc_t.", c.time_kernel, c.time_tokens());
  encoder("enc_f.", c.freq_kernel, c.freq_tokens());

  const int d = c.repr_dim;
  const int dz = c.fusion_dim;
  for (const char* m : {"wq", "wk", "wv", "wo"})
    specs.push_back({std::string("fmh.attn.") + m, ParamKind::weight, d, d});
  for (const char* m : {"bq", "bk", "bv", "bo"})
    specs.push_back({std::string("fmh.attn.") + m, ParamKind::bias, 1, d});
  specs.push_back({"fmh.ln.gain", ParamKind::gain, 1, d});
  specs.push_back({"fmh.ln.bias", ParamKind::bias, 1, d});
  specs.push_back({"fmh.mlp.w1", ParamKind::weight, 2 * d, dz});
  specs.push_back({"fmh.mlp.b1", ParamKind::bias, 1, dz});
  specs.push_back({"fmh.mlp.w2", ParamKind::weight, dz, dz});
  specs.push_back({"fmh.mlp.b2", ParamKind::bias, 1, dz});
  specs.push_back({"fmh.mlp.w3", ParamKind::weight, dz, dz});
  specs.push_back({"fmh.mlp.b3", ParamKind::bias, 1, dz});
  specs.push_back({"head.weight", ParamKind::weight, dz, 2});
  specs.push_back({"head.bias", ParamKind::bias, 1, 2});
  return specs;
}

// Named, ordered table of trainable tensors.
template <typename Scalar>
struct ParamSet {
  struct Entry {
    std::string name;
    ParamKind kind;
    MatX<Scalar> value;
  };
  EncoderConfig config;
  std::uint64_t seed = 0;
  std::vector<Entry> entries;
  std::unordered_map<std::string, int> index;

  int find(const std::string& name) const {
    const auto it = index.find(name);
    require(it != index.end(), "params: unknown tensor '" + name + "'");
    return it->second;
  }
  MatX<Scalar>& at(const std::string& name) {
    return entries[static_cast<std::size_t>(find(name))].value;
  }
  const MatX<Scalar>& at(const std::string& name) const {
    return entries[static_cast<std::size_t>(find(name))].value;
  }

  template <typename Other>
  ParamSet<Other> cast() const {
    ParamSet<Other> out;
    out.config = config;
    out.seed = seed;
    out.index = index;
    out.entries.reserve(entries.size());
    for (const auto& e : entries)
      out.entries.push_back(
          {e.name, e.kind, e.value.template cast<Other>().eval()});
    return out;
  }
};

// Deterministic initialization: weights uniform within the per-tensor bound
// sqrt(6 / (rows + cols)), biases zero, layer-norm gains one. One sequential
// stream fills tensors in canonical order, row-major within a tensor.
template <typename Scalar = double>
ParamSet<Scalar> init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  ParamSet<Scalar> params;
  params.config = cfg;
  params.seed = seed;
  Rng rng(derive_stream({seed, 0x1417ull}));
  for (const ParamSpec& s : param_specs(cfg)) {
    typename ParamSet<Scalar>::Entry e;
    e.name = s.name;
    e.kind = s.kind;
    e.value.resize(s.rows, s.cols);
    switch (s.kind) {
      case ParamKind::weight: {
        const double bound = std::sqrt(6.0 / (s.rows + s.cols));
        for (int r = 0; r < s.rows; ++r)
          for (int c = 0; c < s.cols; ++c)
            e.value(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
        break;
      }
      case ParamKind::bias:
        e.value.setZero();
        break;
      case ParamKind::gain:
        e.value.setOnes();
        break;
    }
    params.index[s.name] = static_cast<int>(params.entries.size());
    params.entries.push_back(std::move(e));
  }
  return params;
}

// All parameters registered as leaves on one tape, aligned with the entries.
template <typename Scalar>
struct ParamVars {
  using Var = typename Tape<Scalar>::Var;
  std::vector<Var> vars;
  const ParamSet<Scalar>* params = nullptr;

  Var operator[](const std::string& name) const {
    return vars[static_cast<std::size_t>(params->find(name))];
  }
};

template <typename Scalar>
ParamVars<Scalar> register_params(Tape<Scalar>& tape,
                                  const ParamSet<Scalar>& params) {
  ParamVars<Scalar> pv;
  pv.params = &params;
  pv.vars.reserve(params.entries.size());
  for (const auto& e : params.entries) pv.vars.push_back(tape.leaf(e.value));
  return pv;
}

template <typename Scalar>
std::vector<MatX<Scalar>> collect_grads(const Tape<Scalar>& tape,
                                        const ParamVars<Scalar>& pv) {
  std::vector<MatX<Scalar>> grads;
  grads.reserve(pv.vars.size());
  for (auto v : pv.vars) grads.push_back(tape.grad(v));
  return grads;
}

namespace detail {

// im2col map for the non-overlapping step conv: output element
// (u, e*T' + p) reads input element (e, p*K + u). Indices are row-major.
inline std::vector<int> step_conv_map(int e_channels, int t_len, int kernel) {
  const int tokens = t_len / kernel;
  std::vector<int> map(static_cast<std::size_t>(kernel) *
                       static_cast<std::size_t>(e_channels * tokens));
  std::size_t p = 0;
  for (int u = 0; u < kernel; ++u)
    for (int e = 0; e < e_channels; ++e)
      for (int tok = 0; tok < tokens; ++tok)
        map[p++] = e * t_len + tok * kernel + u;
  return map;
}

inline std::vector<int> iota_map(int n) {
  std::vector<int> map(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) map[static_cast<std::size_t>(i)] = i;
  return map;
}

}  // namespace detail

// Single-head scaled dot-product self-attention with output projection,
// residual connection and post-residual layer norm. x: (tokens x width).
template <typename Scalar>
typename Tape<Scalar>::Var attention_block(Tape<Scalar>& tape,
                                           typename Tape<Scalar>::Var x,
                                           const ParamVars<Scalar>& pv,
                                           const std::string& prefix,
                                           const std::string& ln_prefix) {
  const auto width = tape.value(x).cols();
  auto proj = [&](const char* w, const char* b) {
    return tape.add_rowvec(tape.matmul(x, pv[prefix + w]), pv[prefix + b]);
  };
  auto q = proj("wq", "bq");
  auto k = proj("wk", "bk");
  auto v = proj("wv", "bv");
  auto scores = tape.scale(tape.matmul(q, tape.transpose(k)),
                           Scalar(1) / std::sqrt(static_cast<Scalar>(width)));
  auto attn = tape.matmul(tape.row_softmax(scores), v);
  auto out = tape.add_rowvec(tape.matmul(attn, pv[prefix + "wo"]),
                             pv[prefix + "bo"]);
  return tape.layer_norm_rows(tape.add(x, out), pv[ln_prefix + "gain"],
                              pv[ln_prefix + "bias"],
                              static_cast<Scalar>(kLayerNormEps));
}

// One encoder tower: step conv -> channel conv -> transformer encoder layer
// -> token mean -> FC. x is a leaf holding the normalized (E x len) input;
// returns a 1 x d var.
template <typename Scalar>
typename Tape<Scalar>::Var encode_graph(Tape<Scalar>& tape,
                                        const ParamVars<Scalar>& pv,
                                        const EncoderConfig& cfg,
                                        bool freq_domain,
                                        typename Tape<Scalar>::Var x) {
  const std::string p = freq_domain ? "enc_f." : "enc_t.";
  const int kernel = freq_domain ? cfg.freq_kernel : cfg.time_kernel;
  const int len = freq_domain ? cfg.freq_len() : cfg.window_len;
  const int tokens = len / kernel;
  const int e_ch = cfg.n_channels;
  const int a = cfg.n_step_filters;
  require(tape.value(x).rows() == e_ch && tape.value(x).cols() == len,
          "encode: input shape disagrees with config");

  // Step conv as one matmul over the im2col'd input (stride = kernel, the
  // remainder of len truncated from the right by the map itself).
  auto cols = tape.gather_linear(x, detail::step_conv_map(e_ch, len, kernel),
                                 kernel, e_ch * tokens);
  auto conv1 = tape.relu(tape.add_colvec(
      tape.matmul(pv[p + "step_conv.weight"], cols), pv[p + "step_conv.bias"]));
  // (a x E*tokens) -> (a*E x tokens) is a row-major reshape, i.e. an
  // identity gather.
  auto stacked = tape.gather_linear(
      conv1, detail::iota_map(a * e_ch * tokens), a * e_ch, tokens);
  auto conv2 = tape.add_colvec(tape.matmul(pv[p + "chan_conv.weight"], stacked),
                               pv[p + "chan_conv.bias"]);
  auto toks = tape.add(tape.transpose(tape.relu(conv2)), pv[p + "pos"]);
  auto enc = attention_block(tape, toks, pv, p + "attn.", p + "ln1.");
  auto ffn1 = tape.relu(tape.add_rowvec(tape.matmul(enc, pv[p + "ffn.w1"]),
                                        pv[p + "ffn.b1"]));
  auto ffn2 = tape.add_rowvec(tape.matmul(ffn1, pv[p + "ffn.w2"]),
                              pv[p + "ffn.b2"]);
  auto enc2 = tape.layer_norm_rows(tape.add(enc, ffn2), pv[p + "ln2.gain"],
                                   pv[p + "ln2.bias"],
                                   static_cast<Scalar>(kLayerNormEps));
  auto pooled = tape.mean_rows(enc2);
  return tape.add_rowvec(tape.matmul(pooled, pv[p + "fc.weight"]),
                         pv[p + "fc.bias"]);
}

// Fusion mapping head: attention over the 2-token (rt, rf) sequence,
// concatenation of the two post-attention tokens, then the 3-layer MLP.
// rt, rf: 1 x d vars; returns 1 x d_z.
template <typename Scalar>
typename Tape<Scalar>::Var fuse_graph(Tape<Scalar>& tape,
                                      const ParamVars<Scalar>& pv,
                                      const EncoderConfig& cfg,
                                      typename Tape<Scalar>::Var rt,
                                      typename Tape<Scalar>::Var rf) {
  require(tape.value(rt).rows() == 1 && tape.value(rt).cols() == cfg.repr_dim &&
              tape.value(rf).rows() == 1 &&
              tape.value(rf).cols() == cfg.repr_dim,
          "fuse: inputs must be 1 x repr_dim");
  auto seq = tape.concat_rows({rt, rf});
  auto att = attention_block(tape, seq, pv, "fmh.attn.", "fmh.ln.");
  auto cat = tape.gather_linear(att, detail::iota_map(2 * cfg.repr_dim), 1,
                                2 * cfg.repr_dim);
  auto h1 = tape.relu(
      tape.add_rowvec(tape.matmul(cat, pv["fmh.mlp.w1"]), pv["fmh.mlp.b1"]));
  auto h2 = tape.relu(
      tape.add_rowvec(tape.matmul(h1, pv["fmh.mlp.w2"]), pv["fmh.mlp.b2"]));
  return tape.add_rowvec(tape.matmul(h2, pv["fmh.mlp.w3"]), pv["fmh.mlp.b3"]);
}

// Affine classifier head over fused representations. y: N x d_z -> N x 2.
template <typename Scalar>
typename Tape<Scalar>::Var classify_graph(Tape<Scalar>& tape,
                                          const ParamVars<Scalar>& pv,
                                          typename Tape<Scalar>::Var y) {
  return tape.add_rowvec(tape.matmul(y, pv["head.weight"]), pv["head.bias"]);
}

// ---- plain (gradient-free) forward wrappers ----

template <typename Scalar>
VecX<Scalar> encode_time(const MatX<Scalar>& x_norm,
                         const ParamSet<Scalar>& params) {
  Tape<Scalar> tape;
  auto pv = register_params(tape, params);
  auto out =
      encode_graph(tape, pv, params.config, false, tape.leaf(x_norm));
  return tape.value(out).row(0).transpose();
}

template <typename Scalar>
VecX<Scalar> encode_freq(const MatX<Scalar>& f_norm,
                         const ParamSet<Scalar>& params) {
  Tape<Scalar> tape;
  auto pv = register_params(tape, params);
  auto out = encode_graph(tape, pv, params.config, true, tape.leaf(f_norm));
  return tape.value(out).row(0).transpose();
}

template <typename Scalar>
VecX<Scalar> fuse(const VecX<Scalar>& rt, const VecX<Scalar>& rf,
                  const ParamSet<Scalar>& params) {
  Tape<Scalar> tape;
  auto pv = register_params(tape, params);
  auto out = fuse_graph(tape, pv, params.config,
                        tape.leaf(rt.transpose()), tape.leaf(rf.transpose()));
  return tape.value(out).row(0).transpose();
}

template <typename Scalar>
VecX<Scalar> classify(const VecX<Scalar>& y, const ParamSet<Scalar>& params) {
  Tape<Scalar> tape;
  auto pv = register_params(tape, params);
  auto out = classify_graph(tape, pv, tape.leaf(MatX<Scalar>(y.transpose())));
  return tape.value(out).row(0).transpose();
}

// Batch representations produced during pre-training.
template <typename Scalar>
struct ReprSet {
  MatX<Scalar> rt, rf, rt_aug, rf_aug;  // N x d
  MatX<Scalar> y, y_aug;                // N x d_z
};

}  // namespace tfmcl
