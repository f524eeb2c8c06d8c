#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfmcl/errors.hpp"
#include "tfmcl/rng.hpp"
#include "tfmcl/signal.hpp"

namespace tfmcl {

// A dataset is a flat list of like-shaped windows plus the shared geometry.
struct Dataset {
  double fs_hz = 0.0;
  int n_channels = 0;
  int window_len = 0;
  std::vector<Window> windows;

  bool labeled() const {
    for (const auto& w : windows)
      if (!w.label) return false;
    return !windows.empty();
  }

  std::vector<std::string> subjects() const {
    std::set<std::string> s;
    for (const auto& w : windows) s.insert(w.subject_id);
    return {s.begin(), s.end()};
  }
};

inline void validate_dataset(const Dataset& ds) {
  require(!ds.windows.empty(), "dataset: no windows");
  require(ds.n_channels >= 1, "dataset: n_channels must be >= 1");
  require(ds.window_len >= 8 && ds.window_len % 2 == 0,
          "dataset: window_len must be even and >= 8");
  require(ds.fs_hz > 0.0, "dataset: fs_hz must be positive");
  for (const auto& w : ds.windows) {
    validate_window(w);
    require(w.channels() == ds.n_channels && w.length() == ds.window_len &&
                w.fs_hz == ds.fs_hz,
            "dataset: window shape disagrees with manifest");
    require(!w.subject_id.empty(), "dataset: empty subject id");
  }
}

namespace detail {

inline void fail_file(const std::filesystem::path& p, const std::string& why) {
  throw IoError(p.string() + ": " + why);
}

}  // namespace detail

// On-disk layout: <dir>/manifest.json plus one raw little-endian float32
// file per window (row-major, channels x samples).
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  validate_dataset(ds);
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["fs_hz"] = ds.fs_hz;
  manifest["n_channels"] = ds.n_channels;
  manifest["window_len"] = ds.window_len;
  manifest["windows"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    const Window& w = ds.windows[i];
    char name[32];
    std::snprintf(name, sizeof(name), "w_%06zu.f32", i);
    nlohmann::json entry;
    entry["file"] = name;
    entry["subject"] = w.subject_id;
    entry["label"] = w.label ? nlohmann::json(*w.label) : nlohmann::json();
    manifest["windows"].push_back(entry);

    std::ofstream out(dir / name, std::ios::binary);
    if (!out) detail::fail_file(dir / name, "cannot open for writing");
    std::vector<float> buf;
    buf.reserve(static_cast<std::size_t>(w.samples.size()));
    for (Eigen::Index r = 0; r < w.samples.rows(); ++r)
      for (Eigen::Index c = 0; c < w.samples.cols(); ++c)
        buf.push_back(static_cast<float>(w.samples(r, c)));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) detail::fail_file(dir / name, "short write");
  }
  std::ofstream mf(dir / "manifest.json");
  if (!mf) detail::fail_file(dir / "manifest.json", "cannot open for writing");
  mf << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  std::ifstream mf(mpath);
  if (!mf) detail::fail_file(mpath, "cannot open");
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    detail::fail_file(mpath, std::string("invalid JSON: ") + e.what());
  }

  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!manifest.contains(key))
      detail::fail_file(mpath, std::string("missing key '") + key + "'");
    return manifest.at(key);
  };
  if (!need("format_version").is_number_integer() ||
      need("format_version").get<int>() != 1)
    detail::fail_file(mpath, "unsupported format_version");

  Dataset ds;
  try {
    ds.fs_hz = need("fs_hz").get<double>();
    ds.n_channels = need("n_channels").get<int>();
    ds.window_len = need("window_len").get<int>();
  } catch (const nlohmann::json::exception& e) {
    detail::fail_file(mpath, std::string("bad header field: ") + e.what());
  }
  const auto& entries = need("windows");
  if (!entries.is_array() || entries.empty())
    detail::fail_file(mpath, "'windows' must be a non-empty array");
  require(ds.n_channels >= 1 && ds.window_len >= 8 && ds.window_len % 2 == 0 &&
              ds.fs_hz > 0.0,
          "load_dataset: invalid dataset geometry in manifest");

  const std::size_t bytes_per_window =
      static_cast<std::size_t>(ds.n_channels) *
      static_cast<std::size_t>(ds.window_len) * sizeof(float);
  for (const auto& entry : entries) {
    if (!entry.contains("file") || !entry.contains("subject") ||
        !entry.contains("label"))
      detail::fail_file(mpath, "window entry missing file/subject/label");
    const auto fpath = dir / entry.at("file").get<std::string>();
    std::ifstream in(fpath, std::ios::binary | std::ios::ate);
    if (!in) detail::fail_file(fpath, "cannot open");
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size != bytes_per_window)
      detail::fail_file(fpath, "size " + std::to_string(size) +
                                   " != expected " +
                                   std::to_string(bytes_per_window));
    in.seekg(0);
    std::vector<float> buf(static_cast<std::size_t>(ds.n_channels) *
                           static_cast<std::size_t>(ds.window_len));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(bytes_per_window));
    if (!in) detail::fail_file(fpath, "short read");

    Window w;
    w.fs_hz = ds.fs_hz;
    w.subject_id = entry.at("subject").get<std::string>();
    if (!entry.at("label").is_null()) {
      const int lab = entry.at("label").get<int>();
      if (lab != 0 && lab != 1) detail::fail_file(fpath, "label must be 0 or 1");
      w.label = lab;
    }
    w.samples.resize(ds.n_channels, ds.window_len);
    std::size_t k = 0;
    for (int r = 0; r < ds.n_channels; ++r)
      for (int c = 0; c < ds.window_len; ++c)
        w.samples(r, c) = static_cast<double>(buf[k++]);
    if (!w.samples.allFinite()) detail::fail_file(fpath, "non-finite sample");
    ds.windows.push_back(std::move(w));
  }
  validate_dataset(ds);
  return ds;
}

struct SplitSpec {
  enum class Strategy { subject_wise, window_wise };
  Strategy strategy = Strategy::subject_wise;
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  std::uint64_t seed = 0;
};

inline void validate_split_spec(const SplitSpec& s) {
  require(s.train_frac > 0 && s.val_frac > 0 && s.test_frac > 0,
          "split: fractions must be positive");
  require(std::abs(s.train_frac + s.val_frac + s.test_frac - 1.0) <= 1e-9,
          "split: fractions must sum to 1");
}

struct SplitResult {
  Dataset train, val, test;
};

namespace detail {

// In-place Fisher-Yates driven by the library Rng: the permutation depends
// only on (n, seed stream), never on std::shuffle internals.
inline void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

// Largest-remainder apportionment of n items into three buckets. Guarantees
// the counts sum to n and are each within one of the exact share. Rejects
// configurations where a bucket would end up empty.
inline std::array<int, 3> apportion(int n, const SplitSpec& s) {
  const double shares[3] = {s.train_frac * n, s.val_frac * n, s.test_frac * n};
  std::array<int, 3> counts{};
  double rema[3];
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    counts[i] = static_cast<int>(std::floor(shares[i]));
    rema[i] = shares[i] - counts[i];
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rema[a] > rema[b]; });
  for (int k = 0; assigned < n; ++k, ++assigned) counts[order[k % 3]]++;
  require(counts[0] > 0 && counts[1] > 0 && counts[2] > 0,
          "split: too few units for requested fractions");
  return counts;
}

}  // namespace detail

// Deterministic split. subject_wise keeps every window of a subject in one
// partition; window_wise ignores subject identity. Unit order inside a
// partition follows the shuffled assignment order.
inline SplitResult split(const Dataset& ds, const SplitSpec& spec) {
  validate_dataset(ds);
  validate_split_spec(spec);

  auto part_of = [](int unit_rank, const std::array<int, 3>& counts) {
    if (unit_rank < counts[0]) return 0;
    if (unit_rank < counts[0] + counts[1]) return 1;
    return 2;
  };

  SplitResult out;
  for (Dataset* d : {&out.train, &out.val, &out.test}) {
    d->fs_hz = ds.fs_hz;
    d->n_channels = ds.n_channels;
    d->window_len = ds.window_len;
  }

  Rng rng(derive_stream({spec.seed, 0x5B17ull}));
  if (spec.strategy == SplitSpec::Strategy::subject_wise) {
    const auto subj = ds.subjects();  // sorted, so rank order is canonical
    require(subj.size() >= 3,
            "split: subject_wise needs at least 3 subjects");
    std::vector<int> idx(subj.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    detail::shuffle_indices(idx, rng);
    const auto counts = detail::apportion(static_cast<int>(subj.size()), spec);
    std::map<std::string, int> part;
    for (std::size_t rank = 0; rank < idx.size(); ++rank)
      part[subj[static_cast<std::size_t>(idx[rank])]] =
          part_of(static_cast<int>(rank), counts);
    std::array<Dataset*, 3> dest{&out.train, &out.val, &out.test};
    for (std::size_t rank = 0; rank < idx.size(); ++rank) {
      const std::string& s = subj[static_cast<std::size_t>(idx[rank])];
      Dataset* d = dest[static_cast<std::size_t>(part[s])];
      for (const auto& w : ds.windows)
        if (w.subject_id == s) d->windows.push_back(w);
    }
  } else {
    std::vector<int> idx(ds.windows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    detail::shuffle_indices(idx, rng);
    const auto counts =
        detail::apportion(static_cast<int>(ds.windows.size()), spec);
    std::array<Dataset*, 3> dest{&out.train, &out.val, &out.test};
    for (std::size_t rank = 0; rank < idx.size(); ++rank)
      dest[static_cast<std::size_t>(part_of(static_cast<int>(rank), counts))]
          ->windows.push_back(ds.windows[static_cast<std::size_t>(idx[rank])]);
  }
  return out;
}

// Epoch-deterministic shuffled batches of window indices. With drop_last the
// trailing partial batch is discarded; without it the partial batch is kept
// unless it has fewer than two windows — the contrastive losses need at least
// one in-batch negative.
inline std::vector<std::vector<int>> make_batches(int n_windows,
                                                  int batch_size,
                                                  std::uint64_t seed, int epoch,
                                                  bool drop_last = true) {
  require(n_windows >= 0, "make_batches: negative count");
  require(batch_size >= 2, "make_batches: batch_size must be >= 2");
  require(epoch >= 0, "make_batches: negative epoch");
  std::vector<int> idx(static_cast<std::size_t>(n_windows));
  for (int i = 0; i < n_windows; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_stream({seed, 0xBA7Cull, static_cast<std::uint64_t>(epoch)}));
  detail::shuffle_indices(idx, rng);
  std::vector<std::vector<int>> batches;
  const std::size_t n = idx.size();
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t len = std::min(bs, n - start);
    if (len < bs && (drop_last || len < 2)) break;
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(start + len));
  }
  return batches;
}

}  // namespace tfmcl
