#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tfmcl/errors.hpp"
#include "tfmcl/jsonio.hpp"
#include "tfmcl/model.hpp"
#include "tfmcl/version.hpp"

namespace tfmcl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::weight: return "weight";
    case ParamKind::bias: return "bias";
    case ParamKind::gain: return "gain";
  }
  throw InvalidArgument("unknown param kind");
}

// Layout: u64 little-endian header length, JSON header, then concatenated
// row-major little-endian float32 blobs at the offsets the header declares
// (relative to the payload start).
inline void save_checkpoint(const ParamSet<double>& params,
                            const std::filesystem::path& path) {
  Json header;
  header["dtype"] = "f32le";
  header["tool_version"] = kVersion;
  header["seed"] = params.seed;
  header["encoder_config"] = encoder_config_to_json(params.config);
  Json tensors = Json::array();
  std::uint64_t offset = 0;
  for (const auto& e : params.entries) {
    tensors.push_back({{"name", e.name},
                       {"kind", to_string(e.kind)},
                       {"shape", {e.value.rows(), e.value.cols()}},
                       {"byte_offset", offset}});
    offset += static_cast<std::uint64_t>(e.value.size()) * sizeof(float);
  }
  header["tensors"] = std::move(tensors);
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& e : params.entries) {
    std::vector<float> buf;
    buf.reserve(static_cast<std::size_t>(e.value.size()));
    for (Eigen::Index r = 0; r < e.value.rows(); ++r)
      for (Eigen::Index c = 0; c < e.value.cols(); ++c)
        buf.push_back(static_cast<float>(e.value(r, c)));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

inline ParamSet<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError(path.string() + ": cannot open");
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  std::uint64_t hlen = 0;
  if (file_size < sizeof(hlen))
    throw IoError(path.string() + ": truncated header length");
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (hlen == 0 || sizeof(hlen) + hlen > file_size)
    throw IoError(path.string() + ": header length out of range");
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw IoError(path.string() + ": short header read");

  Json header;
  try {
    header = Json::parse(htext);
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": invalid header JSON: " + e.what());
  }
  reject_unknown_keys(
      header, {"dtype", "tool_version", "seed", "encoder_config", "tensors"},
      path.string());
  for (const char* k : {"dtype", "seed", "encoder_config", "tensors"})
    if (!header.contains(k))
      throw IoError(path.string() + ": header missing '" + k + "'");
  if (header.at("dtype").get<std::string>() != "f32le")
    throw IoError(path.string() + ": unsupported dtype");

  ParamSet<double> params;
  try {
    params.seed = header.at("seed").get<std::uint64_t>();
    params.config =
        encoder_config_from_json(header.at("encoder_config"), path.string());
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": bad header field: " + e.what());
  }
  validate_config(params.config);

  const auto specs = param_specs(params.config);
  const auto& tensors = header.at("tensors");
  if (!tensors.is_array() || tensors.size() != specs.size())
    throw IoError(path.string() + ": tensor list does not match config");

  const std::uint64_t payload_start = sizeof(hlen) + hlen;
  const std::uint64_t payload_size = file_size - payload_start;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& t = tensors[i];
    reject_unknown_keys(t, {"name", "kind", "shape", "byte_offset"},
                        path.string());
    const auto name = t.at("name").get<std::string>();
    if (name != specs[i].name)
      throw IoError(path.string() + ": tensor '" + name +
                    "' out of order (expected '" + specs[i].name + "')");
    if (t.at("kind").get<std::string>() != to_string(specs[i].kind))
      throw IoError(path.string() + ": tensor '" + name + "' has wrong kind");
    const auto shape = t.at("shape").get<std::vector<std::int64_t>>();
    if (shape.size() != 2 || shape[0] != specs[i].rows ||
        shape[1] != specs[i].cols)
      throw IoError(path.string() + ": tensor '" + name + "' has wrong shape");
    const auto offset = t.at("byte_offset").get<std::uint64_t>();
    const std::uint64_t nbytes =
        static_cast<std::uint64_t>(specs[i].rows) *
        static_cast<std::uint64_t>(specs[i].cols) * sizeof(float);
    if (offset + nbytes > payload_size)
      throw IoError(path.string() + ": tensor '" + name +
                    "' extends past end of file");

    std::vector<float> buf(static_cast<std::size_t>(nbytes / sizeof(float)));
    in.seekg(static_cast<std::streamoff>(payload_start + offset));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(nbytes));
    if (!in) throw IoError(path.string() + ": short tensor read: " + name);

    typename ParamSet<double>::Entry e;
    e.name = specs[i].name;
    e.kind = specs[i].kind;
    e.value.resize(specs[i].rows, specs[i].cols);
    std::size_t k = 0;
    for (int r = 0; r < specs[i].rows; ++r)
      for (int c = 0; c < specs[i].cols; ++c)
        e.value(r, c) = static_cast<double>(buf[k++]);
    if (!e.value.allFinite())
      throw IoError(path.string() + ": non-finite values in tensor " + name);
    params.index[e.name] = static_cast<int>(params.entries.size());
    params.entries.push_back(std::move(e));
  }
  return params;
}

}  // namespace tfmcl
