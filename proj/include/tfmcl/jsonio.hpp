#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "tfmcl/errors.hpp"
#include "tfmcl/model.hpp"

namespace tfmcl {

using Json = nlohmann::json;

// Configs are contracts: a key the code does not understand is an error, not
// a warning, so typos cannot silently fall back to defaults.
inline void reject_unknown_keys(const Json& j,
                                std::initializer_list<const char*> allowed,
                                const std::string& where) {
  require(j.is_object(), where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw InvalidArgument(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read_field(const Json& j, const char* key, T& out,
                const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InvalidArgument(where + ": bad value for '" + key + "': " + e.what());
  }
}

inline Json encoder_config_to_json(const EncoderConfig& c) {
  return Json{{"n_channels", c.n_channels},
              {"window_len", c.window_len},
              {"time_kernel", c.time_kernel},
              {"freq_kernel", c.freq_kernel},
              {"n_step_filters", c.n_step_filters},
              {"n_channel_filters", c.n_channel_filters},
              {"attn_heads", c.attn_heads},
              {"encoder_layers", c.encoder_layers},
              {"ffn_hidden", c.ffn_hidden},
              {"repr_dim", c.repr_dim},
              {"fusion_dim", c.fusion_dim},
              {"fmh_mlp_layers", c.fmh_mlp_layers}};
}

inline EncoderConfig encoder_config_from_json(const Json& j,
                                              const std::string& where) {
  reject_unknown_keys(j,
                      {"n_channels", "window_len", "time_kernel", "freq_kernel",
                       "n_step_filters", "n_channel_filters", "attn_heads",
                       "encoder_layers", "ffn_hidden", "repr_dim", "fusion_dim",
                       "fmh_mlp_layers"},
                      where);
  EncoderConfig c;
  read_field(j, "n_channels", c.n_channels, where);
  read_field(j, "window_len", c.window_len, where);
  read_field(j, "time_kernel", c.time_kernel, where);
  read_field(j, "freq_kernel", c.freq_kernel, where);
  read_field(j, "n_step_filters", c.n_step_filters, where);
  read_field(j, "n_channel_filters", c.n_channel_filters, where);
  read_field(j, "attn_heads", c.attn_heads, where);
  read_field(j, "encoder_layers", c.encoder_layers, where);
  read_field(j, "ffn_hidden", c.ffn_hidden, where);
  read_field(j, "repr_dim", c.repr_dim, where);
  read_field(j, "fusion_dim", c.fusion_dim, where);
  read_field(j, "fmh_mlp_layers", c.fmh_mlp_layers, where);
  return c;
}

}  // namespace tfmcl
