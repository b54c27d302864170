#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "rmf/net.hpp"
#include "rmf/rng.hpp"

namespace rmf {

nlohmann::json to_json(const NetConfig& c);
/// Missing keys keep the defaults in `base`; unknown keys are ConfigError.
NetConfig net_config_from_json(const nlohmann::json& j, NetConfig base = {});

struct Checkpoint {
  VelocityNet net;
  Rng::State rng_state{};
};

/// Binary layout (little endian):
///   "RMF1" | u32 version | u32 length + UTF-8 JSON {manifold, net}
///   | u64 parameter_count | f64 params | f64 adam m | f64 adam v | u64 step
///   | 16 bytes RNG state
/// Written to path + ".tmp" and renamed, so a crash never leaves a torn file.
void save_checkpoint(const std::string& path, const VelocityNet& net, const Rng::State& rng_state);

/// Throws IoError, FormatError (bad magic, version, truncation) or
/// ConfigMismatch when `expected` is given and the stored manifold differs.
Checkpoint load_checkpoint(const std::string& path,
                           const std::optional<Manifold>& expected = std::nullopt);

}  // namespace rmf
