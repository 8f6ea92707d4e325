#pragma once

#include <string>

#include "wblift/model.hpp"

namespace wblift {

/// Versioned binary container: JSON header (config, topology version, tensor
/// index) followed by raw little-endian float64 tensor data. Round-trips are
/// bit-exact.
void save_checkpoint(Model& model, const std::string& topology_version,
                     const std::string& path);

/// Loads parameters into an already-constructed model. Refuses to load when
/// the stored config or topology version differ from the model's.
void load_checkpoint(Model& model, const std::string& topology_version,
                     const std::string& path);

/// Reads just the ModelConfig from a checkpoint header.
ModelConfig peek_checkpoint_config(const std::string& path);

}  // namespace wblift
