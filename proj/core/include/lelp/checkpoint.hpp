#pragma once

#include <string>

#include "lelp/nn.hpp"

namespace lelp::nn {

// Flat binary container: magic "LELPMDL", format version, layer-dim list,
// then per-layer weight and bias blocks as little-endian 64-bit floats.
// A human-readable sidecar is written to path + ".meta" recording the
// head split, activation, and init seed.
void save_model(const MlpParams& model, const std::string& path);
MlpParams load_model(const std::string& path);

}  // namespace lelp::nn
