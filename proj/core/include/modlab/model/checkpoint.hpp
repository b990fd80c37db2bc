#pragma once

#include <filesystem>

#include "modlab/model/decoder.hpp"

namespace modlab::model {

// A checkpoint is a directory with
//   manifest.json  config, method tag and constants, seed, and one entry per
//                  parameter (name, shape, init, decay, offset)
//   params.bin     every parameter's values as little-endian float64, in
//                  manifest order
void save_checkpoint(const Decoder& model, const std::filesystem::path& dir);

// Rebuilds the model from the manifest and overwrites its values from the
// archive. Throws ContractError on any name/shape/size mismatch.
Decoder load_checkpoint(const std::filesystem::path& dir);

}  // namespace modlab::model
