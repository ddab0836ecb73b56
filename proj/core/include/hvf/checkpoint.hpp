#pragma once

// Binary checkpoint: "HVF1", u32 version, u64 header length, a JSON header
// (config, tensor names/shapes/offsets, scaler, window options, metadata) and
// raw little-endian float64 payloads.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hvf/model.hpp"
#include "hvf/pipeline.hpp"

namespace hvf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor>> tensors;  // store order
  ScalerSpec scaler;
  WindowOptions window;
  SplitFractions fractions;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> metadata;
};

Checkpoint make_checkpoint(const Model& model, const ScalerSpec& scaler, const WindowOptions& window,
                           const SplitFractions& fractions, std::uint64_t seed,
                           std::map<std::string, std::string> metadata = {});

/// Builds the model from the stored config and copies every tensor in by name.
/// Throws ParseError when a tensor is missing, extra or mis-shaped.
Model restore_model(const Checkpoint& ckpt);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws ParseError (bad magic, unsupported version, truncation, malformed header).
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Atomic: writes a sibling temporary file and renames it over `path`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hvf
