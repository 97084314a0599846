#pragma once

#include <string>

#include "zipfls/data.hpp"
#include "zipfls/nn.hpp"

namespace zipfls {

// Versioned binary checkpoint: "ZLS1" magic, u32 version, u32 num_classes,
// u32 in_channels, u32 widths[3], f32 norm mean[3] + std[3], u64 value
// count, then little-endian f32 values (parameters in declaration order,
// then batch-norm running stats).
void save_checkpoint(const std::string& path, MiniNet<float>& net,
                     const NormStats& stats);

struct LoadedNet {
  MiniNet<float> net;
  NormStats stats;
};
LoadedNet load_checkpoint(const std::string& path);

}  // namespace zipfls
