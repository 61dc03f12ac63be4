// Copyright 2026 The hspose Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HSPOSE_ENCODER_CONFIG_HPP
#define HSPOSE_ENCODER_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hspose/hslayer.hpp"

namespace hspose {

struct LayerSpec {
  Index d_out = 16;
  Index support = 1;
  Index m_rff = 10;
  Index m_orl = 10;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class EncoderVariant {
  hs,        ///< STE + RF-F + ORL
  plain_gc,  ///< ablation: geometric path only, RF-P everywhere, no ORL
};

/// Architecture description read from an encoder config file. Parameters
/// are not stored; build_encoder() initialises them from a seed.
struct EncoderSpec {
  std::vector<LayerSpec> layers;
  Index first_feature_dim = 1;  ///< width of the all-ones first-layer GC input
  std::map<Index, PoolStage> pools;
  EncoderVariant variant = EncoderVariant::hs;
  std::uint64_t seed = 0;

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

/// Two HS-layers of width 16, one support vector, 10 neighbors for RF-F and
/// ORL, no pooling.
EncoderSpec default_encoder_spec();

// Config file syntax: `key = value` lines, `#` starts a comment.
//
//   seed              = 0              pooling + parameter seed
//   variant           = hs | plain_gc
//   first_feature_dim = 1
//   layers            = 16, 16         output width of each layer
//   support           = 1              defaults for every layer ...
//   m_rff             = 10
//   m_orl             = 10
//   layer.<i>.support = 2              ... and per-layer overrides (0-based)
//   layer.<i>.m_rff   = 20
//   layer.<i>.m_orl   = 20
//   pool.<i>          = 128, 4         after layer i keep 128 points, max over 4 neighbors
//
// Unknown keys are rejected.
EncoderSpec parse_encoder_spec(std::string_view text);
EncoderSpec load_encoder_spec(const std::filesystem::path& path);
std::string format_encoder_spec(const EncoderSpec& spec);

/// Initialised encoder for `spec`. Parameters come from `param_seed`; the
/// pooling seed is spec.seed.
EncoderConfig build_encoder(const EncoderSpec& spec, std::uint64_t param_seed);

/// Applies the plain-GC ablation switches to every layer.
void make_plain_gc(EncoderConfig& cfg);

}  // namespace hspose

#endif  // HSPOSE_ENCODER_CONFIG_HPP
