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

#include "hspose/encoder_config.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#include "hspose/rng.hpp"

namespace hspose {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view token, std::size_t line_no) {
  token = trim(token);
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError("config line " + std::to_string(line_no) + ": invalid number '" + std::string(token) + "'");
  }
  return value;
}

std::vector<Index> parse_list(std::string_view value, std::size_t line_no) {
  std::vector<Index> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto comma = value.find(',', start);
    if (comma == std::string_view::npos) comma = value.size();
    out.push_back(parse_number<Index>(value.substr(start, comma - start), line_no));
    start = comma + 1;
  }
  return out;
}

Index positive(Index v, std::string_view key, std::size_t line_no) {
  if (v < 1) throw ParseError("config line " + std::to_string(line_no) + ": '" + std::string(key) + "' must be >= 1");
  return v;
}

}  // namespace

EncoderSpec default_encoder_spec() {
  EncoderSpec spec;
  spec.layers = {LayerSpec{}, LayerSpec{}};
  return spec;
}

EncoderSpec parse_encoder_spec(std::string_view text) {
  EncoderSpec spec;
  std::vector<Index> widths{16, 16};
  LayerSpec defaults;
  struct Override {
    std::optional<Index> support, m_rff, m_orl;
  };
  std::map<Index, Override> overrides;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));

    if (key == "seed") {
      spec.seed = parse_number<std::uint64_t>(value, line_no);
    } else if (key == "variant") {
      if (value == "hs") {
        spec.variant = EncoderVariant::hs;
      } else if (value == "plain_gc") {
        spec.variant = EncoderVariant::plain_gc;
      } else {
        throw ParseError("config line " + std::to_string(line_no) + ": unknown variant '" + std::string(value) + "'");
      }
    } else if (key == "first_feature_dim") {
      spec.first_feature_dim = positive(parse_number<Index>(value, line_no), key, line_no);
    } else if (key == "layers") {
      widths = parse_list(value, line_no);
      for (auto w : widths) positive(w, key, line_no);
    } else if (key == "support") {
      defaults.support = parse_number<Index>(value, line_no);
      if (defaults.support < 0) throw ParseError("config line " + std::to_string(line_no) + ": support must be >= 0");
    } else if (key == "m_rff") {
      defaults.m_rff = positive(parse_number<Index>(value, line_no), key, line_no);
    } else if (key == "m_orl") {
      defaults.m_orl = positive(parse_number<Index>(value, line_no), key, line_no);
    } else if (key.starts_with("layer.")) {
      const auto rest = key.substr(6);
      const auto dot = rest.find('.');
      if (dot == std::string_view::npos) throw ParseError("config line " + std::to_string(line_no) + ": malformed key '" + std::string(key) + "'");
      const auto idx = parse_number<Index>(rest.substr(0, dot), line_no);
      const auto field = rest.substr(dot + 1);
      auto& o = overrides[idx];
      if (field == "support") {
        o.support = parse_number<Index>(value, line_no);
      } else if (field == "m_rff") {
        o.m_rff = positive(parse_number<Index>(value, line_no), key, line_no);
      } else if (field == "m_orl") {
        o.m_orl = positive(parse_number<Index>(value, line_no), key, line_no);
      } else {
        throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
      }
    } else if (key.starts_with("pool.")) {
      const auto idx = parse_number<Index>(key.substr(5), line_no);
      const auto vals = parse_list(value, line_no);
      if (vals.size() != 2 || vals[0] < 1 || vals[1] < 0) {
        throw ParseError("config line " + std::to_string(line_no) + ": pool expects 'keep, m'");
      }
      spec.pools[idx] = PoolStage{vals[0], vals[1]};
    } else {
      throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }

  for (const auto w : widths) {
    LayerSpec layer = defaults;
    layer.d_out = w;
    spec.layers.push_back(layer);
  }
  for (const auto& [idx, o] : overrides) {
    if (idx < 0 || idx >= static_cast<Index>(spec.layers.size())) {
      throw ParseError("config: override for layer " + std::to_string(idx) + " but only " +
                       std::to_string(spec.layers.size()) + " layers");
    }
    auto& layer = spec.layers[static_cast<std::size_t>(idx)];
    if (o.support) layer.support = *o.support;
    if (o.m_rff) layer.m_rff = *o.m_rff;
    if (o.m_orl) layer.m_orl = *o.m_orl;
  }
  for (const auto& [idx, stage] : spec.pools) {
    if (idx < 0 || idx >= static_cast<Index>(spec.layers.size())) {
      throw ParseError("config: pool after layer " + std::to_string(idx) + " is out of range");
    }
  }
  return spec;
}

EncoderSpec load_encoder_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_encoder_spec(buffer.str());
}

std::string format_encoder_spec(const EncoderSpec& spec) {
  std::ostringstream out;
  out << "seed = " << spec.seed << '\n';
  out << "variant = " << (spec.variant == EncoderVariant::hs ? "hs" : "plain_gc") << '\n';
  out << "first_feature_dim = " << spec.first_feature_dim << '\n';
  out << "layers = ";
  for (std::size_t i = 0; i < spec.layers.size(); ++i) out << (i ? ", " : "") << spec.layers[i].d_out;
  out << '\n';
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    out << "layer." << i << ".support = " << l.support << '\n';
    out << "layer." << i << ".m_rff = " << l.m_rff << '\n';
    out << "layer." << i << ".m_orl = " << l.m_orl << '\n';
  }
  for (const auto& [idx, stage] : spec.pools) out << "pool." << idx << " = " << stage.keep << ", " << stage.m << '\n';
  return out.str();
}

EncoderConfig build_encoder(const EncoderSpec& spec, std::uint64_t param_seed) {
  if (spec.layers.empty()) throw std::invalid_argument("build_encoder: no layers");
  Rng rng(param_seed);
  EncoderConfig cfg;
  cfg.seed = spec.seed;
  Index d_in = spec.first_feature_dim;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    cfg.layers.push_back(HSLayerParams::random(d_in, l.d_out, l.support, l.m_rff, l.m_orl, i == 0, rng));
    d_in = l.d_out;
  }
  cfg.pool_after = spec.pools;
  if (spec.variant == EncoderVariant::plain_gc) make_plain_gc(cfg);
  cfg.validate();
  return cfg;
}

void make_plain_gc(EncoderConfig& cfg) {
  for (auto& layer : cfg.layers) {
    layer.use_ste = false;
    layer.use_orl = false;
    layer.receptive_field = ReceptiveField::point;
    layer.ste = LinearMap::zeros(layer.ste.d_in(), layer.ste.d_out());
    layer.orl = LinearMap::zeros(layer.orl.d_in(), layer.orl.d_out());
  }
}

}  // namespace hspose
