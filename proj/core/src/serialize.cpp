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

#include "hspose/serialize.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace hspose {
namespace {

constexpr std::array<char, 8> kMagic{'H', 'S', 'P', 'O', 'S', 'E', 'W', '\0'};
constexpr std::string_view kTextMagic = "hspose-tensors";

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw ParseError("tensor file truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

double parse_double(const std::string& token) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) throw ParseError("invalid value '" + token + "'");
  return v;
}

}  // namespace

void write_tensors_binary(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
    for (Index i = 0; i < t.value.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(t.value.data()[i]));
  }
  if (!out) throw IoError("tensor write failed");
}

std::vector<NamedTensor> read_tensors_binary(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ParseError("not an hspose binary tensor file");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kTensorFormatVersion) throw ParseError("unsupported tensor format version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(in);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto len = get_le<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw ParseError("tensor file truncated");
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    if (rows > (1u << 30) || cols > (1u << 30)) throw ParseError("tensor shape too large");
    RowMatrix value(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < value.size(); ++i) value.data()[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
    tensors.push_back({std::move(name), std::move(value)});
  }
  return tensors;
}

void write_tensors_text(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  std::string text;
  text += kTextMagic;
  text += ' ';
  text += std::to_string(kTensorFormatVersion);
  text += '\n';
  for (const auto& t : tensors) {
    text += "tensor " + t.name + ' ' + std::to_string(t.value.rows()) + ' ' + std::to_string(t.value.cols()) + '\n';
    for (Index r = 0; r < t.value.rows(); ++r) {
      for (Index c = 0; c < t.value.cols(); ++c) {
        if (c > 0) text += ' ';
        append_real(text, t.value(r, c));
      }
      text += '\n';
    }
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("tensor write failed");
}

std::vector<NamedTensor> read_tensors_text(std::istream& in) {
  std::string magic;
  std::uint32_t version = 0;
  if (!(in >> magic >> version) || magic != kTextMagic) throw ParseError("not an hspose text tensor file");
  if (version != kTensorFormatVersion) throw ParseError("unsupported tensor format version " + std::to_string(version));
  std::vector<NamedTensor> tensors;
  std::string keyword;
  while (in >> keyword) {
    if (keyword != "tensor") throw ParseError("expected 'tensor', got '" + keyword + "'");
    NamedTensor t;
    Index rows = 0, cols = 0;
    if (!(in >> t.name >> rows >> cols) || rows < 0 || cols < 0) throw ParseError("malformed tensor header");
    t.value.resize(rows, cols);
    std::string token;
    for (Index i = 0; i < rows * cols; ++i) {
      if (!(in >> token)) throw ParseError("tensor '" + t.name + "' truncated");
      t.value.data()[i] = parse_double(token);
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors, TensorFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  if (format == TensorFormat::binary) {
    write_tensors_binary(out, tensors);
  } else {
    write_tensors_text(out, tensors);
  }
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::array<char, 8> head{};
  in.read(head.data(), head.size());
  in.clear();
  in.seekg(0);
  if (head == kMagic) return read_tensors_binary(in);
  return read_tensors_text(in);
}

}  // namespace hspose
