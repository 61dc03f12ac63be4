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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "hspose/serialize.hpp"
#include "support.hpp"

using namespace hspose;

namespace {

std::vector<NamedTensor> sample_tensors() {
  Rng rng(21);
  RowMatrix odd(2, 3);
  odd << 0.1, -0.0, 1e-300, std::numeric_limits<double>::denorm_min(), 1.0 / 3.0, -123456789.125;
  return {{"a", test::random_matrix(4, 5, rng)}, {"layer0.gc.k0.support_dirs", odd}, {"empty", RowMatrix(0, 7)}};
}

}  // namespace

TEST_CASE("binary tensors round trip bit-exactly") {
  const auto t = sample_tensors();
  std::stringstream ss;
  write_tensors_binary(ss, t);
  const auto back = read_tensors_binary(ss);
  CHECK(back == t);
  CHECK(std::signbit(back[1].value(0, 1)));
}

TEST_CASE("text tensors round trip bit-exactly") {
  const auto t = sample_tensors();
  std::stringstream ss;
  write_tensors_text(ss, t);
  const auto text = ss.str();
  CHECK(text.rfind("hspose-tensors 1\n", 0) == 0);
  const auto back = read_tensors_text(ss);
  CHECK(back == t);
  std::stringstream again;
  write_tensors_text(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("malformed tensor files are rejected") {
  std::stringstream bad_magic("XXXXXXXX");
  CHECK_THROWS_AS(read_tensors_binary(bad_magic), ParseError);

  std::stringstream full;
  write_tensors_binary(full, sample_tensors());
  auto bytes = full.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_tensors_binary(truncated), ParseError);

  auto wrong_version = bytes;
  wrong_version[8] = 9;
  std::stringstream wv(wrong_version);
  CHECK_THROWS_AS(read_tensors_binary(wv), ParseError);

  std::stringstream short_text("hspose-tensors 1\ntensor x 2 2\n1 2 3\n");
  CHECK_THROWS_AS(read_tensors_text(short_text), ParseError);
  std::stringstream junk("hspose-tensors 1\ntensor x 1 1\nabc\n");
  CHECK_THROWS_AS(read_tensors_text(junk), ParseError);
  std::stringstream keyword("hspose-tensors 1\nmatrix x 1 1\n1\n");
  CHECK_THROWS_AS(read_tensors_text(keyword), ParseError);
}

TEST_CASE("files detect their format") {
  const auto dir = test::scratch_dir("serialize");
  const auto t = sample_tensors();
  save_tensors(dir / "w.bin", t, TensorFormat::binary);
  save_tensors(dir / "w.txt", t, TensorFormat::text);
  CHECK(load_tensors(dir / "w.bin") == t);
  CHECK(load_tensors(dir / "w.txt") == t);
  CHECK_THROWS_AS(load_tensors(dir / "missing.bin"), IoError);
}
