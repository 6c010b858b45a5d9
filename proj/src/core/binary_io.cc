// Copyright 2026 The Viscade Authors.
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

#include "viscade/core/binary_io.h"

#include <fstream>
#include <iterator>

namespace viscade {

void ByteWriter::put_string(std::string_view s) {
  put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::put_varint(std::uint64_t value) {
  while (value >= 0x80) {
    bytes_.push_back(static_cast<std::uint8_t>(value | 0x80));
    value >>= 7;
  }
  bytes_.push_back(static_cast<std::uint8_t>(value));
}

void ByteReader::expect_magic(std::string_view magic) {
  ensure(magic.size());
  if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
    fail("bad magic, expected \"" + std::string(magic) + "\"");
  }
  pos_ += magic.size();
}

std::string ByteReader::get_string() {
  const auto n = get<std::uint32_t>();
  ensure(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::uint64_t ByteReader::get_varint() {
  std::uint64_t value = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    ensure(1);
    const std::uint8_t b = bytes_[pos_++];
    value |= static_cast<std::uint64_t>(b & 0x7f) << shift;
    if ((b & 0x80) == 0) return value;
  }
  fail("varint overflow");
}

std::span<const std::uint8_t> ByteReader::get_bytes(std::size_t n) {
  ensure(n);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::seek(std::size_t pos) {
  if (pos > bytes_.size()) fail("seek past end");
  pos_ = pos;
}

void ByteReader::fail(const std::string& what) const {
  throw_error(on_error_, context_ + ": " + what + " at byte " +
                             std::to_string(pos_));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_error(ErrorCode::kIo, "short write to " + path.string());
}

std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

}  // namespace viscade
