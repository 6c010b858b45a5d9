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

#ifndef VISCADE_CORE_BINARY_IO_H_
#define VISCADE_CORE_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "viscade/core/error.h"

namespace viscade {

// Little-endian serialization helpers. The build targets little-endian hosts
// only, so scalars are copied bytewise.
static_assert(std::endian::native == std::endian::little,
              "viscade file formats assume a little-endian host");

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void put_magic(std::string_view magic) {
    bytes_.insert(bytes_.end(), magic.begin(), magic.end());
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put_array(std::span<const T> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }

  // u32 length followed by the raw bytes.
  void put_string(std::string_view s);
  void put_varint(std::uint64_t value);

  std::size_t size() const { return bytes_.size(); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> release() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked cursor over a byte buffer. Running off the end raises the
// error code given at construction, prefixed with `context`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, ErrorCode on_error,
             std::string context)
      : bytes_(bytes), on_error_(on_error), context_(std::move(context)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    ensure(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void get_array(std::span<T> out) {
    ensure(out.size_bytes());
    std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  void expect_magic(std::string_view magic);
  std::string get_string();
  std::uint64_t get_varint();
  std::span<const std::uint8_t> get_bytes(std::size_t n);

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  void seek(std::size_t pos);

  [[noreturn]] void fail(const std::string& what) const;

 private:
  void ensure(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated input");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  ErrorCode on_error_;
  std::string context_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);
std::string read_file_text(const std::filesystem::path& path);
void write_file_text(const std::filesystem::path& path, std::string_view text);

}  // namespace viscade

#endif  // VISCADE_CORE_BINARY_IO_H_
