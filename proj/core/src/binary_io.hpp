#pragma once

// Little-endian binary containers with a trailing CRC-32, shared by the
// dataset and checkpoint formats.

#include "srvfgan/error.hpp"
#include "srvfgan/geometry.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace srvfgan::detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::string_view magic);

  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void f64s(const double* data, std::size_t n);
  void matrix(const Matrix& m) { f64s(m.data(), static_cast<std::size_t>(m.size())); }

  /// Appends the checksum and writes the file atomically (temp file + rename).
  void save(const std::filesystem::path& path);

 private:
  std::vector<unsigned char> buf_;
};

class BinaryReader {
 public:
  /// Reads the whole file and verifies magic and checksum. A file whose magic
  /// shares `family` but differs from `magic` raises VersionMismatch.
  BinaryReader(const std::filesystem::path& path, std::string_view magic, std::string_view family);

  std::uint64_t u64();
  double f64();
  std::string str();
  void f64s(double* data, std::size_t n);
  Matrix matrix(std::size_t rows, std::size_t cols);
  bool at_end() const noexcept { return pos_ == end_; }
  /// A count field that must not exceed what the remaining bytes could hold.
  std::uint64_t count(std::size_t min_bytes_each);

 private:
  void need(std::size_t n);

  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  std::string where_;
};

}  // namespace srvfgan::detail
