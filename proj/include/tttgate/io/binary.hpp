#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tttgate/numerics/matrix.hpp"

namespace tttgate::io {

// Little-endian byte buffer writer. Matrices are (u64 rows, u64 cols,
// rows*cols IEEE-754 binary64 values, row-major).
class BinaryWriter {
 public:
  void magic(std::string_view tag);  // raw bytes, no length prefix
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> data);
  void matrix(const Matrix& m);
  void vector(std::span<const Real> v);  // stored as a 1 x n matrix

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }

  // Writes to `path` via a temporary file + rename.
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::vector<std::uint8_t> data) : buf_(std::move(data)) {}
  static BinaryReader from_file(const std::filesystem::path& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::vector<std::uint8_t> bytes(std::size_t n);
  Matrix matrix();
  std::vector<Real> vector();

  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

 private:
  const std::uint8_t* take(std::size_t n);

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// Atomic text/binary write (temporary sibling + rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace tttgate::io
