#include "tttgate/io/binary.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tttgate/error.hpp"

namespace tttgate::io {

namespace {
template <typename U>
void put_le(std::vector<std::uint8_t>& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

// Upper bound on a single matrix to reject corrupted headers early.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
}  // namespace

void BinaryWriter::magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }
void BinaryWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void BinaryWriter::i64(std::int64_t v) { put_le(buf_, static_cast<std::uint64_t>(v)); }
void BinaryWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }
void BinaryWriter::bytes(std::span<const std::uint8_t> data) {
  buf_.insert(buf_.end(), data.begin(), data.end());
}

void BinaryWriter::matrix(const Matrix& m) {
  u64(m.rows());
  u64(m.cols());
  for (Real v : m.values()) f64(v);
}

void BinaryWriter::vector(std::span<const Real> v) {
  u64(1);
  u64(v.size());
  for (Real x : v) f64(x);
}

void BinaryWriter::save(const std::filesystem::path& path) const {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(buf_.data()), buf_.size()));
}

BinaryReader BinaryReader::from_file(const std::filesystem::path& path) {
  return BinaryReader(read_file_bytes(path));
}

const std::uint8_t* BinaryReader::take(std::size_t n) {
  if (n > remaining()) throw IoError("binary read past end of data (truncated file?)");
  const std::uint8_t* p = buf_.data() + pos_;
  pos_ += n;
  return p;
}

void BinaryReader::expect_magic(std::string_view tag) {
  const std::uint8_t* p = take(tag.size());
  if (std::memcmp(p, tag.data(), tag.size()) != 0)
    throw IoError("bad magic: expected '" + std::string(tag) + "'");
}

std::uint32_t BinaryReader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t BinaryReader::u64() { return get_le<std::uint64_t>(take(8)); }
std::int64_t BinaryReader::i64() { return static_cast<std::int64_t>(u64()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> BinaryReader::bytes(std::size_t n) {
  const std::uint8_t* p = take(n);
  return {p, p + n};
}

Matrix BinaryReader::matrix() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (rows != 0 && cols > kMaxElements / rows) throw IoError("matrix header too large");
  if (rows * cols * 8 > remaining()) throw IoError("matrix data truncated");
  std::vector<Real> data(rows * cols);
  for (Real& v : data) v = f64();
  return Matrix(rows, cols, std::move(data));
}

std::vector<Real> BinaryReader::vector() {
  Matrix m = matrix();
  if (m.rows() != 1) throw IoError("expected a 1 x n vector record");
  return {m.values().begin(), m.values().end()};
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace tttgate::io
