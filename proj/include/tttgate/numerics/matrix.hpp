#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace tttgate {

using Real = double;

// Dense row-major matrix of Real. Owns its storage.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<Real> data);
  Matrix(std::initializer_list<std::initializer_list<Real>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }
  const std::vector<Real>& storage() const noexcept { return data_; }

  bool all_finite() const noexcept;

  // Rows [begin, begin + count) as a new matrix.
  Matrix slice_rows(std::size_t begin, std::size_t count) const;
  // Columns [begin, begin + count) as a new matrix.
  Matrix slice_cols(std::size_t begin, std::size_t count) const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(Real s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, Real s);

Matrix transpose(const Matrix& a);

// a (m x k) * b (k x n)
Matrix matmul(const Matrix& a, const Matrix& b);
// a (m x k) * b^T, b is (n x k)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// a^T * b, a is (k x m), b is (k x n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Row vector x (length k) times b (k x n).
std::vector<Real> vecmat(std::span<const Real> x, const Matrix& b);

// Stacks `top` above `bottom`; column counts must agree (empty `top` allowed).
Matrix vstack(const Matrix& top, const Matrix& bottom);

Real max_abs_diff(const Matrix& a, const Matrix& b);
// max |a - b| / max(1, max |b|)
Real max_rel_diff(const Matrix& a, const Matrix& b);

}  // namespace tttgate
