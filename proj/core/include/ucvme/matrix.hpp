#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ucvme {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
///
/// The only numeric container in the library: inputs, activations,
/// parameters and gradients are all Matrix values. All arithmetic is
/// carried out in double precision with a fixed summation order, so the
/// same inputs always give bit-identical outputs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols, 0.0}; }
  static Matrix ones(std::size_t rows, std::size_t cols) { return {rows, cols, 1.0}; }
  static Matrix identity(std::size_t n);
  /// n x 1 column built from a vector.
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  /// Copy of the rows listed in `indices`, in that order.
  Matrix select_rows(std::span<const std::size_t> indices) const;
  Vector column_vector(std::size_t c) const;

  Matrix transposed() const;
  bool all_finite() const noexcept;
  std::string shape_string() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Standard matrix product. Throws ShapeError naming both shapes when
/// a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix hadamard(const Matrix& a, const Matrix& b);
/// Adds a 1 x cols row vector to every row of m.
Matrix add_row_broadcast(const Matrix& m, const Matrix& row);
/// 1 x cols column sums, accumulated top to bottom.
Matrix column_sums(const Matrix& m);

}  // namespace ucvme
