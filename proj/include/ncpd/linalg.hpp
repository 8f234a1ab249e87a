#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ncpd {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::vector<double> col(std::size_t j) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// Matrix product a·b.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& m);
/// Σ_ij a_ij·b_ij.
double frobenius_inner(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool is_symmetric(const Matrix& m, double tol);

/// Eigen-pairs of a symmetric matrix, eigenvalues descending, one eigenvector per column.
struct EigDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are returned in descending order. Each eigenvector is scaled to
/// unit norm and its entry of largest magnitude (lowest index on ties) is made
/// nonnegative, so the output is deterministic.
EigDecomposition sym_eig(const Matrix& m);

/// Eigenvalues only, descending: Householder tridiagonalisation then implicit QL.
std::vector<double> sym_eigenvalues(const Matrix& m);

/// The k largest singular values, descending. Computed from the eigenvalues of
/// the smaller Gram matrix.
std::vector<double> top_singular_values(const Matrix& m, std::size_t k);
/// All min(rows, cols) singular values, descending.
std::vector<double> singular_values(const Matrix& m);

/// Solves m·x = b by LU with partial pivoting. Throws SingularityError when a
/// pivot magnitude falls to 1e-12 or below.
Matrix solve_linear(const Matrix& m, const Matrix& b);

struct MatrixNorms {
  double frobenius = 0.0;
  double operator_norm = 0.0;
};

MatrixNorms matrix_norms(const Matrix& m);

}  // namespace ncpd
