#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pmcqa {

using Vec = std::vector<double>;

// Dense row-major matrix. Reductions everywhere in this library run
// left-to-right in index order; tests rely on that fixed association.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

double dot(std::span<const double> a, std::span<const double> b);

// y = M x
Vec matvec(const Matrix& m, std::span<const double> x);

// out += M^T y
void matvec_transpose_acc(const Matrix& m, std::span<const double> y, Vec& out);

// M += y x^T
void outer_acc(Matrix& m, std::span<const double> y, std::span<const double> x);

void axpy(double a, std::span<const double> x, Vec& y);

bool all_finite(std::span<const double> v);

}  // namespace pmcqa
