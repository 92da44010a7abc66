#include "pmcqa/linalg.hpp"

#include <cmath>

#include "pmcqa/errors.hpp"

namespace pmcqa {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec matvec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols) throw ContractError("matvec: shape mismatch");
  Vec y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) y[i] = dot(m.row(i), x);
  return y;
}

void matvec_transpose_acc(const Matrix& m, std::span<const double> y, Vec& out) {
  if (y.size() != m.rows || out.size() != m.cols)
    throw ContractError("matvec_transpose_acc: shape mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    std::span<const double> r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += yi * r[j];
  }
}

void outer_acc(Matrix& m, std::span<const double> y, std::span<const double> x) {
  if (y.size() != m.rows || x.size() != m.cols) throw ContractError("outer_acc: shape mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    std::span<double> r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) r[j] += yi * x[j];
  }
}

void axpy(double a, std::span<const double> x, Vec& y) {
  if (x.size() != y.size()) throw ContractError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace pmcqa
