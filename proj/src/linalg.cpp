#include "horolab/linalg.hpp"

#include <utility>

namespace horolab {

std::string to_string(const Rational& q) {
  if (denominator(q) == 1) return numerator(q).str();
  return numerator(q).str() + "/" + denominator(q).str();
}

namespace {

// Reduced row echelon form in place; returns pivot columns.
std::vector<std::size_t> rref(Matrix<Rational>& m, std::size_t ncols) {
  std::vector<std::size_t> pivots;
  std::size_t row = 0;
  for (std::size_t col = 0; col < ncols && row < m.rows(); ++col) {
    std::size_t p = row;
    while (p < m.rows() && m(p, col) == 0) ++p;
    if (p == m.rows()) continue;
    if (p != row)
      for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(p, j), m(row, j));
    const Rational inv = 1 / m(row, col);
    for (std::size_t j = 0; j < m.cols(); ++j) m(row, j) *= inv;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == row || m(i, col) == 0) continue;
      const Rational f = m(i, col);
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) -= f * m(row, j);
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

}  // namespace

std::vector<std::vector<Rational>> column_space_basis(const Matrix<Rational>& m) {
  Matrix<Rational> work = m;
  const auto pivots = rref(work, m.cols());
  std::vector<std::vector<Rational>> basis;
  for (std::size_t c : pivots) {
    std::vector<Rational> col(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) col[i] = m(i, c);
    basis.push_back(std::move(col));
  }
  return basis;
}

std::optional<std::vector<Rational>> solve_exact(const Matrix<Rational>& a,
                                                 const std::vector<Rational>& b) {
  Matrix<Rational> aug(a.rows(), a.cols() + 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) aug(i, j) = a(i, j);
    aug(i, a.cols()) = b.at(i);
  }
  const auto pivots = rref(aug, a.cols());
  for (std::size_t i = pivots.size(); i < a.rows(); ++i)
    if (aug(i, a.cols()) != 0) return std::nullopt;
  std::vector<Rational> x(a.cols(), Rational(0));
  for (std::size_t r = 0; r < pivots.size(); ++r) x[pivots[r]] = aug(r, a.cols());
  return x;
}

}  // namespace horolab
