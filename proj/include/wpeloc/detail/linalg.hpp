#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace wpeloc::detail {

// Solve A x = b for Hermitian positive definite A (row-major k x k) by Cholesky.
// A is destroyed. Diagonal loading is the caller's job; a tiny clamp on the
// pivot keeps sqrt well-defined under rounding.
inline std::vector<std::complex<double>> hermitian_solve(std::vector<std::complex<double>>& A,
                                                         const std::vector<std::complex<double>>& b,
                                                         std::size_t k) {
  if (A.size() != k * k || b.size() != k) throw std::invalid_argument("hermitian_solve: bad sizes");
  // lower-triangular factor written over A
  for (std::size_t j = 0; j < k; ++j) {
    double d = A[j * k + j].real();
    for (std::size_t p = 0; p < j; ++p) d -= std::norm(A[j * k + p]);
    if (d < 1e-300) d = 1e-300;
    const double ljj = std::sqrt(d);
    A[j * k + j] = ljj;
    for (std::size_t i = j + 1; i < k; ++i) {
      std::complex<double> s = A[i * k + j];
      for (std::size_t p = 0; p < j; ++p) s -= A[i * k + p] * std::conj(A[j * k + p]);
      A[i * k + j] = s / ljj;
    }
  }
  // forward solve L y = b
  std::vector<std::complex<double>> x(b);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t p = 0; p < i; ++p) x[i] -= A[i * k + p] * x[p];
    x[i] /= A[i * k + i].real();
  }
  // backward solve L^H x = y
  for (std::size_t ii = k; ii-- > 0;) {
    for (std::size_t p = ii + 1; p < k; ++p) x[ii] -= std::conj(A[p * k + ii]) * x[p];
    x[ii] /= A[ii * k + ii].real();
  }
  return x;
}

// Maximum-weight one-to-one assignment on a (possibly rectangular) nonnegative
// weight matrix, exact via subset DP. Returns for each row the assigned column
// or -1. Sized for speaker-mapping problems, not general use.
inline std::vector<int> max_assignment(const std::vector<std::vector<double>>& w) {
  const std::size_t nr = w.size();
  const std::size_t nc = nr ? w[0].size() : 0;
  if (nr == 0 || nc == 0) return std::vector<int>(nr, -1);
  if (nc > 20) throw std::invalid_argument("max_assignment: too many columns");

  const std::size_t masks = std::size_t{1} << nc;
  const double neg = -1.0;
  // best[i][mask]: max weight assigning rows [0,i) using column set 'mask' (unused rows allowed)
  std::vector<double> prev(masks, neg), cur(masks, neg);
  std::vector<std::vector<int>> choice(nr, std::vector<int>(masks, -2));
  prev[0] = 0.0;
  for (std::size_t i = 0; i < nr; ++i) {
    std::fill(cur.begin(), cur.end(), neg);
    for (std::size_t m = 0; m < masks; ++m) {
      if (prev[m] < 0.0) continue;
      // row i unassigned
      if (prev[m] > cur[m]) {
        cur[m] = prev[m];
        choice[i][m] = -1;
      }
      for (std::size_t c = 0; c < nc; ++c) {
        if (m & (std::size_t{1} << c)) continue;
        const std::size_t m2 = m | (std::size_t{1} << c);
        const double v = prev[m] + w[i][c];
        if (v > cur[m2]) {
          cur[m2] = v;
          choice[i][m2] = static_cast<int>(c);
        }
      }
    }
    prev.swap(cur);
  }
  std::size_t best_mask = 0;
  for (std::size_t m = 1; m < masks; ++m)
    if (prev[m] > prev[best_mask]) best_mask = m;
  // trace back
  std::vector<int> assign(nr, -1);
  std::size_t m = best_mask;
  for (std::size_t ii = nr; ii-- > 0;) {
    const int c = choice[ii][m];
    if (c >= 0) {
      assign[ii] = c;
      m &= ~(std::size_t{1} << c);
    }
  }
  return assign;
}

}  // namespace wpeloc::detail
