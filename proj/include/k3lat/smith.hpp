#pragma once

// Smith normal form and the integer linear algebra built on top of it.
// One audited kernel answers every integrality question in the library:
// integer_solve, saturated kernels and discriminant groups all reduce to
// the same decomposition.

#include <k3lat/matrix.hpp>

#include <optional>

namespace k3lat {

/// U * A * V = S with U, V unimodular and S = diag(d1, d2, ...),
/// d_i >= 0 and d1 | d2 | ... .
struct SmithDecomposition {
  IntMatrix U, S, V;

  std::size_t rank() const {
    std::size_t r = 0;
    std::size_t n = S.rows() < S.cols() ? S.rows() : S.cols();
    for (std::size_t i = 0; i < n; ++i)
      if (S(i, i) != 0) ++r;
    return r;
  }
};

namespace detail {

inline void swap_rows(IntMatrix& m, std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(a, j), m(b, j));
}

inline void swap_cols(IntMatrix& m, std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t i = 0; i < m.rows(); ++i) std::swap(m(i, a), m(i, b));
}

// row[a] -= q * row[b]
inline void add_row(IntMatrix& m, std::size_t a, std::size_t b, const Int& q) {
  if (q == 0) return;
  for (std::size_t j = 0; j < m.cols(); ++j) m(a, j) -= q * m(b, j);
}

inline void add_col(IntMatrix& m, std::size_t a, std::size_t b, const Int& q) {
  if (q == 0) return;
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, a) -= q * m(i, b);
}

}  // namespace detail

/// Smith normal form. Pivot choice is the smallest nonzero absolute value,
/// ties broken by lowest row then column index, so U and V are reproducible
/// across runs and platforms.
inline SmithDecomposition smith_normal_form(const IntMatrix& A) {
  const std::size_t m = A.rows(), n = A.cols();
  SmithDecomposition d;
  d.S = A;
  d.U = IntMatrix::identity(m);
  d.V = IntMatrix::identity(n);
  IntMatrix& S = d.S;

  const std::size_t steps = m < n ? m : n;
  for (std::size_t k = 0; k < steps; ++k) {
    // locate pivot in the trailing submatrix
    bool found = false;
    std::size_t pi = 0, pj = 0;
    Int best;
    for (std::size_t i = k; i < m; ++i)
      for (std::size_t j = k; j < n; ++j) {
        if (S(i, j) == 0) continue;
        Int a = int_abs(S(i, j));
        if (!found || a < best) {
          found = true;
          best = a;
          pi = i;
          pj = j;
        }
      }
    if (!found) break;  // trailing block is zero

    detail::swap_rows(S, k, pi);
    detail::swap_rows(d.U, k, pi);
    detail::swap_cols(S, k, pj);
    detail::swap_cols(d.V, k, pj);

    for (;;) {
      // clear column k below the pivot
      bool dirty = false;
      for (std::size_t i = k + 1; i < m; ++i) {
        if (S(i, k) == 0) continue;
        Int q = S(i, k) / S(k, k);
        detail::add_row(S, i, k, q);
        detail::add_row(d.U, i, k, q);
        if (S(i, k) != 0) {
          // remainder is a strictly smaller pivot candidate
          detail::swap_rows(S, k, i);
          detail::swap_rows(d.U, k, i);
          dirty = true;
        }
      }
      if (dirty) continue;
      for (std::size_t j = k + 1; j < n; ++j) {
        if (S(k, j) == 0) continue;
        Int q = S(k, j) / S(k, k);
        detail::add_col(S, j, k, q);
        detail::add_col(d.V, j, k, q);
        if (S(k, j) != 0) {
          detail::swap_cols(S, k, j);
          detail::swap_cols(d.V, k, j);
          dirty = true;
        }
      }
      if (dirty) continue;

      // pivot must divide the whole trailing block for the divisor chain
      bool divides = true;
      for (std::size_t i = k + 1; i < m && divides; ++i)
        for (std::size_t j = k + 1; j < n && divides; ++j)
          if (S(i, j) % S(k, k) != 0) {
            detail::add_row(S, k, i, Int(-1));  // fold row i into row k
            detail::add_row(d.U, k, i, Int(-1));
            divides = false;
          }
      if (divides) break;
    }
  }

  // normalize signs on the diagonal
  for (std::size_t k = 0; k < steps; ++k) {
    if (S(k, k) < 0) {
      for (std::size_t j = 0; j < n; ++j) S(k, j) = -S(k, j);
      for (std::size_t j = 0; j < m; ++j) d.U(k, j) = -d.U(k, j);
    }
  }
  return d;
}

/// Exact inverse over the rationals. Throws singular_matrix_error when
/// det A = 0.
inline RatMatrix rational_inverse(const IntMatrix& A) {
  if (A.rows() != A.cols()) throw error("rational_inverse: matrix not square");
  const std::size_t n = A.rows();
  RatMatrix work(A);
  RatMatrix inv = RatMatrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && work(piv, col) == 0) ++piv;
    if (piv == n) throw singular_matrix_error("rational_inverse: singular matrix");
    if (piv != col)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(work(piv, j), work(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    Rat p = work(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      work(col, j) /= p;
      inv(col, j) /= p;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col || work(i, col) == 0) continue;
      Rat f = work(i, col);
      for (std::size_t j = 0; j < n; ++j) {
        work(i, j) -= f * work(col, j);
        inv(i, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

/// Some integer solution of A x = b, or nothing when none exists.
/// Deterministic: free coordinates are set to zero in the Smith basis.
inline std::optional<std::vector<Int>> integer_solve(const IntMatrix& A,
                                                     const std::vector<Int>& b) {
  if (b.size() != A.rows()) throw error("integer_solve: dimension mismatch");
  SmithDecomposition d = smith_normal_form(A);
  std::vector<Int> c = d.U.apply(b);
  const std::size_t n = A.cols();
  const std::size_t steps = A.rows() < n ? A.rows() : n;
  std::vector<Int> y(n);
  for (std::size_t i = 0; i < c.size(); ++i) {
    Int s = (i < steps) ? d.S(i, i) : Int(0);
    if (s == 0) {
      if (c[i] != 0) return std::nullopt;
    } else {
      if (c[i] % s != 0) return std::nullopt;
      y[i] = c[i] / s;
    }
  }
  return d.V.apply(y);
}

/// Basis (as rows) of the saturated kernel { x in Z^n : A x = 0 }.
/// The columns of V beyond the rank extend to a basis of Z^n, so the
/// result is automatically saturated.
inline IntMatrix saturated_kernel(const IntMatrix& A) {
  SmithDecomposition d = smith_normal_form(A);
  const std::size_t n = A.cols();
  const std::size_t r = d.rank();
  IntMatrix basis(n - r, n);
  for (std::size_t k = r; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) basis(k - r, i) = d.V(i, k);
  return basis;
}

/// Exact determinant by fraction-free elimination (Bareiss).
inline Int determinant(const IntMatrix& A) {
  if (A.rows() != A.cols()) throw error("determinant: matrix not square");
  const std::size_t n = A.rows();
  if (n == 0) return 1;
  IntMatrix w = A;
  Int prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (w(k, k) == 0) {
      std::size_t s = k + 1;
      while (s < n && w(s, k) == 0) ++s;
      if (s == n) return 0;
      detail::swap_rows(w, k, s);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j)
        w(i, j) = (w(i, j) * w(k, k) - w(i, k) * w(k, j)) / prev;
    prev = w(k, k);
  }
  return sign > 0 ? w(n - 1, n - 1) : Int(-w(n - 1, n - 1));
}

}  // namespace k3lat
