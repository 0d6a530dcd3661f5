#pragma once

// Even integral lattices presented by Gram matrices: constructors for the
// named lattices (root lattices, U, <n>, T_{p,q,r}), exact signatures,
// discriminant forms and identification through Nikulin's uniqueness
// criterion.
//
// Sign convention: root lattices are negative definite (Gram = -Cartan),
// U has Gram [[0,1],[1,0]] and <n> is the rank-1 lattice [[n]].

#include <k3lat/fqf.hpp>
#include <k3lat/matrix.hpp>
#include <k3lat/smith.hpp>

#include <optional>
#include <utility>

namespace k3lat {

class Lattice {
 public:
  /// Build from a symmetric Gram matrix with even diagonal.  A degenerate
  /// matrix is quotiented by its radical; the quotient map (original
  /// coordinates -> quotient coordinates, applied as row * map) is recorded.
  static Lattice from_gram(const IntMatrix& G) {
    if (!G.is_symmetric()) throw error("from_gram: matrix not symmetric");
    for (std::size_t i = 0; i < G.rows(); ++i)
      if (G(i, i) % 2 != 0) throw error("from_gram: odd diagonal entry");

    IntMatrix radical = saturated_kernel(G);
    if (radical.rows() == 0) return Lattice(G, IntMatrix(), G.rows());

    // complete the radical to a basis of Z^n and keep the complement
    const std::size_t n = G.rows(), k = radical.rows();
    SmithDecomposition d = smith_normal_form(radical);
    IntMatrix vinv = rational_inverse(d.V).to_int();
    IntMatrix comp(n - k, n);  // rows: complement basis
    for (std::size_t i = k; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) comp(i - k, j) = vinv(i, j);
    IntMatrix induced = comp * G * comp.transpose();
    IntMatrix qmap(n, n - k);  // quotient coordinates of x are x * qmap
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = k; j < n; ++j) qmap(i, j - k) = d.V(i, j);
    return Lattice(induced, qmap, n);
  }

  std::size_t rank() const { return gram_.rows(); }
  const IntMatrix& gram() const { return gram_; }
  const Int& det() const { return det_; }
  std::pair<int, int> signature() const { return {t_plus_, t_minus_}; }

  bool had_radical() const { return quotient_map_.rows() != 0; }
  /// Only meaningful after a radical quotient.
  const IntMatrix& quotient_map() const { return quotient_map_; }
  std::size_t original_rank() const { return original_rank_; }

  /// Discriminant quadratic form on A_L = L^dual / L.
  FiniteQuadraticForm discriminant_form() const {
    SmithDecomposition d = smith_normal_form(gram_);
    const std::size_t n = rank();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (d.S(i, i) > 1) idx.push_back(i);
    // generator i is (column i of V) / s_i in lattice coordinates
    std::vector<Int> orders;
    RatMatrix m(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) {
      orders.push_back(d.S(idx[a], idx[a]));
      for (std::size_t b = a; b < idx.size(); ++b) {
        Int pairing = 0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            pairing += d.V(i, idx[a]) * gram_(i, j) * d.V(j, idx[b]);
        Rat value = Rat(pairing) / Rat(d.S(idx[a], idx[a]) * d.S(idx[b], idx[b]));
        if (a == b) {
          m(a, a) = detail::rat_mod(value, 2);
        } else {
          m(a, b) = m(b, a) = detail::rat_mod(value, 1);
        }
      }
    }
    return FiniteQuadraticForm(std::move(orders), std::move(m));
  }

 private:
  Lattice(IntMatrix gram, IntMatrix qmap, std::size_t orig)
      : gram_(std::move(gram)), quotient_map_(std::move(qmap)), original_rank_(orig) {
    det_ = determinant(gram_);
    if (gram_.rows() > 0 && det_ == 0)
      throw error("Lattice: degenerate after radical quotient");
    sylvester();
  }

  // exact symmetric diagonalization; counts of positive/negative pivots
  void sylvester() {
    RatMatrix w(gram_);
    const std::size_t n = w.rows();
    t_plus_ = t_minus_ = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (w(i, i) == 0) {
        std::size_t j = i + 1;
        while (j < n && w(i, j) == 0) ++j;
        if (j == n) throw error("Lattice: unexpected degeneracy in signature");
        // lambda = 1 gives diagonal 2 w(i,j) + w(j,j); fall back to 2
        Rat lam = (2 * w(i, j) + w(j, j) != 0) ? Rat(1) : Rat(2);
        for (std::size_t c = 0; c < n; ++c) w(i, c) += lam * w(j, c);
        for (std::size_t r = 0; r < n; ++r) w(r, i) += lam * w(r, j);
      }
      Rat p = w(i, i);
      if (p > 0)
        ++t_plus_;
      else
        ++t_minus_;
      for (std::size_t r = i + 1; r < n; ++r) {
        if (w(r, i) == 0) continue;
        Rat f = w(r, i) / p;
        for (std::size_t c = 0; c < n; ++c) w(r, c) -= f * w(i, c);
        for (std::size_t c = 0; c < n; ++c) w(c, r) -= f * w(c, i);
      }
    }
  }

  IntMatrix gram_;
  IntMatrix quotient_map_;
  std::size_t original_rank_;
  int t_plus_ = 0, t_minus_ = 0;
  Int det_;
};

inline Lattice direct_sum(const Lattice& a, const Lattice& b) {
  const std::size_t na = a.rank(), nb = b.rank();
  IntMatrix g(na + nb, na + nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j) g(i, j) = a.gram()(i, j);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < nb; ++j) g(na + i, na + j) = b.gram()(i, j);
  return Lattice::from_gram(g);
}

namespace detail {

// T-shaped graph: center, then the three legs in argument order; leg
// lengths count the center, so the rank is p+q+r-2.
inline IntMatrix gram_T(int p, int q, int r) {
  if (p < 2 || q < 2 || r < 2) throw error("T(p,q,r): every leg must be >= 2");
  const std::size_t n = static_cast<std::size_t>(p + q + r - 2);
  IntMatrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) g(i, i) = -2;
  std::size_t next = 1;
  for (int leg : {p, q, r}) {
    std::size_t prev = 0;  // center
    for (int s = 1; s < leg; ++s) {
      g(prev, next) = g(next, prev) = 1;
      prev = next++;
    }
  }
  return g;
}

inline IntMatrix gram_A(int n) {
  if (n < 1) throw error("A_n: n must be >= 1");
  IntMatrix g(n, n);
  for (int i = 0; i < n; ++i) {
    g(i, i) = -2;
    if (i + 1 < n) g(i, i + 1) = g(i + 1, i) = 1;
  }
  return g;
}

inline IntMatrix gram_D(int n) {
  if (n < 4) throw error("D_n: n must be >= 4");
  IntMatrix g(n, n);
  for (int i = 0; i < n; ++i) g(i, i) = -2;
  for (int i = 0; i + 1 < n - 1; ++i) g(i, i + 1) = g(i + 1, i) = 1;
  g(n - 3, n - 1) = g(n - 1, n - 3) = 1;  // fork at the end of the path
  return g;
}

inline IntMatrix gram_E(int n) {
  switch (n) {
    case 6: return gram_T(2, 3, 3);
    case 7: return gram_T(2, 3, 4);
    case 8: return gram_T(2, 3, 5);
    default: throw error("E_n: n must be 6, 7 or 8");
  }
}

inline IntMatrix scale_gram(IntMatrix g, const Int& k) {
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) *= k;
  return g;
}

}  // namespace detail

/// Grammar:  Expr := Term ("+" Term)*
///           Term := "U" ["(" int ")"]
///                 | ("A"|"D"|"E") int ["(" int ")"]
///                 | "<" int ">"
///                 | "T(" int "," int "," int ")"
/// ASCII, whitespace-insensitive, decimal integers; negatives are allowed
/// inside <> and inside scale parentheses.
inline Lattice parse_lattice_expr(const std::string& text) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto expect = [&](char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c)
      throw parse_error(std::string("expected '") + c + "'", pos);
    ++pos;
  };
  auto parse_int = [&]() -> long {
    skip_ws();
    std::size_t start = pos;
    if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
    std::size_t digits = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == digits) throw parse_error("expected integer", start);
    return std::stol(text.substr(start, pos - start));
  };
  auto parse_scale = [&]() -> Int {
    skip_ws();
    if (pos < text.size() && text[pos] == '(') {
      ++pos;
      long k = parse_int();
      expect(')');
      if (k == 0) throw parse_error("scale factor must be nonzero", pos);
      return Int(k);
    }
    return Int(1);
  };

  std::vector<IntMatrix> blocks;
  for (;;) {
    skip_ws();
    if (pos >= text.size()) throw parse_error("expected lattice term", pos);
    char c = text[pos];
    if (c == 'U') {
      ++pos;
      IntMatrix g(2, 2);
      Int k = parse_scale();
      g(0, 1) = g(1, 0) = k;
      blocks.push_back(g);
    } else if (c == 'A' || c == 'D' || c == 'E') {
      ++pos;
      long n = parse_int();
      if (n < 0) throw parse_error("negative rank", pos);
      IntMatrix g = (c == 'A')   ? detail::gram_A(static_cast<int>(n))
                    : (c == 'D') ? detail::gram_D(static_cast<int>(n))
                                 : detail::gram_E(static_cast<int>(n));
      blocks.push_back(detail::scale_gram(std::move(g), parse_scale()));
    } else if (c == 'T') {
      ++pos;
      expect('(');
      long p = parse_int();
      expect(',');
      long q = parse_int();
      expect(',');
      long r = parse_int();
      expect(')');
      blocks.push_back(detail::gram_T(static_cast<int>(p), static_cast<int>(q),
                                      static_cast<int>(r)));
    } else if (c == '<') {
      ++pos;
      long n = parse_int();
      expect('>');
      if (n % 2 != 0) throw parse_error("<n>: n must be even", pos);
      if (n == 0) throw parse_error("<0> is degenerate", pos);
      IntMatrix g(1, 1);
      g(0, 0) = n;
      blocks.push_back(g);
    } else {
      throw parse_error("unknown lattice term", pos);
    }
    skip_ws();
    if (pos >= text.size()) break;
    expect('+');
  }

  std::size_t total = 0;
  for (const IntMatrix& b : blocks) total += b.rows();
  IntMatrix g(total, total);
  std::size_t off = 0;
  for (const IntMatrix& b : blocks) {
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) g(off + i, off + j) = b(i, j);
    off += b.rows();
  }
  return Lattice::from_gram(g);
}

/// Nikulin: an even lattice with invariants (t+, t-, q) exists and is unique
/// if t+ - t- = sign(q) mod 8, t+ + t- >= 2 + l(A_q) and t+, t- >= 1.
inline bool nikulin_unique(int t_plus, int t_minus, const FiniteQuadraticForm& q) {
  if (t_plus < 1 || t_minus < 1) return false;
  if (static_cast<std::size_t>(t_plus + t_minus) < 2 + q.length()) return false;
  int diff = ((t_plus - t_minus) % 8 + 8) % 8;
  return diff == q.signature_mod8();
}

/// Returns the unique candidate matching L in rank, signature and
/// discriminant form, provided Nikulin's hypotheses justify uniqueness.
/// No isometry search is implemented, so a match without the uniqueness
/// guarantee is an error rather than an answer.
inline std::optional<std::string> identify(const Lattice& L,
                                           const std::vector<std::string>& candidates) {
  FiniteQuadraticForm disc = L.discriminant_form();
  std::optional<std::string> found;
  std::optional<Lattice> found_lattice;
  for (const std::string& name : candidates) {
    Lattice C = parse_lattice_expr(name);
    if (C.rank() != L.rank()) continue;
    if (C.signature() != L.signature()) continue;
    if (!is_isomorphic(disc, C.discriminant_form())) continue;
    if (found) throw error("identify: ambiguous candidates '" + *found + "' and '" + name + "'");
    found = name;
    found_lattice = C;
  }
  if (!found) return std::nullopt;
  auto [tp, tm] = L.signature();
  if (!nikulin_unique(tp, tm, found_lattice->discriminant_form()))
    throw error("identify: invariants match '" + *found +
                "' but Nikulin uniqueness does not apply");
  return found;
}

/// True iff the rows span a primitive sublattice (torsion-free quotient):
/// every nonzero elementary divisor of the row matrix is 1.
inline bool is_primitive_sublattice(const Lattice& ambient, const IntMatrix& rows) {
  if (rows.cols() != ambient.rank())
    throw error("is_primitive_sublattice: vectors do not live in the ambient lattice");
  SmithDecomposition d = smith_normal_form(rows);
  std::size_t n = std::min(d.S.rows(), d.S.cols());
  for (std::size_t i = 0; i < n; ++i)
    if (d.S(i, i) > 1) return false;
  return true;
}

}  // namespace k3lat
