#pragma once

// Finite quadratic forms q : A -> Q/2Z on finite abelian groups, presented
// by generator orders together with q on the generators and the bilinear
// values b on pairs of generators.  Covers the standard generators
// w(p,k,eps), u(k), v(k), direct sums, the Milgram signature mod 8 and
// brute-force isomorphism testing.

#include <k3lat/matrix.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

namespace k3lat {

namespace detail {

// reduce into [0, m)
inline Rat rat_mod(const Rat& x, long m) {
  Int num = boost::multiprecision::numerator(x);
  Int den = boost::multiprecision::denominator(x);
  Int q = num / (den * m);
  Rat r = x - Rat(q * m);
  while (r < 0) r += m;
  while (r >= m) r -= m;
  return r;
}

inline std::vector<std::pair<Int, unsigned>> factorize(Int n) {
  std::vector<std::pair<Int, unsigned>> out;
  for (Int p = 2; p * p <= n; ++p) {
    if (n % p != 0) continue;
    unsigned e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    out.emplace_back(p, e);
  }
  if (n > 1) out.emplace_back(n, 1);
  return out;
}

}  // namespace detail

class FiniteQuadraticForm {
 public:
  /// Trivial form on the trivial group.
  FiniteQuadraticForm() = default;

  /// orders[i] >= 2; mat is symmetric with diagonal q(e_i) and off-diagonal
  /// b(e_i, e_j).  Values are normalized into [0,2) resp. [0,1) and the
  /// well-definedness conditions are enforced.
  FiniteQuadraticForm(std::vector<Int> orders, RatMatrix mat)
      : orders_(std::move(orders)), mat_(std::move(mat)) {
    const std::size_t k = orders_.size();
    if (mat_.rows() != k || mat_.cols() != k)
      throw error("FiniteQuadraticForm: matrix size mismatch");
    for (std::size_t i = 0; i < k; ++i) {
      if (orders_[i] < 2) throw error("FiniteQuadraticForm: generator order < 2");
      mat_(i, i) = detail::rat_mod(mat_(i, i), 2);
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        Rat b = detail::rat_mod(mat_(i, j), 1);
        if (detail::rat_mod(mat_(j, i), 1) != b)
          throw error("FiniteQuadraticForm: matrix not symmetric");
        mat_(i, j) = b;
        // d_i * b(e_i, e_j) must vanish in Q/Z
        if (boost::multiprecision::denominator(Rat(b * orders_[i])) != 1)
          throw error("FiniteQuadraticForm: b value not compatible with order");
      }
      Rat q = mat_(i, i);
      if (boost::multiprecision::denominator(Rat(q * orders_[i])) != 1)
        throw error("FiniteQuadraticForm: q value not compatible with order");
      if (orders_[i] % 2 == 1) {
        Int num = boost::multiprecision::numerator(Rat(q * orders_[i]));
        if (num % 2 != 0)
          throw error("FiniteQuadraticForm: q on odd-order generator must be even/d");
      }
    }
  }

  static FiniteQuadraticForm trivial() { return FiniteQuadraticForm(); }

  /// w(p,k,eps).  For odd p the value q(1) = a / p^k where a is the smallest
  /// positive even integer with Legendre symbol (a|p) = eps.  For p = 2,
  /// q(1) = eps / 2^k with eps in {1,-1,5,-5}.
  static FiniteQuadraticForm omega(const Int& p, unsigned k, int eps) {
    if (k < 1) throw error("omega: k must be >= 1");
    if (p == 2) {
      if (eps != 1 && eps != -1 && eps != 5 && eps != -5)
        throw error("omega: for p = 2 eps must be one of +-1, +-5");
      Int pk = Int(1) << k;
      RatMatrix m(1, 1);
      m(0, 0) = Rat(eps, pk);
      return FiniteQuadraticForm({pk}, m);
    }
    if (p < 3 || !is_prime(p)) throw error("omega: p must be prime");
    if (eps != 1 && eps != -1) throw error("omega: for odd p eps must be +-1");
    Int a = 0;
    for (Int c = 2;; c += 2) {
      if (c % p == 0) continue;
      if (legendre(c, p) == eps) {
        a = c;
        break;
      }
      if (c > 4 * p) throw error("omega: no admissible residue found");
    }
    Int pk = 1;
    for (unsigned i = 0; i < k; ++i) pk *= p;
    RatMatrix m(1, 1);
    m(0, 0) = Rat(a, pk);
    return FiniteQuadraticForm({pk}, m);
  }

  static FiniteQuadraticForm u(unsigned k) {
    if (k < 1) throw error("u: k must be >= 1");
    Int pk = Int(1) << k;
    RatMatrix m(2, 2);
    m(0, 1) = m(1, 0) = Rat(1, pk);
    return FiniteQuadraticForm({pk, pk}, m);
  }

  static FiniteQuadraticForm v(unsigned k) {
    if (k < 1) throw error("v: k must be >= 1");
    Int pk = Int(1) << k;
    RatMatrix m(2, 2);
    m(0, 0) = m(1, 1) = Rat(2, pk);
    m(0, 1) = m(1, 0) = Rat(1, pk);
    return FiniteQuadraticForm({pk, pk}, m);
  }

  /// Grammar: sums of `w(p,k,eps)`, `u(k)`, `v(k)` joined with `+`.
  static FiniteQuadraticForm parse(const std::string& text);

  std::size_t generator_count() const { return orders_.size(); }
  const std::vector<Int>& generator_orders() const { return orders_; }
  Rat q_gen(std::size_t i) const { return mat_(i, i); }
  Rat b_gen(std::size_t i, std::size_t j) const {
    if (i == j) return detail::rat_mod(mat_(i, i), 1);
    return mat_(i, j);
  }

  Int order() const {
    Int n = 1;
    for (const Int& d : orders_) n *= d;
    return n;
  }

  /// Invariant factor decomposition, ascending divisibility chain.
  std::vector<Int> group_type() const {
    std::map<Int, std::vector<unsigned>> by_prime;
    for (const Int& d : orders_)
      for (auto& [p, e] : detail::factorize(d)) by_prime[p].push_back(e);
    std::size_t slots = 0;
    for (auto& [p, es] : by_prime) {
      std::sort(es.rbegin(), es.rend());
      slots = std::max(slots, es.size());
    }
    std::vector<Int> factors(slots, 1);
    for (auto& [p, es] : by_prime)
      for (std::size_t i = 0; i < es.size(); ++i) {
        Int pe = 1;
        for (unsigned t = 0; t < es[i]; ++t) pe *= p;
        factors[i] *= pe;
      }
    std::reverse(factors.begin(), factors.end());
    return factors;
  }

  /// Minimal number of generators of the group.
  std::size_t length() const { return group_type().size(); }

  /// q of an arbitrary element (coordinates over the generators), in [0,2).
  Rat q_of(const std::vector<Int>& x) const {
    Rat acc = 0;
    for (std::size_t i = 0; i < orders_.size(); ++i) {
      if (x[i] == 0) continue;
      acc += Rat(x[i] * x[i]) * mat_(i, i);
      for (std::size_t j = i + 1; j < orders_.size(); ++j)
        acc += Rat(2 * x[i] * x[j]) * mat_(i, j);
    }
    return detail::rat_mod(acc, 2);
  }

  /// Milgram signature: the s in 0..7 with
  ///   sum_x exp(pi i q(x)) = sqrt(|A|) exp(2 pi i s / 8).
  ///
  /// The sum is evaluated in double precision and snapped to the nearest of
  /// the eight candidates.  The answer set is discrete with spacing pi/4
  /// while the accumulated rounding error stays many orders of magnitude
  /// below that (phases themselves are exact rationals times pi); both the
  /// magnitude identity |S| = sqrt(|A|) and the snapping residual are
  /// checked and any violation throws instead of guessing.
  int signature_mod8() const {
    Int n = order();
    if (n > (Int(1) << 20)) throw error("signature_mod8: group too large");
    double re = 0, im = 0;
    enumerate([&](const std::vector<Int>& x) {
      double q = q_of(x).convert_to<double>();
      re += std::cos(M_PI * q);
      im += std::sin(M_PI * q);
    });
    double mag = std::hypot(re, im);
    double expect = std::sqrt(n.convert_to<double>());
    if (std::abs(mag - expect) > 1e-6 * std::max(1.0, expect))
      throw error("signature_mod8: Milgram magnitude check failed");
    double s_raw = std::atan2(im, re) * 4.0 / M_PI;
    long s = std::lround(s_raw);
    if (std::abs(s_raw - static_cast<double>(s)) > 1e-6)
      throw error("signature_mod8: phase did not snap to an eighth of a turn");
    return static_cast<int>(((s % 8) + 8) % 8);
  }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < orders_.size(); ++i) {
      if (i) s += ", ";
      s += "Z/" + orders_[i].str() + ": q=" + q_gen(i).str();
    }
    return s + "]";
  }

  /// Calls fn on every element of the group (coordinate vectors).
  template <typename Fn>
  void enumerate(Fn&& fn) const {
    std::vector<Int> x(orders_.size(), 0);
    for (;;) {
      fn(x);
      std::size_t i = 0;
      while (i < x.size()) {
        x[i] += 1;
        if (x[i] < orders_[i]) break;
        x[i] = 0;
        ++i;
      }
      if (i == x.size()) return;
    }
  }

  static int legendre(Int a, const Int& p) {
    // Euler's criterion
    a %= p;
    if (a < 0) a += p;
    if (a == 0) return 0;
    Int r = boost::multiprecision::powm(a, (p - 1) / 2, p);
    return r == 1 ? 1 : -1;
  }

  static bool is_prime(const Int& n) {
    if (n < 2) return false;
    for (Int d = 2; d * d <= n; ++d)
      if (n % d == 0) return false;
    return true;
  }

 private:
  std::vector<Int> orders_;
  RatMatrix mat_;
};

inline FiniteQuadraticForm direct_sum(const FiniteQuadraticForm& a,
                                      const FiniteQuadraticForm& b) {
  std::vector<Int> orders = a.generator_orders();
  orders.insert(orders.end(), b.generator_orders().begin(), b.generator_orders().end());
  const std::size_t ka = a.generator_count(), kb = b.generator_count();
  RatMatrix m(ka + kb, ka + kb);
  for (std::size_t i = 0; i < ka; ++i)
    for (std::size_t j = 0; j < ka; ++j)
      m(i, j) = (i == j) ? a.q_gen(i) : a.b_gen(i, j);
  for (std::size_t i = 0; i < kb; ++i)
    for (std::size_t j = 0; j < kb; ++j)
      m(ka + i, ka + j) = (i == j) ? b.q_gen(i) : b.b_gen(i, j);
  return FiniteQuadraticForm(std::move(orders), std::move(m));
}

namespace detail {

// Flat enumeration of a finite quadratic form's group with precomputed
// q values; used by the isomorphism search.
struct FormTable {
  std::vector<long> orders;
  long total = 1;
  std::vector<Rat> q;            // indexed by element id
  std::vector<long> elem_order;  // additive order of each element

  explicit FormTable(const FiniteQuadraticForm& f) {
    for (const Int& d : f.generator_orders()) {
      orders.push_back(d.convert_to<long>());
      total *= orders.back();
    }
    q.resize(total);
    elem_order.resize(total);
    std::vector<Int> x(orders.size(), 0);
    for (long id = 0; id < total; ++id) {
      q[id] = f.q_of(x);
      long o = 1;
      for (std::size_t i = 0; i < orders.size(); ++i) {
        long xi = x[i].convert_to<long>();
        long oi = orders[i] / std::gcd(orders[i], xi == 0 ? orders[i] : xi);
        o = std::lcm(o, oi);
      }
      elem_order[id] = o;
      // odometer
      std::size_t i = 0;
      while (i < x.size()) {
        x[i] += 1;
        if (x[i] < orders[i]) break;
        x[i] = 0;
        ++i;
      }
    }
  }

  long add(long a, long b) const {
    long r = 0, stride = 1;
    for (std::size_t i = 0; i < orders.size(); ++i) {
      long ai = (a / stride) % orders[i];
      long bi = (b / stride) % orders[i];
      r += ((ai + bi) % orders[i]) * stride;
      stride *= orders[i];
    }
    return r;
  }

  // b(x, y) = (q(x+y) - q(x) - q(y)) / 2 in Q/Z
  Rat b(long x, long y) const {
    Rat d = q[add(x, y)] - q[x] - q[y];
    return rat_mod(d / 2, 1);
  }

  // subgroup generated by gens, as a sorted vector of element ids
  std::vector<long> span(const std::vector<long>& gens) const {
    std::set<long> seen{0};
    std::vector<long> frontier{0};
    while (!frontier.empty()) {
      std::vector<long> next;
      for (long e : frontier)
        for (long g : gens) {
          long s = add(e, g);
          if (seen.insert(s).second) next.push_back(s);
        }
      frontier = std::move(next);
    }
    return std::vector<long>(seen.begin(), seen.end());
  }
};

inline bool iso_dfs(const FiniteQuadraticForm& A, const FormTable& ta,
                    const FormTable& tb, std::vector<long>& images,
                    std::size_t level) {
  if (level == ta.orders.size()) return true;
  const long dk = ta.orders[level];
  Rat target_q = A.q_gen(level);
  long want_size = 1;
  for (std::size_t i = 0; i <= level; ++i) want_size *= ta.orders[i];
  for (long z = 0; z < tb.total; ++z) {
    if (dk % tb.elem_order[z] != 0) continue;  // need d_k * z = 0
    if (tb.q[z] != target_q) continue;
    bool ok = true;
    for (std::size_t j = 0; j < level && ok; ++j)
      ok = tb.b(z, images[j]) == rat_mod(A.b_gen(level, j), 1);
    if (!ok) continue;
    images.push_back(z);
    if (static_cast<long>(tb.span(images).size()) == want_size &&
        iso_dfs(A, ta, tb, images, level + 1))
      return true;
    images.pop_back();
  }
  return false;
}

}  // namespace detail

/// True iff some group isomorphism carries q1 to q2.  Exhaustive search over
/// generator images, pruned by (order, invariant factors, q-value multiset)
/// and by partial-subgroup sizes.
inline bool is_isomorphic(const FiniteQuadraticForm& q1,
                          const FiniteQuadraticForm& q2) {
  if (q1.order() > (Int(1) << 10) || q2.order() > (Int(1) << 10))
    throw error("is_isomorphic: group order exceeds 2^10");
  if (q1.order() != q2.order()) return false;
  if (q1.group_type() != q2.group_type()) return false;
  detail::FormTable ta(q1), tb(q2);
  {
    std::multiset<Rat> ma(ta.q.begin(), ta.q.end()), mb(tb.q.begin(), tb.q.end());
    if (ma != mb) return false;
  }
  std::vector<long> images;
  return detail::iso_dfs(q1, ta, tb, images, 0);
}

inline FiniteQuadraticForm FiniteQuadraticForm::parse(const std::string& text) {
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
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == start || (pos == start + 1 && !std::isdigit(static_cast<unsigned char>(text[start]))))
      throw parse_error("expected integer", start);
    return std::stol(text.substr(start, pos - start));
  };

  FiniteQuadraticForm acc;
  bool first = true;
  for (;;) {
    if (!first) expect('+');
    first = false;
    skip_ws();
    if (pos >= text.size()) throw parse_error("expected form symbol", pos);
    char c = text[pos];
    FiniteQuadraticForm piece;
    if (c == 'w') {
      ++pos;
      expect('(');
      long p = parse_int();
      expect(',');
      long k = parse_int();
      expect(',');
      long eps = parse_int();
      expect(')');
      if (k < 1) throw parse_error("w: k must be >= 1", pos);
      piece = omega(Int(p), static_cast<unsigned>(k), static_cast<int>(eps));
    } else if (c == 'u' || c == 'v') {
      ++pos;
      expect('(');
      long k = parse_int();
      expect(')');
      if (k < 1) throw parse_error("u/v: k must be >= 1", pos);
      piece = (c == 'u') ? u(static_cast<unsigned>(k)) : v(static_cast<unsigned>(k));
    } else {
      throw parse_error("unknown form symbol", pos);
    }
    acc = direct_sum(acc, piece);
    skip_ws();
    if (pos >= text.size()) break;
  }
  return acc;
}

}  // namespace k3lat
