#pragma once

// Rational-curve configurations as weighted incidence graphs: spans,
// redundancy, divisibility, automorphism-induced isometries and invariant
// sublattices.  Configurations are loaded from JSON transcriptions of the
// incidence figures and are immutable afterwards.

#include <k3lat/lattice.hpp>
#include <k3lat/matrix.hpp>
#include <k3lat/smith.hpp>

#include <json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace k3lat {

/// Finitely supported integer combination of curves.
class DivisorClass {
 public:
  DivisorClass() = default;

  static DivisorClass of_curve(const std::string& id) {
    DivisorClass c;
    c.coeff_[id] = 1;
    return c;
  }

  DivisorClass& add(const std::string& id, const Int& c) {
    coeff_[id] += c;
    if (coeff_[id] == 0) coeff_.erase(id);
    return *this;
  }

  DivisorClass operator+(const DivisorClass& o) const {
    DivisorClass r = *this;
    for (const auto& [id, c] : o.coeff_) r.add(id, c);
    return r;
  }

  const std::map<std::string, Int>& coefficients() const { return coeff_; }

  /// Parses "3*E0+2*E1-1*S0": integer coefficients with explicit '*'.
  static DivisorClass parse(const std::string& text) {
    DivisorClass out;
    std::size_t pos = 0;
    auto skip_ws = [&] {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    skip_ws();
    bool first = true;
    while (pos < text.size()) {
      int sign = 1;
      if (text[pos] == '+' || text[pos] == '-') {
        sign = text[pos] == '-' ? -1 : 1;
        ++pos;
      } else if (!first) {
        throw parse_error("expected '+' or '-'", pos);
      }
      skip_ws();
      std::size_t start = pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      if (pos == start) throw parse_error("expected coefficient", pos);
      Int c(text.substr(start, pos - start));
      skip_ws();
      if (pos >= text.size() || text[pos] != '*')
        throw parse_error("expected '*'", pos);
      ++pos;
      skip_ws();
      start = pos;
      while (pos < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
        ++pos;
      if (pos == start) throw parse_error("expected curve id", pos);
      out.add(text.substr(start, pos - start), sign > 0 ? c : Int(-c));
      skip_ws();
      first = false;
    }
    return out;
  }

  std::string to_string() const {
    std::string s;
    for (const auto& [id, c] : coeff_) {
      if (!s.empty()) s += c >= 0 ? "+" : "";
      s += c.str() + "*" + id;
    }
    return s.empty() ? "0" : s;
  }

 private:
  std::map<std::string, Int> coeff_;
};

/// Permutation of curve ids; fixed points may be omitted in the input.
class CurveAutomorphism {
 public:
  CurveAutomorphism() = default;
  CurveAutomorphism(std::string name, std::map<std::string, std::string> map, int order)
      : name_(std::move(name)), map_(std::move(map)), order_(order) {}

  const std::string& name() const { return name_; }
  int order() const { return order_; }

  const std::string& image(const std::string& id) const {
    auto it = map_.find(id);
    return it == map_.end() ? id : it->second;
  }

  /// g^e as a permutation; the declared order is recomputed.
  CurveAutomorphism power(unsigned e) const {
    std::map<std::string, std::string> pow;
    for (const auto& [id, _] : map_) {
      std::string cur = id;
      for (unsigned i = 0; i < e; ++i) cur = image(cur);
      if (cur != id) pow[id] = cur;
    }
    int ord = order_ / std::gcd(order_, static_cast<int>(e % order_ == 0 ? order_ : e % order_));
    return CurveAutomorphism(name_ + "^" + std::to_string(e), std::move(pow), ord);
  }

 private:
  std::string name_;
  std::map<std::string, std::string> map_;
  int order_ = 1;
};

/// Weighted incidence graph of rational curves.  Curve order is file order
/// and every operation below is deterministic with respect to it.
class CurveConfig {
 public:
  static CurveConfig load(const nlohmann::json& doc) {
    CurveConfig cfg;
    if (!doc.contains("name") || !doc.contains("curves") || !doc.contains("edges"))
      throw error("config: missing required field (name/curves/edges)");
    cfg.name_ = doc.at("name").get<std::string>();
    if (doc.contains("figure")) cfg.figure_ = doc.at("figure").get<std::string>();

    for (const auto& c : doc.at("curves")) {
      std::string id = c.at("id").get<std::string>();
      long self = c.contains("self") ? c.at("self").get<long>() : -2;
      if (self % 2 != 0) throw error("config: odd self-intersection on '" + id + "'");
      if (cfg.index_.count(id)) throw error("config: duplicate curve id '" + id + "'");
      cfg.index_[id] = cfg.ids_.size();
      cfg.ids_.push_back(id);
      cfg.self_.push_back(Int(self));
    }

    const std::size_t n = cfg.ids_.size();
    cfg.gram_ = IntMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i) cfg.gram_(i, i) = cfg.self_[i];
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 3) throw error("config: malformed edge");
      std::size_t a = cfg.index_of(e.at(0).get<std::string>());
      std::size_t b = cfg.index_of(e.at(1).get<std::string>());
      long m = e.at(2).get<long>();
      if (a == b) throw error("config: self-edge on '" + cfg.ids_[a] + "'");
      if (m < 1) throw error("config: edge multiplicity must be positive");
      auto key = std::minmax(a, b);
      if (!seen.insert(key).second)
        throw error("config: duplicate edge " + cfg.ids_[a] + "," + cfg.ids_[b]);
      cfg.gram_(a, b) = cfg.gram_(b, a) = m;
    }

    if (doc.contains("basis"))
      for (const auto& b : doc.at("basis")) {
        std::string id = b.get<std::string>();
        cfg.index_of(id);  // must exist
        cfg.basis_.push_back(id);
      }

    if (doc.contains("automorphisms"))
      for (const auto& [aname, spec] : doc.at("automorphisms").items()) {
        std::map<std::string, std::string> map;
        for (const auto& [from, to] : spec.at("map").items()) {
          cfg.index_of(from);
          cfg.index_of(to.get<std::string>());
          map[from] = to.get<std::string>();
        }
        int declared = spec.at("order").get<int>();
        CurveAutomorphism g(aname, std::move(map), declared);
        cfg.validate_automorphism(g, declared);
        cfg.autos_.emplace(aname, std::move(g));
      }
    return cfg;
  }

  static CurveConfig load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("config: cannot open '" + path + "'");
    nlohmann::json doc;
    in >> doc;
    return load(doc);
  }

  const std::string& name() const { return name_; }
  const std::string& figure() const { return figure_; }
  const std::vector<std::string>& curve_ids() const { return ids_; }
  const std::vector<std::string>& declared_basis() const { return basis_; }
  const IntMatrix& full_gram() const { return gram_; }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw error("config: unknown curve id '" + id + "'");
    return it->second;
  }

  const CurveAutomorphism& automorphism(const std::string& aname) const {
    auto it = autos_.find(aname);
    if (it == autos_.end()) throw error("config: unknown automorphism '" + aname + "'");
    return it->second;
  }

  std::vector<std::string> automorphism_names() const {
    std::vector<std::string> names;
    for (const auto& [k, _] : autos_) names.push_back(k);
    return names;
  }

  std::vector<Int> vector_of(const DivisorClass& c) const {
    std::vector<Int> v(ids_.size());
    for (const auto& [id, coeff] : c.coefficients()) v[index_of(id)] = coeff;
    return v;
  }

  /// Intersection pairing extended bilinearly to divisor classes.
  Int pair(const DivisorClass& a, const DivisorClass& b) const {
    std::vector<Int> va = vector_of(a), vb = vector_of(b);
    Int acc = 0;
    for (std::size_t i = 0; i < va.size(); ++i) {
      if (va[i] == 0) continue;
      for (std::size_t j = 0; j < vb.size(); ++j)
        if (vb[j] != 0) acc += va[i] * gram_(i, j) * vb[j];
    }
    return acc;
  }

 private:
  void validate_automorphism(const CurveAutomorphism& g, int declared) const {
    const std::size_t n = ids_.size();
    std::vector<std::size_t> perm(n);
    std::set<std::size_t> hit;
    for (std::size_t i = 0; i < n; ++i) {
      perm[i] = index_of(g.image(ids_[i]));
      if (!hit.insert(perm[i]).second)
        throw error("config: permutation '" + g.name() + "' is not bijective");
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (gram_(perm[i], perm[j]) != gram_(i, j))
          throw error("config: permutation '" + g.name() +
                      "' does not preserve the intersection form");
    // actual order of the permutation
    int ord = 1;
    std::vector<std::size_t> cur = perm;
    auto is_id = [&](const std::vector<std::size_t>& p) {
      for (std::size_t i = 0; i < n; ++i)
        if (p[i] != i) return false;
      return true;
    };
    while (!is_id(cur)) {
      std::vector<std::size_t> next(n);
      for (std::size_t i = 0; i < n; ++i) next[i] = perm[cur[i]];
      cur = std::move(next);
      ++ord;
      if (ord > static_cast<int>(n) + 1) throw error("config: runaway permutation order");
    }
    if (ord != declared)
      throw error("config: declared order of '" + g.name() + "' is " +
                  std::to_string(declared) + " but the permutation has order " +
                  std::to_string(ord));
  }

  std::string name_, figure_;
  std::vector<std::string> ids_;
  std::vector<Int> self_;
  std::map<std::string, std::size_t> index_;
  IntMatrix gram_;
  std::vector<std::string> basis_;
  std::map<std::string, CurveAutomorphism> autos_;
};

/// Gram matrix of a subset of curves, in the given order.
inline IntMatrix gram_of(const CurveConfig& cfg, const std::vector<std::string>& subset) {
  IntMatrix g(subset.size(), subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    std::size_t a = cfg.index_of(subset[i]);
    for (std::size_t j = 0; j < subset.size(); ++j)
      g(i, j) = cfg.full_gram()(a, cfg.index_of(subset[j]));
  }
  return g;
}

/// Lattice generated by the classes (Gram under the incidence form, radical
/// quotiented away by from_gram).
inline Lattice lattice_of(const CurveConfig& cfg, const std::vector<DivisorClass>& classes) {
  IntMatrix g(classes.size(), classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t j = i; j < classes.size(); ++j)
      g(i, j) = g(j, i) = cfg.pair(classes[i], classes[j]);
  return Lattice::from_gram(g);
}

inline Lattice lattice_of(const CurveConfig& cfg, const std::vector<std::string>& curves) {
  std::vector<DivisorClass> classes;
  for (const std::string& id : curves) classes.push_back(DivisorClass::of_curve(id));
  return lattice_of(cfg, classes);
}

/// Integer coordinates of c over the basis, or nothing.  Solves
/// G_B x = (c . b_i) over the rationals and accepts x only when it is
/// integral AND c.c = x^T G_B x; matching pairings alone is insufficient.
inline std::optional<std::vector<Int>> in_span(const CurveConfig& cfg,
                                               const std::vector<std::string>& basis,
                                               const DivisorClass& c) {
  IntMatrix gb = gram_of(cfg, basis);
  if (determinant(gb) == 0) throw error("in_span: degenerate basis Gram");
  RatMatrix inv = rational_inverse(gb);
  std::vector<Rat> rhs(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i)
    rhs[i] = Rat(cfg.pair(c, DivisorClass::of_curve(basis[i])));
  std::vector<Rat> x(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = 0; j < basis.size(); ++j) x[i] += inv(i, j) * rhs[j];
  std::vector<Int> xi(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (boost::multiprecision::denominator(x[i]) != 1) return std::nullopt;
    xi[i] = boost::multiprecision::numerator(x[i]);
  }
  Rat self = 0;
  for (std::size_t i = 0; i < basis.size(); ++i) self += Rat(xi[i]) * rhs[i];
  if (self != Rat(cfg.pair(c, c))) return std::nullopt;
  return xi;
}

namespace detail {

// Membership of c in the Z-span of the given classes modulo the radical of
// the full incidence form; this is exactly membership of [c] in the span of
// the images inside the nondegenerate quotient lattice.
inline bool in_class_span(const CurveConfig& cfg, const std::vector<DivisorClass>& classes,
                          const IntMatrix& radical, const DivisorClass& c) {
  const std::size_t n = cfg.curve_ids().size();
  const std::size_t m = classes.size() + radical.rows();
  IntMatrix cols(n, m);
  for (std::size_t j = 0; j < classes.size(); ++j) {
    std::vector<Int> v = cfg.vector_of(classes[j]);
    for (std::size_t i = 0; i < n; ++i) cols(i, j) = v[i];
  }
  for (std::size_t j = 0; j < radical.rows(); ++j)
    for (std::size_t i = 0; i < n; ++i) cols(i, classes.size() + j) = radical(j, i);
  return integer_solve(cols, cfg.vector_of(c)).has_value();
}

}  // namespace detail

/// Greedily removes classes, scanning last-to-first, that lie in the span of
/// the remainder.  The result generates the same lattice.
inline std::vector<DivisorClass> minimal_generators(const CurveConfig& cfg,
                                                    const std::vector<DivisorClass>& classes) {
  IntMatrix radical = saturated_kernel(cfg.full_gram());
  std::vector<DivisorClass> kept = classes;
  for (std::size_t pos = kept.size(); pos-- > 0;) {
    std::vector<DivisorClass> rest;
    for (std::size_t i = 0; i < kept.size(); ++i)
      if (i != pos) rest.push_back(kept[i]);
    if (detail::in_class_span(cfg, rest, radical, kept[pos])) kept = std::move(rest);
  }
  // removal preserved the generated lattice by construction; cheap sanity
  if (!classes.empty()) {
    Lattice before = lattice_of(cfg, classes), after = lattice_of(cfg, kept);
    if (before.rank() != after.rank() || int_abs(before.det()) != int_abs(after.det()))
      throw error("minimal_generators: reduction changed the lattice");
  }
  return kept;
}

/// One class per orbit of g (the sum of its members), ordered by the first
/// member of each orbit in file order.
inline std::vector<DivisorClass> orbit_sums(const CurveConfig& cfg,
                                            const CurveAutomorphism& g) {
  std::vector<DivisorClass> out;
  std::set<std::string> used;
  for (const std::string& id : cfg.curve_ids()) {
    if (used.count(id)) continue;
    DivisorClass sum;
    std::string cur = id;
    do {
      sum.add(cur, 1);
      used.insert(cur);
      cur = g.image(cur);
    } while (cur != id);
    out.push_back(sum);
  }
  return out;
}

/// Matrix of the isometry induced by g on the lattice spanned by the basis:
/// column j holds the basis coordinates of g(basis[j]).  Validated to
/// satisfy M^T G M = G.
inline IntMatrix isometry_matrix(const CurveConfig& cfg,
                                 const std::vector<std::string>& basis,
                                 const CurveAutomorphism& g) {
  const std::size_t n = basis.size();
  IntMatrix M(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    auto coords = in_span(cfg, basis, DivisorClass::of_curve(g.image(basis[j])));
    if (!coords)
      throw error("isometry_matrix: image of '" + basis[j] +
                  "' is not in the span of the basis");
    for (std::size_t i = 0; i < n; ++i) M(i, j) = (*coords)[i];
  }
  IntMatrix G = gram_of(cfg, basis);
  if (M.transpose() * G * M != G)
    throw error("isometry_matrix: validation M^T G M = G failed");
  return M;
}

struct InvariantLattice {
  Lattice lattice;
  IntMatrix basis_coords;  // rows: basis of the fixed sublattice in `basis` coordinates
};

/// Fixed sublattice of the isometry induced by g, computed as the saturated
/// kernel of M - I; cross-checked against the lattice generated by the
/// orbit sums (after redundancy removal), which must have the same rank and
/// determinant.
inline InvariantLattice invariant_lattice(const CurveConfig& cfg,
                                          const std::vector<std::string>& basis,
                                          const CurveAutomorphism& g) {
  IntMatrix M = isometry_matrix(cfg, basis, g);
  IntMatrix K = saturated_kernel(M - IntMatrix::identity(basis.size()));
  IntMatrix G = gram_of(cfg, basis);
  Lattice fixed = Lattice::from_gram(K * G * K.transpose());

  Lattice ambient = Lattice::from_gram(G);
  if (!is_primitive_sublattice(ambient, K))
    throw error("invariant_lattice: fixed sublattice is not primitive");

  std::vector<DivisorClass> sums = minimal_generators(cfg, orbit_sums(cfg, g));
  Lattice by_orbits = lattice_of(cfg, sums);
  if (by_orbits.rank() != fixed.rank() || int_abs(by_orbits.det()) != int_abs(fixed.det()))
    throw error("invariant_lattice: kernel and orbit-sum methods disagree on '" +
                g.name() + "'");
  return {std::move(fixed), std::move(K)};
}

/// True iff every coordinate of c over the basis is divisible by k.
inline bool divisible_by(const CurveConfig& cfg, const std::vector<std::string>& basis,
                         const DivisorClass& c, const Int& k) {
  if (k < 2) throw error("divisible_by: k must be >= 2");
  auto coords = in_span(cfg, basis, c);
  if (!coords) throw error("divisible_by: class is not in the span of the basis");
  for (const Int& x : *coords)
    if (x % k != 0) return false;
  return true;
}

}  // namespace k3lat
