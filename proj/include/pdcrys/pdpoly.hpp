#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pdcrys/complex.hpp"
#include "pdcrys/ring.hpp"

namespace pdcrys {

// Exponent vector, one slot per variable.  For an ordinary variable the slot
// is a plain power; for a divided-power variable, slot value a denotes the
// basis element gamma_a(y) (so gamma_a * gamma_b picks up C(a+b,a)).
using Monomial = std::vector<uint8_t>;

enum class VarKind { Ordinary, PD };

// Truncated (divided-power) polynomial ring over Z/p^e: the free module on
// monomials of total weight <= degree.  Every variable carries a weight
// vector; products that would leave the window are dropped and flagged.
struct PDAlgebra {
  PrimePower R;
  u64 degree = 0;
  std::vector<std::string> names;
  std::vector<VarKind> kinds;
  std::vector<WeightVec> weights;

  PDAlgebra(const PrimePower& r, u64 d, std::vector<std::string> ns,
            std::vector<VarKind> ks, std::vector<WeightVec> ws)
      : R(r), degree(d), names(std::move(ns)), kinds(std::move(ks)), weights(std::move(ws)) {
    if (names.size() != kinds.size() || names.size() != weights.size())
      throw std::invalid_argument("algebra descriptor arrays disagree in length");
    if (degree > 200) throw std::invalid_argument("degree window too large");
    size_t wl = weights.empty() ? 0 : weights[0].size();
    for (size_t i = 0; i < names.size(); ++i) {
      const std::string& n = names[i];
      if (n.empty() || n == "g") throw std::invalid_argument("variable name reserved: " + n);
      if (!std::isalpha(static_cast<unsigned char>(n[0])) && n[0] != '_')
        throw std::invalid_argument("bad variable name: " + n);
      for (char ch : n)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_')
          throw std::invalid_argument("bad variable name: " + n);
      for (size_t j = i + 1; j < names.size(); ++j)
        if (names[j] == n) throw std::invalid_argument("duplicate variable name: " + n);
      if (weights[i].size() != wl)
        throw std::invalid_argument("weight vectors disagree in length");
      if (total_weight(weights[i]) == 0)
        throw std::invalid_argument("variable must have positive total weight: " + n);
    }
  }

  u64 nvars() const { return names.size(); }
  u64 weight_len() const { return weights.empty() ? 0 : weights[0].size(); }

  std::optional<u64> var_index(const std::string& s) const {
    for (u64 i = 0; i < names.size(); ++i)
      if (names[i] == s) return i;
    return std::nullopt;
  }

  WeightVec mono_weight(const Monomial& m) const {
    WeightVec w(weight_len(), 0);
    for (u64 i = 0; i < m.size(); ++i)
      for (size_t j = 0; j < w.size(); ++j) w[j] += u32(m[i]) * weights[i][j];
    return w;
  }

  u64 mono_total(const Monomial& m) const {
    u64 t = 0;
    for (u64 i = 0; i < m.size(); ++i) t += u64(m[i]) * total_weight(weights[i]);
    return t;
  }
};

struct PDElement {
  std::map<Monomial, u64> terms;  // nonzero canonical residues only
  bool lossy = false;             // some product left the degree window

  bool operator==(const PDElement& o) const { return terms == o.terms; }
  bool is_zero() const { return terms.empty(); }
};

inline PDElement pd_zero() { return {}; }

inline PDElement pd_const(const PDAlgebra& alg, u64 c) {
  PDElement r;
  c = alg.R.reduce(c);
  if (c) r.terms[Monomial(alg.nvars(), 0)] = c;
  return r;
}

inline PDElement pd_one(const PDAlgebra& alg) { return pd_const(alg, 1); }

inline PDElement pd_mono(const PDAlgebra& alg, const Monomial& m, u64 c) {
  if (m.size() != alg.nvars()) throw std::invalid_argument("monomial width mismatch");
  PDElement r;
  if (alg.mono_total(m) > alg.degree) {
    r.lossy = true;
    return r;
  }
  c = alg.R.reduce(c);
  if (c) r.terms[m] = c;
  return r;
}

inline PDElement pd_var(const PDAlgebra& alg, u64 i) {
  Monomial m(alg.nvars(), 0);
  m[i] = 1;
  return pd_mono(alg, m, 1);
}

inline void pd_add_term(const PDAlgebra& alg, PDElement& a, const Monomial& m, u64 c) {
  c = alg.R.reduce(c);
  if (!c) return;
  auto it = a.terms.find(m);
  if (it == a.terms.end()) {
    a.terms.emplace(m, c);
  } else {
    it->second = alg.R.add(it->second, c);
    if (!it->second) a.terms.erase(it);
  }
}

inline PDElement pd_add(const PDAlgebra& alg, const PDElement& a, const PDElement& b) {
  PDElement r = a;
  r.lossy = a.lossy || b.lossy;
  for (const auto& [m, c] : b.terms) pd_add_term(alg, r, m, c);
  return r;
}

inline PDElement pd_scale(const PDAlgebra& alg, u64 c, const PDElement& a) {
  PDElement r;
  r.lossy = a.lossy;
  for (const auto& [m, cc] : a.terms) pd_add_term(alg, r, m, alg.R.mul(c, cc));
  return r;
}

inline PDElement pd_neg(const PDAlgebra& alg, const PDElement& a) {
  return pd_scale(alg, alg.R.q - 1, a);
}

inline PDElement pd_sub(const PDAlgebra& alg, const PDElement& a, const PDElement& b) {
  return pd_add(alg, a, pd_neg(alg, b));
}

// Product of two basis monomials: the exponents add; each divided-power slot
// contributes C(a+b, a).  Returns the coefficient, or nullopt when the result
// leaves the degree window.
inline std::optional<std::pair<Monomial, u64>> mono_mul(const PDAlgebra& alg,
                                                        const Monomial& ma,
                                                        const Monomial& mb) {
  Monomial m(alg.nvars());
  u64 coeff = 1 % alg.R.q;
  for (u64 i = 0; i < alg.nvars(); ++i) {
    u64 s = u64(ma[i]) + u64(mb[i]);
    if (s > 255) return std::nullopt;
    m[i] = uint8_t(s);
    if (alg.kinds[i] == VarKind::PD && ma[i] && mb[i])
      coeff = alg.R.mul(coeff, alg.R.binomial(s, ma[i]));
  }
  if (alg.mono_total(m) > alg.degree) return std::nullopt;
  return std::make_pair(std::move(m), coeff);
}

inline PDElement pd_mul(const PDAlgebra& alg, const PDElement& a, const PDElement& b) {
  PDElement r;
  r.lossy = a.lossy || b.lossy;
  for (const auto& [ma, ca] : a.terms)
    for (const auto& [mb, cb] : b.terms) {
      auto prod = mono_mul(alg, ma, mb);
      if (!prod) {
        r.lossy = true;
        continue;
      }
      pd_add_term(alg, r, prod->first, alg.R.mul(prod->second, alg.R.mul(ca, cb)));
    }
  return r;
}

inline PDElement pd_pow(const PDAlgebra& alg, const PDElement& a, u64 n) {
  PDElement r = pd_one(alg);
  for (u64 i = 0; i < n; ++i) r = pd_mul(alg, r, a);
  return r;
}

inline std::string mono_to_string(const PDAlgebra& alg, const Monomial& m, u64 c);

// Divided power of a single monomial c*M: if M contains a divided-power slot
// gamma_b(y), split m = (c * M/gamma_b) * gamma_b(y) and use
//   gamma_n(lambda z) = lambda^n gamma_n(z),
//   gamma_n(gamma_b(y)) = ((nb)!/(n! b!^n)) gamma_{nb}(y);
// otherwise the coefficient must be divisible by p and
//   gamma_n(p u) = (p^n/n!) u^n.
inline PDElement gamma_mono(const PDAlgebra& alg, const Monomial& m, u64 c, u64 n) {
  if (n == 0) return pd_one(alg);
  const PrimePower& R = alg.R;
  u64 pdVar = alg.nvars();
  for (u64 i = 0; i < alg.nvars(); ++i)
    if (alg.kinds[i] == VarKind::PD && m[i]) {
      pdVar = i;
      break;
    }
  if (pdVar == alg.nvars()) {
    if (R.val(c) == 0)
      throw std::invalid_argument("divided power of an element outside the divided-power ideal: " +
                                  mono_to_string(alg, m, c));
    u64 cp = R.pdiv(c, 1);
    PDElement base = pd_pow(alg, pd_mono(alg, m, cp), n);
    return pd_scale(alg, R.gamma_p_coeff(n), base);
  }
  u64 b = m[pdVar];
  Monomial rest = m;
  rest[pdVar] = 0;
  u64 nb = u64(n) * b;
  PDElement out;
  if (nb > 255 || alg.mono_total(m) * n > alg.degree) {
    out.lossy = true;
    return out;
  }
  Monomial top(alg.nvars(), 0);
  top[pdVar] = uint8_t(nb);
  PDElement lead = pd_mono(alg, top, R.mul(R.pow(c, n), R.pd_multinomial(n, b)));
  return pd_mul(alg, pd_pow(alg, pd_mono(alg, rest, 1), n), lead);
}

namespace detail {
inline PDElement gamma_terms(const PDAlgebra& alg,
                             const std::vector<std::pair<Monomial, u64>>& ts, size_t k, u64 n) {
  if (n == 0) return pd_one(alg);
  if (k == ts.size()) return pd_zero();
  if (k + 1 == ts.size()) return gamma_mono(alg, ts[k].first, ts[k].second, n);
  PDElement acc;
  for (u64 i = 0; i <= n; ++i) {
    PDElement head = gamma_mono(alg, ts[k].first, ts[k].second, i);
    acc = pd_add(alg, acc, pd_mul(alg, head, gamma_terms(alg, ts, k + 1, n - i)));
  }
  return acc;
}
}  // namespace detail

// gamma_n on the divided-power ideal, via gamma_n(a+b) = sum gamma_i gamma_j.
// Throws if some monomial of the argument lies outside the ideal.
inline PDElement gamma(const PDAlgebra& alg, const PDElement& a, u64 n) {
  std::vector<std::pair<Monomial, u64>> ts(a.terms.begin(), a.terms.end());
  PDElement r = detail::gamma_terms(alg, ts, 0, n);
  r.lossy = r.lossy || a.lossy;
  return r;
}

// Partial derivative in the direction of variable i: x^a -> a x^{a-1} for an
// ordinary variable, gamma_a -> gamma_{a-1} for a divided-power one.
inline PDElement partial(const PDAlgebra& alg, const PDElement& a, u64 i) {
  PDElement r;
  r.lossy = a.lossy;
  for (const auto& [m, c] : a.terms) {
    if (!m[i]) continue;
    Monomial mm = m;
    mm[i] = uint8_t(m[i] - 1);
    u64 cc = alg.kinds[i] == VarKind::Ordinary ? alg.R.mul(c, m[i]) : c;
    pd_add_term(alg, r, mm, cc);
  }
  return r;
}

// Ring map determined by a per-variable image list (divided-power images must
// land in the divided-power ideal; gamma enforces that).
inline PDElement apply_hom(const PDAlgebra& src, const PDAlgebra& dst,
                           const std::vector<PDElement>& images, const PDElement& a) {
  if (images.size() != src.nvars()) throw std::invalid_argument("image list width mismatch");
  PDElement r;
  r.lossy = a.lossy;
  for (const auto& [m, c] : a.terms) {
    PDElement t = pd_const(dst, c);
    for (u64 i = 0; i < src.nvars(); ++i) {
      if (!m[i]) continue;
      if (src.kinds[i] == VarKind::Ordinary)
        t = pd_mul(dst, t, pd_pow(dst, images[i], m[i]));
      else
        t = pd_mul(dst, t, gamma(dst, images[i], m[i]));
    }
    r = pd_add(dst, r, t);
    r.lossy = r.lossy || t.lossy;
  }
  return r;
}

// --- Monomial enumeration and vectorization ---------------------------------

// Grevlex-style order used everywhere: smaller total weight first, then
// lexicographically LARGER exponent vector first (variables in descriptor
// order).  Under this order a pure base-variable monomial precedes the
// divided-power generator of the same weight, so echelon pivots (lowest
// column at equal valuation) rewrite base monomials in terms of PD ones.
inline bool mono_order_before(const PDAlgebra& alg, const Monomial& a, const Monomial& b) {
  u64 ta = alg.mono_total(a), tb = alg.mono_total(b);
  if (ta != tb) return ta < tb;
  return a > b;
}

inline std::vector<Monomial> all_monomials(const PDAlgebra& alg, u64 maxTotal) {
  std::vector<Monomial> out;
  Monomial cur(alg.nvars(), 0);
  auto rec = [&](auto&& self, u64 i, u64 left) -> void {
    if (i == alg.nvars()) {
      out.push_back(cur);
      return;
    }
    u64 w = total_weight(alg.weights[i]);
    for (u64 a = 0; a * w <= left && a <= 255; ++a) {
      cur[i] = uint8_t(a);
      self(self, i + 1, left - a * w);
    }
    cur[i] = 0;
  };
  rec(rec, 0, maxTotal);
  std::sort(out.begin(), out.end(),
            [&](const Monomial& a, const Monomial& b) { return mono_order_before(alg, a, b); });
  return out;
}

// Indexed monomial basis; column i of any matrix over this basis is monos[i].
struct MonoBasis {
  std::vector<Monomial> monos;
  std::map<Monomial, u64> index;

  MonoBasis() = default;
  explicit MonoBasis(std::vector<Monomial> ms) : monos(std::move(ms)) {
    for (u64 i = 0; i < monos.size(); ++i) index[monos[i]] = i;
  }

  u64 size() const { return monos.size(); }

  Vec to_vec(const PDElement& a) const {
    Vec v(monos.size(), 0);
    for (const auto& [m, c] : a.terms) {
      auto it = index.find(m);
      if (it == index.end()) throw std::invalid_argument("element leaves the enumerated basis");
      v[it->second] = c;
    }
    return v;
  }

  PDElement from_vec(const PDAlgebra& alg, const Vec& v) const {
    if (v.size() != monos.size()) throw std::invalid_argument("vector width mismatch");
    PDElement r;
    for (u64 i = 0; i < v.size(); ++i) pd_add_term(alg, r, monos[i], v[i]);
    return r;
  }
};

// --- Printing and parsing ----------------------------------------------------

inline std::string mono_to_string(const PDAlgebra& alg, const Monomial& m, u64 c) {
  std::vector<std::string> parts;
  bool allZero = true;
  for (u64 i = 0; i < m.size(); ++i)
    if (m[i]) allZero = false;
  if (c != 1 || allZero) parts.push_back(std::to_string(c));
  for (u64 i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    if (alg.kinds[i] == VarKind::PD && m[i] >= 2)
      parts.push_back("g(" + alg.names[i] + "," + std::to_string(u64(m[i])) + ")");
    else if (m[i] >= 2)
      parts.push_back(alg.names[i] + "^" + std::to_string(u64(m[i])));
    else
      parts.push_back(alg.names[i]);
  }
  std::string s;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) s += "*";
    s += parts[i];
  }
  return s;
}

inline std::string to_string(const PDAlgebra& alg, const PDElement& a) {
  if (a.terms.empty()) return "0";
  std::string s;
  bool first = true;
  for (const auto& [m, c] : a.terms) {
    if (!first) s += " + ";
    first = false;
    s += mono_to_string(alg, m, c);
  }
  return s;
}

struct ParseError : std::runtime_error {
  size_t pos;
  ParseError(const std::string& msg, size_t p)
      : std::runtime_error(msg + " at position " + std::to_string(p)), pos(p) {}
};

namespace detail {
class ElementParser {
 public:
  ElementParser(const PDAlgebra& a, const std::string& str) : alg(a), s(str) {}

  PDElement run() {
    PDElement r = element();
    ws();
    if (i != s.size()) throw ParseError("unexpected character", i);
    return r;
  }

 private:
  const PDAlgebra& alg;
  const std::string& s;
  size_t i = 0;

  void ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }

  bool peek(char c) {
    ws();
    return i < s.size() && s[i] == c;
  }

  void expect(char c) {
    ws();
    if (i >= s.size() || s[i] != c)
      throw ParseError(std::string("expected '") + c + "'", i);
    ++i;
  }

  u64 integer() {
    ws();
    size_t start = i;
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i])))
      throw ParseError("expected integer", i);
    u64 v = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      u64 d = u64(s[i] - '0');
      if (v > (UINT64_MAX - d) / 10) throw ParseError("integer too large", start);
      v = v * 10 + d;
      ++i;
    }
    return v;
  }

  std::string ident() {
    ws();
    size_t start = i;
    if (i >= s.size() || (!std::isalpha(static_cast<unsigned char>(s[i])) && s[i] != '_'))
      throw ParseError("expected name", i);
    while (i < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'))
      ++i;
    return s.substr(start, i - start);
  }

  PDElement factor() {
    ws();
    if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
      return pd_const(alg, alg.R.reduce(integer()));
    size_t namePos = i;
    std::string name = ident();
    if (name == "g") {
      expect('(');
      size_t varPos = i;
      std::string var = ident();
      auto vi = alg.var_index(var);
      if (!vi) throw ParseError("unknown variable '" + var + "'", varPos);
      if (alg.kinds[*vi] != VarKind::PD)
        throw ParseError("'" + var + "' has no divided powers", varPos);
      expect(',');
      u64 k = integer();
      expect(')');
      if (k > 255) return PDElement{{}, true};
      Monomial m(alg.nvars(), 0);
      m[*vi] = uint8_t(k);
      return pd_mono(alg, m, 1);
    }
    auto vi = alg.var_index(name);
    if (!vi) throw ParseError("unknown variable '" + name + "'", namePos);
    u64 k = 1;
    if (peek('^')) {
      ++i;
      k = integer();
    }
    if (k > 255) return PDElement{{}, true};
    return pd_pow(alg, pd_var(alg, *vi), k);
  }

  PDElement term() {
    PDElement r = factor();
    while (peek('*')) {
      ++i;
      r = pd_mul(alg, r, factor());
    }
    return r;
  }

  PDElement element() {
    ws();
    bool neg = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
      neg = s[i] == '-';
      ++i;
    }
    PDElement r = term();
    if (neg) r = pd_neg(alg, r);
    for (;;) {
      ws();
      if (i >= s.size() || (s[i] != '+' && s[i] != '-')) break;
      bool minus = s[i] == '-';
      ++i;
      PDElement t = term();
      r = minus ? pd_sub(alg, r, t) : pd_add(alg, r, t);
    }
    return r;
  }
};
}  // namespace detail

inline PDElement parse_element(const PDAlgebra& alg, const std::string& s) {
  return detail::ElementParser(alg, s).run();
}

}  // namespace pdcrys
