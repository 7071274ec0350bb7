#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pdcrys {

using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

// Arithmetic in Z/p^e with exact p-adic valuation bookkeeping.  Residues are
// stored in [0, q) with q = p^e; q is capped below 2^31 so that a product of
// two residues always fits in u64 before reduction.  No rationals and no
// arbitrary-precision integers anywhere: divisions are exact divisions by
// powers of p, checked, and everything else is unit arithmetic.
struct PrimePower {
  u64 p = 0;
  u64 e = 0;
  u64 q = 0;  // p^e

  PrimePower() = default;

  PrimePower(u64 p_, u64 e_) : p(p_), e(e_) {
    if (p < 2) throw std::invalid_argument("prime must be >= 2");
    for (u64 f = 2; f * f <= p; ++f)
      if (p % f == 0) throw std::invalid_argument("p is not prime: " + std::to_string(p));
    if (e < 1) throw std::invalid_argument("precision must be >= 1");
    q = 1;
    for (u64 i = 0; i < e; ++i) {
      if (q > (u64(1) << 31) / p)
        throw std::invalid_argument("p^e exceeds the 2^31 residue cap");
      q *= p;
    }
  }

  bool operator==(const PrimePower&) const = default;

  u64 reduce(i64 v) const {
    i64 m = v % i64(q);
    if (m < 0) m += i64(q);
    return u64(m);
  }

  u64 add(u64 a, u64 b) const { u64 s = a + b; return s >= q ? s - q : s; }
  u64 sub(u64 a, u64 b) const { return a >= b ? a - b : a + q - b; }
  u64 neg(u64 a) const { return a == 0 ? 0 : q - a; }
  u64 mul(u64 a, u64 b) const { return (a * b) % q; }

  u64 pow(u64 a, u64 n) const {
    u64 r = 1 % q;
    a %= q;
    while (n) {
      if (n & 1) r = mul(r, a);
      a = mul(a, a);
      n >>= 1;
    }
    return r;
  }

  // p^k as a plain integer (k <= e, so it fits); pow(p, e) would reduce to 0.
  u64 ipow(u64 k) const {
    u64 r = 1;
    for (u64 i = 0; i < k; ++i) r *= p;
    return r;
  }

  // p-adic valuation of the residue class; val(0) = e by convention.
  u64 val(u64 x) const {
    if (x % q == 0) return e;
    u64 v = 0;
    x %= q;
    while (x % p == 0) { x /= p; ++v; }
    return v;
  }

  bool is_unit(u64 x) const { return x % p != 0 && x % q != 0; }

  // x = p^val(x) * unit_part(x) for x != 0.
  u64 unit_part(u64 x) const {
    x %= q;
    if (x == 0) throw std::domain_error("unit_part(0)");
    while (x % p == 0) x /= p;
    return x;
  }

  // Inverse of a unit, via extended Euclid against q.
  u64 inv(u64 x) const {
    x %= q;
    if (!is_unit(x)) throw std::domain_error("inv of non-unit " + std::to_string(x));
    i64 r0 = i64(q), r1 = i64(x), s0 = 0, s1 = 1;
    while (r1 != 0) {
      i64 k = r0 / r1;
      r0 -= k * r1; std::swap(r0, r1);
      s0 -= k * s1; std::swap(s0, s1);
    }
    return reduce(s0);
  }

  // Exact division by p^k on residue classes: defined when val(x) >= k, and
  // then well-defined only up to p^{e-k}; we return the canonical
  // representative (x / p^k as integers), which is what every caller wants
  // when it immediately multiplies back by something of valuation >= k.
  u64 pdiv(u64 x, u64 k) const {
    if (val(x) < k) throw std::domain_error("inexact division by p^k");
    u64 d = 1;
    for (u64 i = 0; i < k; ++i) d *= p;
    return (x % q) / d;
  }

  // n! = p^{factorial_val(n)} * factorial_unit(n), the unit part accumulated
  // mod q.  Legendre for the valuation; n stays small (degrees, PD indices).
  u64 factorial_val(u64 n) const {
    u64 v = 0;
    for (u64 pk = p; pk <= n; pk *= p) {
      v += n / pk;
      if (pk > n / p) break;
    }
    return v;
  }

  u64 factorial_unit(u64 n) const {
    u64 u = 1 % q;
    for (u64 i = 2; i <= n; ++i) u = mul(u, unit_part_of_integer(i));
    return u;
  }

  // C(m,k) mod q, exact: split into p-valuation and unit part.
  u64 binomial(u64 m, u64 k) const {
    if (k > m) return 0;
    u64 v = factorial_val(m) - factorial_val(k) - factorial_val(m - k);
    if (v >= e) return 0;
    u64 u = mul(factorial_unit(m), inv(mul(factorial_unit(k), factorial_unit(m - k))));
    return mul(pow(p, v), u);
  }

  // (nm)! / (n! * (m!)^n) mod q — the coefficient in gamma_n(gamma_m(y)) =
  // that multinomial times gamma_{nm}(y).  Always a nonnegative valuation.
  u64 pd_multinomial(u64 n, u64 m) const {
    u64 v = factorial_val(n * m) - factorial_val(n) - n * factorial_val(m);
    if (v >= e) return 0;
    u64 u = mul(factorial_unit(n * m),
                inv(mul(factorial_unit(n), pow(factorial_unit(m), n))));
    return mul(pow(p, v), u);
  }

  // p^n / n! mod q — the coefficient in gamma_n(p*u) = (p^n/n!) u^n.
  // val = n - factorial_val(n) >= 1 for n >= 1.
  u64 gamma_p_coeff(u64 n) const {
    u64 v = n - factorial_val(n);
    if (v >= e) return 0;
    return mul(pow(p, v), inv(factorial_unit(n)));
  }

 private:
  u64 unit_part_of_integer(u64 i) const {
    while (i % p == 0) i /= p;
    return i % q;
  }
};

}  // namespace pdcrys
