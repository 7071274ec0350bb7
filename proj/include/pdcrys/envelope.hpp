#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "pdcrys/complex.hpp"
#include "pdcrys/pdpoly.hpp"
#include "pdcrys/sparse_matrix.hpp"

namespace pdcrys {

// Divided-power envelope of an ideal (p, f_1, ..., f_r) generated by base
// monomials, truncated to total weight <= degree, presented as the window
// module modulo a saturated relation span.
//
// Variables, in order: ordinary ambient ones, freely adjoined divided-power
// ones (no relations), and one divided-power generator per f_t carrying the
// multidegree of its monomial.  The relation span is seeded with all monomial
// multiples of y_t - f_t and with divided powers of the pairwise syzygies,
// then saturated: it is closed under multiplication by window monomials and
// under gamma_n of any echelon row that lies in the divided-power ideal.
struct EnvelopeSpec {
  PrimePower R{2, 1};
  u64 degree = 0;
  std::vector<std::string> ordNames;
  std::vector<WeightVec> ordWeights;
  std::vector<std::string> freePDNames;
  std::vector<WeightVec> freePDWeights;
  std::vector<std::string> genNames;
  std::vector<Monomial> gens;  // exponents over the ordinary variables
};

struct Envelope {
  PDAlgebra alg;
  u64 nbase = 0;
  u64 nfree = 0;
  std::vector<Monomial> fs;  // generator monomials, padded to alg width
  MonoBasis window;
  EchelonSpan rel;
  u64 saturationPasses = 0;  // rounds that grew the span beyond the seeds

  u64 ngens() const { return fs.size(); }
  u64 gen_var(u64 t) const { return nbase + nfree + t; }
  // directions with their own differential form: base and free PD variables
  u64 ndirs() const { return nbase + nfree; }

  bool in_pd_ideal(const PDElement& a) const {
    for (const auto& [m, c] : a.terms) {
      bool pd = false;
      for (u64 i = nbase; i < alg.nvars(); ++i)
        if (m[i]) pd = true;
      if (!pd && alg.R.val(c) == 0) return false;
    }
    return true;
  }

  PDElement normal_form(const PDElement& a) const {
    Vec v = window.to_vec(a);
    rel.reduce(v);
    return window.from_vec(alg, v);
  }

  bool in_relations(const PDElement& a) const { return rel.contains(window.to_vec(a)); }

  PDElement row_element(size_t i) const { return window.from_vec(alg, rel.rows[i].v); }

  // Derivation in the direction of variable i < ndirs(); dy_t := d(f_t)
  // makes the generator slots chain through their monomials.
  PDElement d_dir(const PDElement& a, u64 i) const {
    PDElement r = partial(alg, a, i);
    if (i < nbase) {
      for (u64 t = 0; t < fs.size(); ++t) {
        if (!fs[t][i]) continue;
        Monomial df = fs[t];
        df[i] = uint8_t(df[i] - 1);
        PDElement g = pd_mul(alg, partial(alg, a, gen_var(t)), pd_mono(alg, df, fs[t][i]));
        r = pd_add(alg, r, g);
      }
    }
    return r;
  }
};

namespace detail {

inline u64 max_term_total(const PDAlgebra& alg, const PDElement& a) {
  u64 t = 0;
  for (const auto& [m, c] : a.terms) t = std::max(t, alg.mono_total(m));
  return t;
}

}  // namespace detail

inline Envelope make_envelope(const EnvelopeSpec& spec) {
  const u64 m = spec.ordNames.size();
  std::vector<std::string> names = spec.ordNames;
  std::vector<VarKind> kinds(m, VarKind::Ordinary);
  std::vector<WeightVec> weights = spec.ordWeights;
  for (size_t j = 0; j < spec.freePDNames.size(); ++j) {
    names.push_back(spec.freePDNames[j]);
    kinds.push_back(VarKind::PD);
    weights.push_back(spec.freePDWeights[j]);
  }
  const u64 wl = weights.empty() ? 0 : weights[0].size();
  for (size_t t = 0; t < spec.gens.size(); ++t) {
    if (spec.gens[t].size() != m) throw std::invalid_argument("generator width mismatch");
    WeightVec w(wl, 0);
    bool nonconst = false;
    for (u64 i = 0; i < m; ++i) {
      if (spec.gens[t][i]) nonconst = true;
      for (u64 j = 0; j < wl; ++j) w[j] += u32(spec.gens[t][i]) * spec.ordWeights[i][j];
    }
    if (!nonconst) throw std::invalid_argument("generator must be a nonconstant monomial");
    names.push_back(spec.genNames[t]);
    kinds.push_back(VarKind::PD);
    weights.push_back(w);
  }

  Envelope env{PDAlgebra(spec.R, spec.degree, names, kinds, weights),
               m, spec.freePDNames.size(), {}, {}, {}, 0};
  const PDAlgebra& alg = env.alg;
  for (const auto& f : spec.gens) {
    Monomial padded(alg.nvars(), 0);
    for (u64 i = 0; i < m; ++i) padded[i] = f[i];
    env.fs.push_back(padded);
  }
  env.window = MonoBasis(all_monomials(alg, spec.degree));
  const u64 cols = env.window.size();
  env.rel = EchelonSpan(cols, spec.R);

  const u64 r = env.fs.size();
  std::vector<Vec> rows;
  auto push_element = [&](const PDElement& a) {
    if (a.lossy) throw std::logic_error("relation seed left the window");
    if (!a.is_zero()) rows.push_back(env.window.to_vec(a));
  };

  // (i) all window-monomial multiples of y_t - f_t
  std::vector<PDElement> diff(r);
  for (u64 t = 0; t < r; ++t)
    diff[t] = pd_sub(alg, pd_var(alg, env.gen_var(t)), pd_mono(alg, env.fs[t], 1));
  for (u64 t = 0; t < r; ++t) {
    u64 wt = alg.mono_total(env.fs[t]);
    for (const auto& mu : env.window.monos) {
      if (alg.mono_total(mu) + wt > spec.degree) continue;
      push_element(pd_mul(alg, pd_mono(alg, mu, 1), diff[t]));
    }
  }

  // (ii) divided powers of the pairwise syzygies
  for (u64 t = 0; t < r; ++t)
    for (u64 u = t + 1; u < r; ++u) {
      Monomial a(alg.nvars(), 0), b(alg.nvars(), 0);
      u64 wt = 0;
      for (u64 i = 0; i < m; ++i) {
        uint8_t l = std::max(env.fs[t][i], env.fs[u][i]);
        a[i] = uint8_t(l - env.fs[t][i]);
        b[i] = uint8_t(l - env.fs[u][i]);
        wt += u64(l) * total_weight(alg.weights[i]);
      }
      a[env.gen_var(t)] = 1;
      b[env.gen_var(u)] = 1;
      PDElement s = pd_sub(alg, pd_mono(alg, a, 1), pd_mono(alg, b, 1));
      for (u64 n = 2; n * wt <= spec.degree; ++n) push_element(gamma(alg, s, n));
    }

  // Saturate: close under window-monomial multiples, and under gamma_n of
  // echelon rows lying in the divided-power ideal.
  for (;;) {
    env.rel = EchelonSpan(cols, spec.R);
    env.rel.build(rows);
    std::set<Vec> fresh;
    auto offer = [&](const PDElement& a) {
      if (a.lossy) return;
      Vec v = env.window.to_vec(a);
      env.rel.reduce(v);
      if (!vec_is_zero(v)) fresh.insert(v);
    };
    for (size_t i = 0; i < env.rel.rows.size(); ++i) {
      PDElement relem = env.row_element(i);
      u64 wt = detail::max_term_total(alg, relem);
      for (const auto& mu : env.window.monos) {
        u64 mw = alg.mono_total(mu);
        if (mw == 0 || mw + wt > spec.degree) continue;
        offer(pd_mul(alg, pd_mono(alg, mu, 1), relem));
      }
      if (env.in_pd_ideal(relem) && wt >= 1)
        for (u64 n = 2; n * wt <= spec.degree; ++n) offer(gamma(alg, relem, n));
    }
    if (fresh.empty()) break;
    ++env.saturationPasses;
    rows.clear();
    for (const auto& row : env.rel.rows) rows.push_back(row.v);
    rows.insert(rows.end(), fresh.begin(), fresh.end());
  }

  // A relation of weight zero would collapse the whole envelope.
  if (!env.window.monos.empty() && env.rel.pivotOfCol[0] != -1)
    throw std::logic_error("envelope collapsed: 1 lies in the relation span");
  return env;
}

inline Envelope envelope_flat(const PrimePower& R, u64 degree,
                              std::vector<std::string> baseNames) {
  EnvelopeSpec s;
  s.R = R;
  s.degree = degree;
  const size_t m = baseNames.size();
  s.ordNames = std::move(baseNames);
  for (size_t i = 0; i < m; ++i) {
    WeightVec w(m, 0);
    w[i] = 1;
    s.ordWeights.push_back(w);
  }
  return make_envelope(s);
}

inline Envelope envelope_regular(const PrimePower& R, u64 degree,
                                 std::vector<std::string> baseNames,
                                 std::vector<std::string> pdNames) {
  EnvelopeSpec s;
  s.R = R;
  s.degree = degree;
  const size_t m = baseNames.size(), r = pdNames.size();
  s.ordNames = std::move(baseNames);
  s.freePDNames = std::move(pdNames);
  for (size_t i = 0; i < m + r; ++i) {
    WeightVec w(m + r, 0);
    w[i] = 1;
    if (i < m)
      s.ordWeights.push_back(w);
    else
      s.freePDWeights.push_back(w);
  }
  return make_envelope(s);
}

inline Envelope envelope_monomial(const PrimePower& R, u64 degree,
                                  std::vector<std::string> baseNames,
                                  std::vector<std::string> genNames,
                                  std::vector<Monomial> gens) {
  EnvelopeSpec s;
  s.R = R;
  s.degree = degree;
  const size_t m = baseNames.size();
  s.ordNames = std::move(baseNames);
  for (size_t i = 0; i < m; ++i) {
    WeightVec w(m, 0);
    w[i] = 1;
    s.ordWeights.push_back(w);
  }
  s.genNames = std::move(genNames);
  s.gens = std::move(gens);
  return make_envelope(s);
}

// --- Module structure reports ------------------------------------------------

struct WeightSummary {
  WeightVec w;
  std::vector<Monomial> freeBasis;               // non-pivot columns, window order
  std::vector<std::pair<Monomial, u64>> torsion;  // pivot monomial, order exponent
};

inline std::vector<WeightSummary> weight_summaries(const Envelope& env) {
  std::map<WeightVec, WeightSummary> acc;
  for (u64 j = 0; j < env.window.size(); ++j) {
    const Monomial& mono = env.window.monos[j];
    WeightVec w = env.alg.mono_weight(mono);
    auto& s = acc[w];
    s.w = w;
    i64 pr = env.rel.pivotOfCol[j];
    if (pr == -1)
      s.freeBasis.push_back(mono);
    else if (env.rel.rows[size_t(pr)].pivotVal >= 1)
      s.torsion.emplace_back(mono, env.rel.rows[size_t(pr)].pivotVal);
  }
  std::vector<WeightSummary> out;
  for (auto& [w, s] : acc) out.push_back(std::move(s));
  return out;
}

// Randomized divided-power stability probe: random span elements lying in the
// divided-power ideal must keep all their in-window divided powers inside the
// span.  Returns the number of violations found (zero expected).
inline u64 pd_stability_failures(const Envelope& env, std::mt19937_64& rng, int samples) {
  const PDAlgebra& alg = env.alg;
  if (env.rel.rows.empty()) return 0;
  u64 bad = 0;
  for (int it = 0; it < samples; ++it) {
    PDElement v;
    int k = 1 + int(rng() % 3);
    for (int t = 0; t < k; ++t) {
      const auto& row = env.rel.rows[rng() % env.rel.rows.size()];
      PDElement relem = env.window.from_vec(alg, row.v);
      u64 wt = detail::max_term_total(alg, relem);
      std::vector<const Monomial*> muls;
      for (const auto& mu : env.window.monos)
        if (alg.mono_total(mu) + wt <= alg.degree) muls.push_back(&mu);
      if (muls.empty()) continue;
      PDElement mu = pd_mono(alg, *muls[rng() % muls.size()], 1 + rng() % (alg.R.q - 1));
      v = pd_add(alg, v, pd_mul(alg, mu, relem));
    }
    if (v.is_zero() || !env.in_pd_ideal(v)) continue;
    u64 wt = detail::max_term_total(alg, v);
    for (u64 n = 2; n * wt <= alg.degree; ++n) {
      PDElement g = gamma(alg, v, n);
      if (g.lossy) break;
      if (!env.in_relations(g)) ++bad;
    }
  }
  return bad;
}

// --- de Rham complex ----------------------------------------------------------

namespace detail {

inline std::vector<u64> subsets_of_size(u64 n, u64 k) {
  std::vector<u64> out;
  for (u64 mask = 0; mask < (u64(1) << n); ++mask)
    if (u64(__builtin_popcountll(mask)) == k) out.push_back(mask);
  return out;
}

inline int insert_sign(u64 mask, u64 i) {
  int below = __builtin_popcountll(mask & ((u64(1) << i) - 1));
  return below % 2 ? -1 : 1;
}

}  // namespace detail

// de Rham complex of the envelope: degree k is the free module on pairs
// (window monomial, k-subset of directions), modulo one copy of the relation
// span per subset; d(mu dx_S) = sum_i sign * d_dir(mu, i) dx_{S+i}.
// Column weight is weight(mono) + weight(dx_S), so d preserves weight.
inline CochainComplex derham_complex(const Envelope& env) {
  const PDAlgebra& alg = env.alg;
  const PrimePower& R = alg.R;
  const u64 n = env.ndirs();
  const u64 W = env.window.size();

  CochainComplex c;
  c.R = R;
  c.lo = 0;
  std::vector<std::vector<u64>> masks(n + 1);
  std::vector<std::map<u64, u64>> maskIndex(n + 1);
  for (u64 k = 0; k <= n; ++k) {
    masks[k] = detail::subsets_of_size(n, k);
    for (u64 s = 0; s < masks[k].size(); ++s) maskIndex[k][masks[k][s]] = s;
    c.ranks.push_back(masks[k].size() * W);
  }

  c.weights.resize(n + 1);
  c.rels.resize(n + 1);
  for (u64 k = 0; k <= n; ++k) {
    for (u64 s = 0; s < masks[k].size(); ++s) {
      WeightVec dxw(alg.weight_len(), 0);
      for (u64 i = 0; i < n; ++i)
        if (masks[k][s] >> i & 1)
          for (size_t j = 0; j < dxw.size(); ++j) dxw[j] += alg.weights[i][j];
      for (u64 j = 0; j < W; ++j) {
        WeightVec w = alg.mono_weight(env.window.monos[j]);
        for (size_t t = 0; t < w.size(); ++t) w[t] += dxw[t];
        c.weights[k].push_back(w);
      }
      for (const auto& row : env.rel.rows) {
        Vec wide(masks[k].size() * W, 0);
        for (u64 j = 0; j < W; ++j) wide[s * W + j] = row.v[j];
        c.rels[k].push_back(std::move(wide));
      }
    }
  }

  for (u64 k = 0; k < n; ++k) {
    SparseMatrix d(masks[k + 1].size() * W, masks[k].size() * W);
    for (u64 s = 0; s < masks[k].size(); ++s) {
      u64 mask = masks[k][s];
      for (u64 j = 0; j < W; ++j) {
        PDElement mu = pd_mono(alg, env.window.monos[j], 1);
        for (u64 i = 0; i < n; ++i) {
          if (mask >> i & 1) continue;
          PDElement der = env.d_dir(mu, i);
          if (der.is_zero()) continue;
          int sign = detail::insert_sign(mask, i);
          u64 ts = maskIndex[k + 1].at(mask | (u64(1) << i));
          for (const auto& [tm, tc] : der.terms) {
            u64 row = ts * W + env.window.index.at(tm);
            u64 val = sign > 0 ? tc : R.reduce(R.q - tc);
            d.add_to(row, s * W + j, val, R);
          }
        }
      }
    }
    c.diffs.push_back(std::move(d));
  }
  return c;
}

}  // namespace pdcrys
