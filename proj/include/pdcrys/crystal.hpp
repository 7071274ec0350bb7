#pragma once

#include <functional>
#include <vector>

#include "pdcrys/envelope.hpp"

namespace pdcrys {

// Finite free module over an envelope with a connection, given by coefficient
// matrices: nabla_dir(e_j) = sum_k A[dir][k][j] e_k (+ the derivation term on
// coefficients).  When graded, generator weights label the columns of the
// associated complexes; connections must then be weight-homogeneous.
struct Crystal {
  u64 rank = 1;
  bool graded = true;
  std::vector<WeightVec> genWeights;
  std::vector<std::vector<std::vector<PDElement>>> A;  // A[dir][k][j]
};

inline Crystal trivial_crystal(const Envelope& env, u64 rank = 1) {
  Crystal c;
  c.rank = rank;
  c.graded = true;
  c.genWeights.assign(rank, WeightVec(env.alg.weight_len(), 0));
  c.A.assign(env.ndirs(),
             std::vector<std::vector<PDElement>>(rank, std::vector<PDElement>(rank)));
  return c;
}

// nabla in one direction applied to a coefficient vector.
inline std::vector<PDElement> nabla(const Envelope& env, const Crystal& cr, u64 dir,
                                    const std::vector<PDElement>& s) {
  const PDAlgebra& alg = env.alg;
  std::vector<PDElement> out(cr.rank);
  for (u64 k = 0; k < cr.rank; ++k) {
    out[k] = env.d_dir(s[k], dir);
    for (u64 j = 0; j < cr.rank; ++j)
      out[k] = pd_add(alg, out[k], pd_mul(alg, cr.A[dir][k][j], s[j]));
  }
  return out;
}

// Curvature must vanish modulo relations in every pair of directions:
// d_i(A_j) - d_j(A_i) + [A_i, A_j] = 0.
inline bool check_integrability(const Envelope& env, const Crystal& cr) {
  const PDAlgebra& alg = env.alg;
  const u64 r = cr.rank;
  for (u64 i = 0; i < env.ndirs(); ++i)
    for (u64 j = i + 1; j < env.ndirs(); ++j)
      for (u64 a = 0; a < r; ++a)
        for (u64 b = 0; b < r; ++b) {
          PDElement f = pd_sub(alg, env.d_dir(cr.A[j][a][b], i), env.d_dir(cr.A[i][a][b], j));
          for (u64 l = 0; l < r; ++l) {
            f = pd_add(alg, f, pd_mul(alg, cr.A[i][a][l], cr.A[j][l][b]));
            f = pd_sub(alg, f, pd_mul(alg, cr.A[j][a][l], cr.A[i][l][b]));
          }
          if (!env.in_relations(f)) return false;
        }
  return true;
}

namespace detail {

using PDMatrix = std::vector<std::vector<PDElement>>;

inline PDMatrix pd_identity_matrix(const PDAlgebra& alg, u64 r) {
  PDMatrix m(r, std::vector<PDElement>(r));
  for (u64 i = 0; i < r; ++i) m[i][i] = pd_one(alg);
  return m;
}

// One application of nabla_dir to every column of a coefficient matrix.
inline PDMatrix nabla_matrix(const Envelope& env, const Crystal& cr, u64 dir,
                             const PDMatrix& B) {
  const PDAlgebra& alg = env.alg;
  const u64 r = cr.rank;
  PDMatrix out(r, std::vector<PDElement>(r));
  for (u64 k = 0; k < r; ++k)
    for (u64 j = 0; j < r; ++j) {
      out[k][j] = env.d_dir(B[k][j], dir);
      for (u64 l = 0; l < r; ++l)
        out[k][j] = pd_add(alg, out[k][j], pd_mul(alg, cr.A[dir][k][l], B[l][j]));
    }
  return out;
}

inline bool matrix_in_relations(const Envelope& env, const PDMatrix& B) {
  for (const auto& row : B)
    for (const auto& x : row)
      if (!env.in_relations(x)) return false;
  return true;
}

}  // namespace detail

inline u64 default_nilpotence_cap(const Envelope& env) {
  return (env.alg.degree + 1) * env.alg.R.e;
}

// Every iterated nabla_dir must vanish modulo relations within the cap.
inline bool check_quasi_nilpotent(const Envelope& env, const Crystal& cr, u64 cap = 0) {
  if (!cap) cap = default_nilpotence_cap(env);
  for (u64 i = 0; i < env.ndirs(); ++i) {
    detail::PDMatrix B = detail::pd_identity_matrix(env.alg, cr.rank);
    u64 n = 0;
    for (;;) {
      B = detail::nabla_matrix(env, cr, i, B);
      ++n;
      if (detail::matrix_in_relations(env, B)) break;
      if (n > cap) return false;
    }
  }
  return true;
}

// de Rham complex with coefficients: degree k has one copy of the free cover
// per (generator, k-subset of directions); d is nabla wedged on the left.
inline CochainComplex crystal_complex(const Envelope& env, const Crystal& cr) {
  const PDAlgebra& alg = env.alg;
  const PrimePower& R = alg.R;
  const u64 n = env.ndirs();
  const u64 W = env.window.size();
  const u64 r = cr.rank;

  CochainComplex c;
  c.R = R;
  c.lo = 0;
  std::vector<std::vector<u64>> masks(n + 1);
  std::vector<std::map<u64, u64>> maskIndex(n + 1);
  for (u64 k = 0; k <= n; ++k) {
    masks[k] = detail::subsets_of_size(n, k);
    for (u64 s = 0; s < masks[k].size(); ++s) maskIndex[k][masks[k][s]] = s;
    c.ranks.push_back(masks[k].size() * r * W);
  }

  c.rels.resize(n + 1);
  if (cr.graded) c.weights.resize(n + 1);
  for (u64 k = 0; k <= n; ++k) {
    for (u64 s = 0; s < masks[k].size(); ++s) {
      WeightVec dxw(alg.weight_len(), 0);
      for (u64 i = 0; i < n; ++i)
        if (masks[k][s] >> i & 1)
          for (size_t t = 0; t < dxw.size(); ++t) dxw[t] += alg.weights[i][t];
      for (u64 j = 0; j < r; ++j) {
        if (cr.graded) {
          for (u64 mj = 0; mj < W; ++mj) {
            WeightVec w = alg.mono_weight(env.window.monos[mj]);
            for (size_t t = 0; t < w.size(); ++t) w[t] += dxw[t] + cr.genWeights[j][t];
            c.weights[k].push_back(w);
          }
        }
        for (const auto& row : env.rel.rows) {
          Vec wide(masks[k].size() * r * W, 0);
          for (u64 mj = 0; mj < W; ++mj) wide[(s * r + j) * W + mj] = row.v[mj];
          c.rels[k].push_back(std::move(wide));
        }
      }
    }
  }

  for (u64 k = 0; k < n; ++k) {
    SparseMatrix d(c.ranks[k + 1], c.ranks[k]);
    for (u64 s = 0; s < masks[k].size(); ++s) {
      u64 mask = masks[k][s];
      for (u64 j = 0; j < r; ++j)
        for (u64 mj = 0; mj < W; ++mj) {
          PDElement mu = pd_mono(alg, env.window.monos[mj], 1);
          for (u64 i = 0; i < n; ++i) {
            if (mask >> i & 1) continue;
            int sign = detail::insert_sign(mask, i);
            u64 ts = maskIndex[k + 1].at(mask | (u64(1) << i));
            auto emit = [&](u64 gen, const PDElement& val) {
              for (const auto& [tm, tc] : val.terms) {
                u64 row = (ts * r + gen) * W + env.window.index.at(tm);
                d.add_to(row, (s * r + j) * W + mj, sign > 0 ? tc : R.reduce(R.q - tc), R);
              }
            };
            emit(j, env.d_dir(mu, i));
            for (u64 kgen = 0; kgen < r; ++kgen)
              emit(kgen, pd_mul(alg, cr.A[i][kgen][j], mu));
          }
        }
    }
    c.diffs.push_back(std::move(d));
  }
  return c;
}

inline CohomologyTable horizontal_sections(const Envelope& env, const Crystal& cr) {
  return cohomology(crystal_complex(env, cr), 0);
}

// --- p-torsion horizontal sections -------------------------------------------

// Classes of { s : nabla s = 0 and p s = 0 } modulo relations, with a flag per
// class telling whether the representative lies in p^{e-1} M + relations.
struct TorsionHorizontal {
  CohomologyTable table;
  std::vector<bool> inTopPower;
};

namespace detail {

// Two-term complex [ M --(nabla, p)--> M^dirs + M ].
inline CochainComplex torsion_kernel_complex(const Envelope& env, const Crystal& cr) {
  const PDAlgebra& alg = env.alg;
  const PrimePower& R = alg.R;
  const u64 n = env.ndirs(), W = env.window.size(), r = cr.rank;
  CochainComplex full = crystal_complex(env, cr);

  CochainComplex c;
  c.R = R;
  c.lo = 0;
  c.ranks = {r * W, (n + 1) * r * W};
  SparseMatrix d((n + 1) * r * W, r * W);
  const SparseMatrix& grad = full.diffs[0];
  for (const auto& [rc, v] : grad.entries) d.set(rc.first, rc.second, v);
  for (u64 col = 0; col < r * W; ++col) d.set(n * r * W + col, col, R.reduce(R.p));
  c.diffs = {std::move(d)};

  c.rels.resize(2);
  if (cr.graded) c.weights.resize(2);
  // degree-0 labels and relations are those of the crystal complex
  c.rels[0] = full.rels[0];
  if (cr.graded) c.weights[0] = full.weights[0];
  // degree 1: the nabla block carries the form labels, the p block repeats
  // the degree-0 labels
  c.rels[1].clear();
  for (const auto& row : full.rels[1]) {
    Vec wide((n + 1) * r * W, 0);
    for (u64 t = 0; t < row.size(); ++t) wide[t] = row[t];
    c.rels[1].push_back(std::move(wide));
  }
  for (const auto& row : full.rels[0]) {
    Vec wide((n + 1) * r * W, 0);
    for (u64 t = 0; t < row.size(); ++t) wide[n * r * W + t] = row[t];
    c.rels[1].push_back(std::move(wide));
  }
  if (cr.graded) {
    c.weights[1] = full.weights[1];
    for (const auto& w : full.weights[0]) c.weights[1].push_back(w);
  }
  return c;
}

}  // namespace detail

inline TorsionHorizontal torsion_horizontal(const Envelope& env, const Crystal& cr) {
  CochainComplex c = detail::torsion_kernel_complex(env, cr);
  TorsionHorizontal out;
  out.table = cohomology(c, 0);

  const u64 W = env.window.size(), r = cr.rank;
  const PrimePower& R = env.alg.R;
  Dense spanRows;
  const u64 top = R.ipow(R.e - 1);
  for (u64 colIdx = 0; colIdx < r * W; ++colIdx) {
    Vec v(r * W, 0);
    v[colIdx] = top;
    spanRows.push_back(std::move(v));
  }
  for (u64 j = 0; j < r; ++j)
    for (const auto& row : env.rel.rows) {
      Vec v(r * W, 0);
      for (u64 t = 0; t < W; ++t) v[j * W + t] = row.v[t];
      spanRows.push_back(std::move(v));
    }
  EchelonSpan span(r * W, R);
  span.build(spanRows);

  for (const auto& blk : out.table.blocks)
    for (size_t cls = 0; cls < blk.exps.size(); ++cls) {
      Vec global(r * W, 0);
      for (size_t i = 0; i < blk.cols.size(); ++i) global[blk.cols[i]] = blk.reps[i][cls];
      out.inTopPower.push_back(span.contains(global));
    }
  return out;
}

// Which classes at precision e are reductions of torsion horizontal sections
// at precision e+1?  envHi/crHi must present the same data one power higher.
inline std::vector<bool> torsion_lift_flags(const Envelope& envLo, const Crystal& crLo,
                                            const TorsionHorizontal& lo,
                                            const Envelope& envHi, const Crystal& crHi) {
  const PrimePower& Rlo = envLo.alg.R;
  const u64 W = envLo.window.size(), r = crLo.rank;
  if (envHi.window.monos != envLo.window.monos)
    throw std::invalid_argument("precision lift: windows disagree");

  TorsionHorizontal hi = torsion_horizontal(envHi, crHi);
  Dense rows;
  auto push_reduced = [&](const Vec& v) {
    Vec red(v.size());
    for (size_t t = 0; t < v.size(); ++t) red[t] = v[t] % Rlo.q;
    rows.push_back(std::move(red));
  };
  for (const auto& blk : hi.table.blocks)
    for (size_t cls = 0; cls < blk.exps.size(); ++cls) {
      Vec global(r * W, 0);
      for (size_t i = 0; i < blk.cols.size(); ++i) global[blk.cols[i]] = blk.reps[i][cls];
      push_reduced(global);
    }
  for (u64 j = 0; j < r; ++j) {
    for (const auto& row : envHi.rel.rows) {
      Vec v(r * W, 0);
      for (u64 t = 0; t < W; ++t) v[j * W + t] = row.v[t];
      push_reduced(v);
    }
    for (const auto& row : envLo.rel.rows) {
      Vec v(r * W, 0);
      for (u64 t = 0; t < W; ++t) v[j * W + t] = row.v[t];
      rows.push_back(std::move(v));
    }
  }
  EchelonSpan span(r * W, Rlo);
  span.build(rows);

  std::vector<bool> flags;
  for (const auto& blk : lo.table.blocks)
    for (size_t cls = 0; cls < blk.exps.size(); ++cls) {
      Vec global(r * W, 0);
      for (size_t i = 0; i < blk.cols.size(); ++i) global[blk.cols[i]] = blk.reps[i][cls];
      flags.push_back(span.contains(global));
    }
  return flags;
}

// --- Taylor transport ---------------------------------------------------------

// Images of the generator variables induced by base-variable images.
inline std::vector<PDElement> extend_images(const Envelope& src, const Envelope& tgt,
                                            std::vector<PDElement> dirImages) {
  if (dirImages.size() != src.ndirs())
    throw std::invalid_argument("need one image per direction variable");
  for (u64 t = 0; t < src.ngens(); ++t) {
    PDElement f = pd_one(tgt.alg);
    for (u64 i = 0; i < src.nbase; ++i)
      if (src.fs[t][i]) f = pd_mul(tgt.alg, f, pd_pow(tgt.alg, dirImages[i], src.fs[t][i]));
    dirImages.push_back(tgt.normal_form(f));
  }
  return dirImages;
}

namespace detail {

template <typename Step, typename Emit>
inline void taylor_walk(const Envelope& src, const Envelope& tgt,
                        const std::vector<PDElement>& h, u64 cap, u64 dir,
                        const PDMatrix& B, const PDElement& G, Step&& step, Emit&& emit) {
  if (dir == h.size()) {
    emit(B, G);
    return;
  }
  PDMatrix Bk = B;
  for (u64 k = 0;; ++k) {
    PDElement Gk = k == 0 ? G : pd_mul(tgt.alg, G, gamma(tgt.alg, h[dir], k));
    if (!Gk.is_zero())
      taylor_walk(src, tgt, h, cap, dir + 1, Bk, Gk, step, emit);
    Bk = step(dir, Bk);
    if (matrix_in_relations(src, Bk)) break;
    if (k + 1 > cap)
      throw std::runtime_error("taylor transport did not converge within the nilpotence cap");
  }
}

}  // namespace detail

// T[k][j] = sum_E phi1((nabla^E e_j)_k) prod_i gamma_{E_i}(phi2(v_i) - phi1(v_i)),
// reduced to normal form over the target.
inline std::vector<std::vector<PDElement>> taylor_transport(
    const Envelope& src, const Crystal& cr, const Envelope& tgt,
    const std::vector<PDElement>& img1, const std::vector<PDElement>& img2, u64 cap = 0) {
  if (!cap) cap = default_nilpotence_cap(src);
  const u64 n = src.ndirs(), r = cr.rank;
  if (img1.size() != n || img2.size() != n)
    throw std::invalid_argument("need one image per direction variable");
  std::vector<PDElement> h(n);
  for (u64 i = 0; i < n; ++i) {
    h[i] = pd_sub(tgt.alg, img2[i], img1[i]);
    if (!tgt.in_pd_ideal(h[i]))
      throw std::invalid_argument("lift difference is not in the divided-power ideal");
  }
  std::vector<PDElement> full1 = extend_images(src, tgt, img1);

  detail::PDMatrix T(r, std::vector<PDElement>(r));
  detail::taylor_walk(
      src, tgt, h, cap, 0, detail::pd_identity_matrix(src.alg, r), pd_one(tgt.alg),
      [&](u64 dir, const detail::PDMatrix& B) { return detail::nabla_matrix(src, cr, dir, B); },
      [&](const detail::PDMatrix& B, const PDElement& G) {
        for (u64 k = 0; k < r; ++k)
          for (u64 j = 0; j < r; ++j) {
            PDElement t = pd_mul(tgt.alg, apply_hom(src.alg, tgt.alg, full1, B[k][j]), G);
            T[k][j] = pd_add(tgt.alg, T[k][j], t);
          }
      });
  for (auto& row : T)
    for (auto& x : row) x = tgt.normal_form(x);
  return T;
}

// Scalar Taylor expansion: sum_E phi1(d^E f) prod gamma_{E_i}(h_i), which must
// reproduce phi2(f) modulo target relations.
inline PDElement taylor_series(const Envelope& src, const Envelope& tgt,
                               const std::vector<PDElement>& img1,
                               const std::vector<PDElement>& img2, const PDElement& f,
                               u64 cap = 0) {
  if (!cap) cap = default_nilpotence_cap(src);
  const u64 n = src.ndirs();
  std::vector<PDElement> h(n);
  for (u64 i = 0; i < n; ++i) {
    h[i] = pd_sub(tgt.alg, img2[i], img1[i]);
    if (!tgt.in_pd_ideal(h[i]))
      throw std::invalid_argument("lift difference is not in the divided-power ideal");
  }
  std::vector<PDElement> full1 = extend_images(src, tgt, img1);

  PDElement acc;
  detail::PDMatrix F{{f}};
  detail::taylor_walk(
      src, tgt, h, cap, 0, F, pd_one(tgt.alg),
      [&](u64 dir, const detail::PDMatrix& B) {
        return detail::PDMatrix{{src.d_dir(B[0][0], dir)}};
      },
      [&](const detail::PDMatrix& B, const PDElement& G) {
        acc = pd_add(tgt.alg, acc,
                     pd_mul(tgt.alg, apply_hom(src.alg, tgt.alg, full1, B[0][0]), G));
      });
  return tgt.normal_form(acc);
}

}  // namespace pdcrys
