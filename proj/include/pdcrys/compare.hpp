#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>

#include "cechalex.hpp"

namespace pdcrys {

// --- divisor tables ----------------------------------------------------------

// elementary divisor exponents per weight block, ascending within a block
using BlockDivisors = std::map<WeightVec, std::vector<u64>>;

inline BlockDivisors block_divisors(const CohomologyTable& t, u64 maxTotal = ~u64(0)) {
  BlockDivisors out;
  for (const auto& b : t.blocks) {
    if (b.exps.empty() || total_weight(b.w) > maxTotal) continue;
    std::vector<u64> ex = b.exps;
    std::sort(ex.begin(), ex.end());
    out[b.w] = std::move(ex);
  }
  return out;
}

namespace detail {

inline const CohomBlock* find_block(const CohomologyTable& t, const WeightVec& w) {
  for (const auto& b : t.blocks)
    if (b.w == w) return &b;
  return nullptr;
}

// divisors of the presented module itself (window modulo relations), per weight
inline BlockDivisors module_divisors(const Envelope& env, u64 maxTotal) {
  const PrimePower& R = env.alg.R;
  const u64 W = env.window.size();
  std::map<WeightVec, std::vector<u64>> part;
  for (u64 m = 0; m < W; ++m) part[env.alg.mono_weight(env.window.monos[m])].push_back(m);

  BlockDivisors out;
  for (const auto& [w, colIdx] : part) {
    if (total_weight(w) > maxTotal) continue;
    const u64 n = colIdx.size();
    std::map<u64, u64> toLocal;
    for (u64 i = 0; i < n; ++i) toLocal[colIdx[i]] = i;
    std::vector<Vec> found;
    for (const auto& row : env.rel.rows) {
      bool in = false, outside = false;
      Vec loc(n, 0);
      for (u64 j = 0; j < W; ++j) {
        if (!row.v[j]) continue;
        auto it = toLocal.find(j);
        if (it == toLocal.end()) outside = true;
        else {
          loc[it->second] = row.v[j];
          in = true;
        }
      }
      if (in && outside) throw std::logic_error("relation row straddles weight blocks");
      if (in) found.push_back(std::move(loc));
    }
    Dense G(n, Vec(n + found.size(), 0));
    Dense B(n, Vec(found.size(), 0));
    for (u64 i = 0; i < n; ++i) {
      G[i][i] = 1;
      for (u64 t = 0; t < found.size(); ++t) {
        G[i][n + t] = found[t][i];
        B[i][t] = found[t][i];
      }
    }
    Subquotient q = subquotient(G, B, R);
    if (!q.exps.empty()) {
      std::vector<u64> ex = q.exps;
      std::sort(ex.begin(), ex.end());
      out[w] = std::move(ex);
    }
  }
  return out;
}

}  // namespace detail

// --- relative de Rham complex --------------------------------------------------

// de Rham complex in the directions [dirLo, ndirs) only, coefficients in the
// whole envelope; the directions below dirLo become scalars.
inline CochainComplex relative_derham_complex(const Envelope& env, u64 dirLo) {
  const PDAlgebra& alg = env.alg;
  const PrimePower& R = alg.R;
  const u64 n = env.ndirs();
  if (dirLo > n) throw std::invalid_argument("relative directions out of range");
  const u64 nrel = n - dirLo;
  const u64 W = env.window.size();

  CochainComplex c;
  c.R = R;
  c.lo = 0;
  std::vector<std::vector<u64>> masks(nrel + 1);
  std::vector<std::map<u64, u64>> maskIndex(nrel + 1);
  for (u64 k = 0; k <= nrel; ++k) {
    masks[k] = detail::subsets_of_size(nrel, k);
    for (u64 s = 0; s < masks[k].size(); ++s) maskIndex[k][masks[k][s]] = s;
    c.ranks.push_back(masks[k].size() * W);
  }

  c.weights.resize(nrel + 1);
  c.rels.resize(nrel + 1);
  for (u64 k = 0; k <= nrel; ++k)
    for (u64 s = 0; s < masks[k].size(); ++s) {
      WeightVec dxw(alg.weight_len(), 0);
      for (u64 i = 0; i < nrel; ++i)
        if (masks[k][s] >> i & 1)
          for (size_t j = 0; j < dxw.size(); ++j) dxw[j] += alg.weights[dirLo + i][j];
      for (u64 j = 0; j < W; ++j) {
        WeightVec w = alg.mono_weight(env.window.monos[j]);
        for (size_t q = 0; q < w.size(); ++q) w[q] += dxw[q];
        c.weights[k].push_back(w);
      }
      for (const auto& row : env.rel.rows) {
        Vec wide(masks[k].size() * W, 0);
        for (u64 j = 0; j < W; ++j) wide[s * W + j] = row.v[j];
        c.rels[k].push_back(std::move(wide));
      }
    }

  for (u64 k = 0; k < nrel; ++k) {
    SparseMatrix d(masks[k + 1].size() * W, masks[k].size() * W);
    for (u64 s = 0; s < masks[k].size(); ++s) {
      u64 mask = masks[k][s];
      for (u64 j = 0; j < W; ++j) {
        PDElement mu = pd_mono(alg, env.window.monos[j], 1);
        for (u64 i = 0; i < nrel; ++i) {
          if (mask >> i & 1) continue;
          PDElement der = env.d_dir(mu, dirLo + i);
          if (der.is_zero()) continue;
          int sign = detail::insert_sign(mask, i);
          u64 ts = maskIndex[k + 1].at(mask | (u64(1) << i));
          for (const auto& [tm, tc] : der.terms)
            d.add_to(ts * W + env.window.index.at(tm), s * W + j,
                     sign > 0 ? tc : R.reduce(R.q - tc), R);
        }
      }
    }
    c.diffs.push_back(std::move(d));
  }
  return c;
}

// --- contractibility of one thickening level ------------------------------------

// The relative de Rham complex of D(1) over D(0) should be a resolution of the
// base module: H^0 = D(0) per weight, H^{>=1} = 0, on blocks of total weight
// within the window, stably under a window bump.
struct PoincareReport {
  u64 window = 0, margin = 0, relativeDirections = 0;
  std::vector<BlockDivisors> h;  // degrees 0..relativeDirections at the base window
  BlockDivisors expectedH0;
  bool pass = false, stable = false;
};

inline PoincareReport poincare_check(const EnvelopeSpec& base, u64 margin = 2) {
  PoincareReport rep;
  rep.window = base.degree;
  rep.margin = margin;

  auto tables = [&](u64 window) {
    EnvelopeSpec s = base;
    s.degree = window;
    CaTower t = ca_tower(s, 1);
    const Envelope& lv1 = t.lv[1];
    const u64 dirLo = lv1.ndirs() - t.nbase();
    CochainComplex c = relative_derham_complex(lv1, dirLo);
    validate(c);
    std::vector<BlockDivisors> h;
    for (u64 k = 0; k <= lv1.ndirs() - dirLo; ++k)
      h.push_back(block_divisors(cohomology(c, i64(k)), base.degree));
    return std::pair{std::move(h), detail::module_divisors(t.lv[0], base.degree)};
  };

  auto [hLo, expLo] = tables(base.degree);
  auto [hHi, expHi] = tables(base.degree + margin);
  rep.relativeDirections = hLo.size() - 1;
  rep.h = hLo;
  rep.expectedH0 = expLo;

  auto good = [](const std::vector<BlockDivisors>& h, const BlockDivisors& expect) {
    if (h.empty() || h[0] != expect) return false;
    for (size_t k = 1; k < h.size(); ++k)
      if (!h[k].empty()) return false;
    return true;
  };
  rep.stable = hLo == hHi && expLo == expHi;
  rep.pass = good(hLo, expLo) && good(hHi, expHi) && rep.stable;
  return rep;
}

// --- main comparison -------------------------------------------------------------

using CrystalMaker = std::function<Crystal(const Envelope&)>;

struct CompareWindow {
  u64 window = 0;
  std::vector<BlockDivisors> derham, total, sections;  // degrees 0..maxDegree
  bool sidesEqual = false;
  bool derhamOnto = false;   // totalization classes project onto de Rham classes
  bool sectionsOnto = false; // ... and onto the section-row classes
};

struct CompareReport {
  u64 levels = 0, margin = 0;
  i64 maxDegree = 0;
  CompareWindow lo, hi;
  bool stable = false;
  bool pass = false;
};

namespace detail {

// The monomial window is stable under d (degree drops) but not under
// multiplication, so a complex whose differential multiplies by positive-weight
// elements satisfies d o d = 0 only on columns of total weight within the
// window; heavier columns lose edge terms to truncation.  Validate shapes,
// homogeneity, and exactness on the trusted columns.
inline void validate_trusted(const CochainComplex& c, u64 trust) {
  if (c.weights.empty()) {
    validate(c);
    return;
  }
  if (c.ranks.empty()) throw std::logic_error("complex has no terms");
  if (c.diffs.size() + 1 != c.ranks.size())
    throw std::logic_error("complex needs exactly one differential per adjacent pair");
  for (size_t i = 0; i < c.diffs.size(); ++i)
    if (c.diffs[i].rows != c.ranks[i + 1] || c.diffs[i].cols != c.ranks[i])
      throw std::logic_error("differential shape mismatch at index " + std::to_string(i));
  for (size_t i = 0; i < c.ranks.size(); ++i)
    if (c.weights[i].size() != c.ranks[i])
      throw std::logic_error("weight labels missing at index " + std::to_string(i));
  for (size_t i = 0; i < c.diffs.size(); ++i)
    for (const auto& [rc, v] : c.diffs[i].entries)
      if (c.weights[i + 1][rc.first] != c.weights[i][rc.second])
        throw std::logic_error("differential is not weight-preserving at index " +
                               std::to_string(i));
  for (i64 k = c.lo; k + 2 <= c.hi(); ++k) {
    SparseMatrix dd = c.diff(k + 1).mul(c.diff(k), c.R);
    EchelonSpan sp = rel_span(c, k + 2);
    for (u64 j = 0; j < dd.cols; ++j) {
      if (total_weight(c.weights[k - c.lo][j]) > trust) continue;
      Vec v = dd.col(j);
      if (!sp.contains(v))
        throw std::logic_error("d o d != 0 on a trusted column at degree " + std::to_string(k));
    }
  }
  for (i64 k = c.lo; k < c.hi(); ++k) {
    const Dense* r = c.rels_at(k);
    if (!r) continue;
    EchelonSpan sp = rel_span(c, k + 1);
    SparseMatrix d = c.diff(k);
    for (const auto& row : *r) {
      u64 w = 0;
      for (u64 j = 0; j < row.size(); ++j)
        if (row[j]) {
          w = total_weight(c.weights[k - c.lo][j]);
          break;
        }
      if (w > trust) continue;
      Vec img = d.apply(row, c.R);
      if (!sp.contains(img))
        throw std::logic_error("relations not preserved by d at degree " + std::to_string(k));
    }
  }
}

inline SparseMatrix slice_projection(u64 tgtRank, u64 totRank, u64 off) {
  SparseMatrix p(tgtRank, totRank);
  for (u64 i = 0; i < tgtRank; ++i) p.entries[{i, off + i}] = 1;
  return p;
}

// coordinate slices out of the totalization must commute with the
// differentials on the nose; a failure here is a layout bug, not mathematics
inline void require_chain_map(const CochainComplex& tot, const CochainComplex& tgt,
                              const std::vector<u64>& offs, i64 kHi, const char* what) {
  for (i64 k = 0; k <= kHi; ++k) {
    SparseMatrix pk = slice_projection(tgt.rank(k), tot.rank(k), offs[k]);
    SparseMatrix pk1 = slice_projection(tgt.rank(k + 1), tot.rank(k + 1), offs[k + 1]);
    if (!(tgt.diff(k).mul(pk, tgt.R) == pk1.mul(tot.diff(k), tgt.R)))
      throw std::logic_error(std::string("projection fails to commute with d: ") + what);
  }
}

// push every class of the totalization through the coordinate slice and check
// the images generate the target cohomology blockwise
inline bool projection_generates(const CohomologyTable& totTable, u64 off, u64 width,
                                 const CochainComplex& tgt, i64 k,
                                 const CohomologyTable& tgtTable, u64 trust,
                                 const PrimePower& R) {
  for (const auto& tb : tgtTable.blocks)
    if (total_weight(tb.w) <= trust && !find_block(totTable, tb.w)) return false;

  auto partK = column_blocks(tgt, k);
  for (const auto& sb : totTable.blocks) {
    if (total_weight(sb.w) > trust) continue;
    const CohomBlock* tb = find_block(tgtTable, sb.w);
    if (!tb) return false;
    auto bK = local_block(partK, sb.w);
    const u64 s = sb.exps.size(), m = tb->exps.size();
    Dense M(m, Vec(s + m, 0));
    for (u64 cls = 0; cls < s; ++cls) {
      Vec localX(bK.cols.size(), 0);
      for (u64 i = 0; i < sb.cols.size(); ++i) {
        const u64 gcol = sb.cols[i];
        if (gcol < off || gcol >= off + width) continue;
        auto it = bK.toLocal.find(gcol - off);
        if (it == bK.toLocal.end()) {
          if (sb.reps[i][cls]) return false;  // weight leak
          continue;
        }
        localX[it->second] = sb.reps[i][cls];
      }
      auto co = class_coords(*tb, localX, R);
      if (!co) return false;
      for (u64 row = 0; row < m; ++row) M[row][cls] = (*co)[row];
    }
    for (u64 i = 0; i < m; ++i) M[i][s + i] = R.reduce(R.ipow(tb->exps[i]));
    SnfResult sr = snf(SparseMatrix::from_dense(M), R);
    for (u64 i = 0; i < m; ++i)
      if (sr.dvals[i] != 0) return false;
  }
  return true;
}

}  // namespace detail

// Compare, blockwise on trusted weights, the cohomology of (a) the de Rham
// complex of the crystal, (b) the totalization of the double complex, (c) the
// Cech-Alexander section row, in degrees 0..min(levels-1, base directions).
// The slices Tot -> (a) and Tot -> (c) are chain maps; equality of divisor
// tables plus surjectivity of both slices on classes certifies isomorphy.
// Everything is recomputed at window + margin; pass requires agreement.
inline CompareReport compare_derham_ca(const EnvelopeSpec& base, const CrystalMaker& maker,
                                       u64 levels, u64 margin = 2) {
  if (levels < 1) throw std::invalid_argument("comparison needs at least one level");
  CompareReport rep;
  rep.levels = levels;
  rep.margin = margin;
  rep.maxDegree = std::min<i64>(i64(levels) - 1, i64(base.ordNames.size()));

  auto runWindow = [&](u64 window, CompareWindow* out) {
    EnvelopeSpec s = base;
    s.degree = window;
    CaTower t = ca_tower(s, levels);
    Crystal cr = maker ? maker(t.lv[0]) : trivial_crystal(t.lv[0]);
    if (!check_integrability(t.lv[0], cr))
      throw std::invalid_argument("comparison: connection is not integrable");
    if (!check_quasi_nilpotent(t.lv[0], cr))
      throw std::invalid_argument("comparison: connection is not quasi-nilpotent");

    CochainComplex dr = crystal_complex(t.lv[0], cr);
    auto [tot, lay] = ca_total_complex(t, cr);
    CochainComplex row = ca_complex(t, cr);
    detail::validate_trusted(dr, base.degree);
    detail::validate_trusted(tot, base.degree);
    detail::validate_trusted(row, base.degree);

    const i64 kHi = rep.maxDegree;
    const PrimePower& R = dr.R;
    std::vector<u64> drOff(kHi + 2, 0), rowOff(kHi + 2, 0);
    for (i64 k = 0; k <= kHi + 1; ++k)
      for (const auto& p : lay.pieces[k]) {
        if (p.n == 0 && i64(p.j) == k) drOff[k] = p.offset;
        if (p.j == 0 && i64(p.n) == k) rowOff[k] = p.offset;
      }
    detail::require_chain_map(tot, dr, drOff, kHi, "de Rham slice");
    detail::require_chain_map(tot, row, rowOff, kHi, "section-row slice");

    out->window = window;
    out->sidesEqual = true;
    out->derhamOnto = true;
    out->sectionsOnto = true;
    for (i64 k = 0; k <= kHi; ++k) {
      CohomologyTable hd = cohomology(dr, k, base.degree);
      CohomologyTable ht = cohomology(tot, k, base.degree);
      CohomologyTable hr = cohomology(row, k, base.degree);
      out->derham.push_back(block_divisors(hd, base.degree));
      out->total.push_back(block_divisors(ht, base.degree));
      out->sections.push_back(block_divisors(hr, base.degree));
      if (out->derham[k] != out->total[k] || out->total[k] != out->sections[k])
        out->sidesEqual = false;
      if (!detail::projection_generates(ht, drOff[k], dr.rank(k), dr, k, hd, base.degree, R))
        out->derhamOnto = false;
      if (!detail::projection_generates(ht, rowOff[k], row.rank(k), row, k, hr, base.degree, R))
        out->sectionsOnto = false;
    }
  };

  runWindow(base.degree, &rep.lo);
  runWindow(base.degree + margin, &rep.hi);
  rep.stable = rep.lo.derham == rep.hi.derham && rep.lo.total == rep.hi.total &&
               rep.lo.sections == rep.hi.sections;
  rep.pass = rep.lo.sidesEqual && rep.hi.sidesEqual && rep.lo.derhamOnto &&
             rep.lo.sectionsOnto && rep.hi.derhamOnto && rep.hi.sectionsOnto && rep.stable;
  return rep;
}

// --- integral tables through the precision tower ----------------------------------

using ComplexBuilder = std::function<CochainComplex(u64 /*precision*/)>;

// one summand of an integral cohomology group: free, or torsion of the given
// exponent (torsion is certified only up to the classification precision)
struct IntegralSummand {
  u64 exp = 0;
  bool free = false;
  bool operator==(const IntegralSummand&) const = default;
};

using IntegralBlocks = std::map<WeightVec, std::vector<IntegralSummand>>;

struct IntegralTables {
  bool conclusive = false;
  u64 classifyPrecision = 0;
  std::map<i64, IntegralBlocks> h;
  std::string note;
};

namespace detail {

struct PrecisionCache {
  const ComplexBuilder* build = nullptr;
  std::map<u64, CochainComplex> cx;
  std::map<std::pair<u64, i64>, CohomologyTable> hx;

  const CochainComplex& complex_at(u64 prec) {
    auto it = cx.find(prec);
    if (it == cx.end()) it = cx.emplace(prec, (*build)(prec)).first;
    return it->second;
  }
  const CohomologyTable& cohomology_at(u64 prec, i64 k) {
    auto key = std::make_pair(prec, k);
    auto it = hx.find(key);
    if (it == hx.end()) it = hx.emplace(key, cohomology(complex_at(prec), k)).first;
    return it->second;
  }
};

// divisors of the image of H^k computed at higher precision inside the table
// at the target precision; the column layouts agree monomial-by-monomial
inline BlockDivisors reduced_image_divisors(const CochainComplex& cT, const CohomologyTable& src,
                                            i64 k, u64 trust) {
  const PrimePower& R = cT.R;
  auto partK = column_blocks(cT, k);
  auto partKm = column_blocks(cT, k - 1);
  SparseMatrix dkm = cT.diff(k - 1);
  BlockDivisors out;
  for (const auto& blk : src.blocks) {
    if (total_weight(blk.w) > trust) continue;
    auto bK = local_block(partK, blk.w);
    auto bKm = local_block(partKm, blk.w);
    if (bK.cols != blk.cols) throw std::logic_error("precision tower: window layout drifted");
    const u64 n = bK.cols.size();
    Dense dkmLoc = local_diff(dkm, bK, bKm);
    Dense relK = local_rel_cols(cT, k, bK);
    const u64 nrel = relK.empty() || relK[0].empty() ? 0 : relK[0].size();
    const u64 nb = bKm.cols.size() + nrel;
    const u64 s = blk.exps.size();
    Dense G(n, Vec(s + nb, 0));
    Dense B(n, Vec(nb, 0));
    for (u64 i = 0; i < n; ++i) {
      for (u64 j = 0; j < s; ++j) G[i][j] = blk.reps[i][j] % R.q;
      for (u64 j = 0; j < bKm.cols.size(); ++j) {
        G[i][s + j] = dkmLoc[i][j];
        B[i][j] = dkmLoc[i][j];
      }
      for (u64 tcol = 0; tcol < nrel; ++tcol) {
        G[i][s + bKm.cols.size() + tcol] = relK[i][tcol];
        B[i][bKm.cols.size() + tcol] = relK[i][tcol];
      }
    }
    Subquotient q = subquotient(G, B, R);
    if (!q.exps.empty()) {
      std::vector<u64> ex = q.exps;
      std::sort(ex.begin(), ex.end());
      out[blk.w] = std::move(ex);
    }
  }
  return out;
}

struct StableImage {
  bool stabilized = false;
  BlockDivisors divisors;
  u64 sourcePrecision = 0;
};

// the images at rising source precision are nested and decreasing, so two
// consecutive agreements certify the limit
inline StableImage stable_image(PrecisionCache& cache, u64 tgt, i64 k, u64 trust, u64 capPrec) {
  const CochainComplex& cT = cache.complex_at(tgt);
  StableImage out;
  std::optional<BlockDivisors> prev;
  u64 agree = 0;
  for (u64 src = tgt + 1; src <= capPrec; ++src) {
    BlockDivisors cur = reduced_image_divisors(cT, cache.cohomology_at(src, k), k, trust);
    if (prev && *prev == cur) {
      if (++agree >= 2) {
        out.stabilized = true;
        out.divisors = std::move(cur);
        out.sourcePrecision = src;
        return out;
      }
    } else {
      agree = 0;
    }
    prev = std::move(cur);
  }
  if (prev) out.divisors = std::move(*prev);
  out.sourcePrecision = capPrec;
  return out;
}

}  // namespace detail

// Recover the integral (limit) cohomology tables of a family of complexes
// parameterized by coefficient precision: stabilized images at two consecutive
// target precisions tell free and torsion summands apart.
inline IntegralTables integral_tables(const ComplexBuilder& build, i64 kHi, u64 e, u64 ep,
                                      u64 trust, u64 capPrec = 0) {
  IntegralTables out;
  const u64 t0 = std::max(e, ep) + 2;
  if (!capPrec) capPrec = t0 + 8;
  out.classifyPrecision = t0;
  out.conclusive = true;
  detail::PrecisionCache cache;
  cache.build = &build;

  for (i64 k = 0; k <= kHi; ++k) {
    detail::StableImage lo = detail::stable_image(cache, t0, k, trust, capPrec);
    detail::StableImage hi = detail::stable_image(cache, t0 + 1, k, trust, capPrec + 1);
    if (!lo.stabilized || !hi.stabilized) {
      out.conclusive = false;
      out.note = "image tower did not stabilize below the precision cap";
      continue;
    }
    std::set<WeightVec> ws;
    for (const auto& [w, ex] : lo.divisors) ws.insert(w);
    for (const auto& [w, ex] : hi.divisors) ws.insert(w);
    IntegralBlocks blocks;
    for (const auto& w : ws) {
      auto li = lo.divisors.find(w);
      auto hj = hi.divisors.find(w);
      if (li == lo.divisors.end() || hj == hi.divisors.end() ||
          li->second.size() != hj->second.size()) {
        out.conclusive = false;
        out.note = "summand counts disagree across target precisions";
        continue;
      }
      std::vector<IntegralSummand> sm;
      for (size_t i = 0; i < li->second.size(); ++i) {
        const u64 a = li->second[i], b = hj->second[i];
        if (a < t0 && b == a) sm.push_back({a, false});
        else if (a == t0 && b == t0 + 1) sm.push_back({0, true});
        else if (a == t0 && b == t0) sm.push_back({t0, false});
        else {
          out.conclusive = false;
          out.note = "summand classification inconsistent across target precisions";
        }
      }
      if (!sm.empty()) blocks[w] = std::move(sm);
    }
    out.h[k] = std::move(blocks);
  }
  return out;
}

// --- derived reduction check -------------------------------------------------------

// Reduce the integral tables to precision ep by the universal coefficient
// rule: a free summand contributes Z/p^ep in its own degree; a torsion summand
// Z/p^a contributes Z/p^min(a,ep) in its own degree and again one degree
// lower.  The degree -1 prediction is the obstruction: the direct computation
// at precision ep has nothing there, so any torsion in H^0 forces a mismatch.
struct BaseChangeReport {
  bool conclusive = false;
  bool tablesMatch = false;
  bool pass = false;
  BlockDivisors obstruction;               // predicted classes below degree zero
  std::map<i64, BlockDivisors> predicted;  // degrees -1..kHi
  std::map<i64, BlockDivisors> direct;     // ditto; degree -1 always empty
  IntegralTables integral;
};

inline BaseChangeReport base_change_check(const ComplexBuilder& build, i64 kHi, u64 e, u64 ep,
                                          u64 trust, u64 capPrec = 0) {
  if (ep == 0 || ep >= e) throw std::invalid_argument("derived reduction wants 1 <= ep < e");
  BaseChangeReport rep;
  rep.integral = integral_tables(build, kHi + 1, e, ep, trust, capPrec);
  rep.conclusive = rep.integral.conclusive;

  auto summands_of = [&](i64 k) -> const IntegralBlocks* {
    auto it = rep.integral.h.find(k);
    return it == rep.integral.h.end() ? nullptr : &it->second;
  };
  for (i64 k = -1; k <= kHi; ++k) {
    BlockDivisors pred;
    if (k >= 0)
      if (const IntegralBlocks* own = summands_of(k))
        for (const auto& [w, sm] : *own)
          for (const auto& s : sm) pred[w].push_back(s.free ? ep : std::min(s.exp, ep));
    if (const IntegralBlocks* up = summands_of(k + 1))
      for (const auto& [w, sm] : *up)
        for (const auto& s : sm)
          if (!s.free) pred[w].push_back(std::min(s.exp, ep));
    for (auto& [w, ex] : pred) std::sort(ex.begin(), ex.end());
    rep.predicted[k] = std::move(pred);
  }
  rep.obstruction = rep.predicted.at(-1);

  CochainComplex cd = build(ep);
  rep.direct[-1] = {};
  bool match = rep.predicted.at(-1).empty();
  for (i64 k = 0; k <= kHi; ++k) {
    rep.direct[k] = block_divisors(cohomology(cd, k), trust);
    if (rep.predicted.at(k) != rep.direct.at(k)) match = false;
  }
  rep.tablesMatch = match;
  rep.pass = rep.conclusive && rep.tablesMatch;
  return rep;
}

// --- torsion on the quadric cone -----------------------------------------------------

// The divided-power neighbourhood of (p, x^2, xy, y^2) has p-torsion
// horizontal classes at every window: they make the reduction to lower
// precision lossy.  Most are top-power classes (p^{e-1} times a unit section);
// the distinguished one, tau = gamma_p(g1) gamma_p(g3) - binom(2p,p)
// gamma_{2p}(g2) at weight (2p, 2p), is not a multiple of p at all.  Its
// monomials carry total weight 4p, so it enters the window at d >= 4p; below
// that the experiment certifies the table of visible torsion classes instead.
struct TorsionWindow {
  u64 window = 0;
  BlockDivisors table;       // torsion-class divisors, total weight <= trust
  u64 classes = 0;           // summand count across `table`
  u64 genuineClasses = 0;    // classes outside p^{e-1}*module + relations
  bool found = false;
};

struct TorsionReport {
  u64 p = 0, e = 0, margin = 0;
  TorsionWindow lo, hi;       // hi is filtered to the base window's weights
  bool stable = false;        // identical trusted tables across the window bump
  bool coneNegative = false;  // mod-p cone has classes below degree zero
  WeightVec candidateWeight;  // (2p, 2p)
  bool candidateVisible = false;  // 4p <= d
  std::string candidateElement;   // textual form, set when visible
  bool candidateNonzero = false, candidatePKills = false, candidateHorizontal = false;
  bool candidateClassNonzero = false, candidateGenuine = false;
  // whether some trusted class is the reduction of a p-torsion class one
  // precision higher: true for integral torsion (the distinguished class),
  // false for top-power classes, which p^{e+1} = 0 no longer rescues
  bool liftsToNextPrecision = false;
  bool pass = false;
};

inline TorsionReport quadric_torsion_experiment(u64 p, u64 e, u64 d, u64 margin = 2) {
  if (e < 2) throw std::invalid_argument("torsion experiment wants precision >= 2");
  if (d < 4) throw std::invalid_argument("torsion experiment wants window >= 4");
  TorsionReport rep;
  rep.p = p;
  rep.e = e;
  rep.margin = margin;
  rep.candidateWeight = {u32(2 * p), u32(2 * p)};
  rep.candidateVisible = 4 * p <= d;

  auto quadric = [&](u64 window, u64 prec) {
    return envelope_monomial(PrimePower(p, prec), window, {"x", "y"}, {"g1", "g2", "g3"},
                             {Monomial{2, 0}, Monomial{1, 1}, Monomial{0, 2}});
  };

  auto runWindow = [&](const TorsionHorizontal& th, u64 window, TorsionWindow* out) {
    out->window = window;
    u64 idx = 0;
    for (const auto& blk : th.table.blocks) {
      if (total_weight(blk.w) <= d && !blk.exps.empty()) {
        std::vector<u64> ex = blk.exps;
        std::sort(ex.begin(), ex.end());
        out->table[blk.w] = std::move(ex);
        out->classes += blk.exps.size();
        for (size_t i = 0; i < blk.exps.size(); ++i)
          if (!th.inTopPower[idx + i]) ++out->genuineClasses;
      }
      idx += blk.exps.size();
    }
    out->found = out->classes > 0;
  };

  Envelope envLo = quadric(d, e);
  Crystal crLo = trivial_crystal(envLo);
  TorsionHorizontal thLo = torsion_horizontal(envLo, crLo);
  runWindow(thLo, d, &rep.lo);

  Envelope envHi = quadric(d + margin, e);
  TorsionHorizontal thHi = torsion_horizontal(envHi, trivial_crystal(envHi));
  runWindow(thHi, d + margin, &rep.hi);
  rep.stable = rep.lo.table == rep.hi.table;

  CochainComplex cone = derived_mod_p(derham_complex(envLo), 1);
  CohomologyTable neg = cohomology(cone, -1, d);
  for (const auto& b : neg.blocks)
    if (!b.exps.empty() && total_weight(b.w) <= d) rep.coneNegative = true;

  if (rep.candidateVisible) {
    const PDAlgebra& alg = envLo.alg;
    const PrimePower& R = alg.R;
    Monomial m1(alg.nvars(), 0), m2(alg.nvars(), 0);
    m1[envLo.gen_var(0)] = std::uint8_t(p);
    m1[envLo.gen_var(2)] = std::uint8_t(p);
    m2[envLo.gen_var(1)] = std::uint8_t(2 * p);
    u64 binom = 1;
    for (u64 i = 1; i <= p; ++i) binom = binom * (p + i) / i;
    PDElement tau = pd_sub(alg, pd_mono(alg, m1, 1), pd_mono(alg, m2, R.reduce(binom)));
    rep.candidateElement = to_string(alg, tau);

    rep.candidateNonzero = !envLo.in_relations(tau);
    rep.candidatePKills = envLo.in_relations(pd_scale(alg, R.reduce(R.p), tau));
    rep.candidateHorizontal = true;
    for (u64 i = 0; i < envLo.ndirs(); ++i)
      if (!envLo.in_relations(envLo.d_dir(tau, i))) rep.candidateHorizontal = false;
    if (const CohomBlock* blk = detail::find_block(thLo.table, rep.candidateWeight)) {
      Vec global = envLo.window.to_vec(tau);
      Vec localX(blk->cols.size(), 0);
      for (u64 i = 0; i < blk->cols.size(); ++i) localX[i] = global[blk->cols[i]];
      auto co = class_coords(*blk, localX, R);
      rep.candidateClassNonzero = co.has_value() && !vec_is_zero(*co);
    }
    Dense spanRows;
    const u64 top = R.reduce(R.ipow(R.e - 1));
    for (u64 cidx = 0; cidx < envLo.window.size(); ++cidx) {
      Vec v(envLo.window.size(), 0);
      v[cidx] = top;
      spanRows.push_back(std::move(v));
    }
    for (const auto& row : envLo.rel.rows) spanRows.push_back(row.v);
    EchelonSpan span(envLo.window.size(), R);
    span.build(spanRows);
    rep.candidateGenuine = !span.contains(envLo.window.to_vec(tau));
  }

  {
    Envelope envUp = quadric(d, e + 1);
    std::vector<bool> flags = torsion_lift_flags(envLo, crLo, thLo, envUp, trivial_crystal(envUp));
    u64 idx = 0;
    for (const auto& blk : thLo.table.blocks) {
      for (size_t cls = 0; cls < blk.exps.size(); ++cls, ++idx)
        if (total_weight(blk.w) <= d && flags[idx]) rep.liftsToNextPrecision = true;
    }
  }

  const bool candidateGood = !rep.candidateVisible ||
                             (rep.candidateNonzero && rep.candidatePKills &&
                              rep.candidateHorizontal && rep.candidateClassNonzero &&
                              rep.candidateGenuine);
  rep.pass = rep.lo.found && rep.stable && rep.coneNegative && candidateGood;
  return rep;
}

}  // namespace pdcrys
