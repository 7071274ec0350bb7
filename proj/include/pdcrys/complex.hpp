#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "parallel.hpp"
#include "ring.hpp"
#include "sparse_matrix.hpp"

namespace pdcrys {

// Multidegree label: one entry per variable group.  Empty = ungraded.
using WeightVec = std::vector<u32>;

inline u64 total_weight(const WeightVec& w) {
  u64 t = 0;
  for (u32 x : w) t += x;
  return t;
}

// Bounded cochain complex of finitely presented Z/p^e-modules.  Each term is
// given by a free cover of rank ranks[i]; the optional rels[i] rows present
// honest torsion in the term (term = R^rank / rowspan).  Optional weight
// labels on free-cover columns let cohomology run block-per-multidegree;
// every differential and every relation row must then be weight-homogeneous.
struct CochainComplex {
  PrimePower R;
  i64 lo = 0;
  std::vector<u64> ranks;
  std::vector<SparseMatrix> diffs;                  // diffs[i] : term lo+i -> term lo+i+1
  std::vector<Dense> rels;                          // optional, rows per term
  std::vector<std::vector<WeightVec>> weights;      // optional, per column

  i64 hi() const { return lo + i64(ranks.size()) - 1; }
  bool in_range(i64 k) const { return k >= lo && k <= hi(); }
  u64 rank(i64 k) const { return in_range(k) ? ranks[size_t(k - lo)] : 0; }

  const Dense* rels_at(i64 k) const {
    if (!in_range(k) || rels.empty()) return nullptr;
    const Dense& r = rels[size_t(k - lo)];
    return r.empty() ? nullptr : &r;
  }

  const std::vector<WeightVec>* weights_at(i64 k) const {
    if (!in_range(k) || weights.empty()) return nullptr;
    return &weights[size_t(k - lo)];
  }

  // d_k as a matrix rank(k+1) x rank(k); zero at the ends.
  SparseMatrix diff(i64 k) const {
    if (in_range(k) && k < hi()) return diffs[size_t(k - lo)];
    return SparseMatrix(rank(k + 1), rank(k));
  }
};

namespace detail {

inline EchelonSpan rel_span(const CochainComplex& c, i64 k) {
  EchelonSpan sp(c.rank(k), c.R);
  if (const Dense* r = c.rels_at(k)) sp.build(*r);
  return sp;
}

}  // namespace detail

// Structural validation: shapes, d o d = 0 modulo relations, relations mapped
// into relations, and weight homogeneity.  Throws std::logic_error on defect.
inline void validate(const CochainComplex& c) {
  if (c.ranks.empty()) throw std::logic_error("complex has no terms");
  if (c.diffs.size() + 1 != c.ranks.size())
    throw std::logic_error("complex needs exactly one differential per adjacent pair");
  if (!c.rels.empty() && c.rels.size() != c.ranks.size())
    throw std::logic_error("relation list length mismatch");
  if (!c.weights.empty() && c.weights.size() != c.ranks.size())
    throw std::logic_error("weight list length mismatch");

  for (size_t i = 0; i < c.diffs.size(); ++i) {
    if (c.diffs[i].rows != c.ranks[i + 1] || c.diffs[i].cols != c.ranks[i])
      throw std::logic_error("differential shape mismatch at index " + std::to_string(i));
  }
  if (!c.weights.empty()) {
    for (size_t i = 0; i < c.ranks.size(); ++i)
      if (c.weights[i].size() != c.ranks[i])
        throw std::logic_error("weight labels missing at index " + std::to_string(i));
    for (size_t i = 0; i < c.diffs.size(); ++i)
      for (const auto& [rc, v] : c.diffs[i].entries)
        if (c.weights[i + 1][rc.first] != c.weights[i][rc.second])
          throw std::logic_error("differential is not weight-preserving at index " + std::to_string(i));
  }
  for (size_t i = 0; i < c.ranks.size(); ++i) {
    if (c.rels.empty()) break;
    for (const auto& row : c.rels[i]) {
      if (row.size() != c.ranks[i]) throw std::logic_error("relation row width mismatch");
      if (!c.weights.empty()) {
        const WeightVec* w = nullptr;
        for (u64 j = 0; j < row.size(); ++j)
          if (row[j]) {
            if (!w) w = &c.weights[i][j];
            else if (*w != c.weights[i][j])
              throw std::logic_error("relation row is not weight-homogeneous");
          }
      }
    }
  }
  for (i64 k = c.lo; k + 2 <= c.hi(); ++k) {
    SparseMatrix dd = c.diff(k + 1).mul(c.diff(k), c.R);
    EchelonSpan sp = detail::rel_span(c, k + 2);
    for (u64 j = 0; j < dd.cols; ++j) {
      Vec v = dd.col(j);
      if (!sp.contains(v)) throw std::logic_error("d o d != 0 at degree " + std::to_string(k));
    }
  }
  for (i64 k = c.lo; k < c.hi(); ++k) {
    const Dense* r = c.rels_at(k);
    if (!r) continue;
    EchelonSpan sp = detail::rel_span(c, k + 1);
    SparseMatrix d = c.diff(k);
    for (const auto& row : *r) {
      Vec img = d.apply(row, c.R);
      if (!sp.contains(img))
        throw std::logic_error("relations not preserved by d at degree " + std::to_string(k));
    }
  }
}

// One multidegree block of a cohomology module: elementary divisor exponents
// (ascending, as SNF emits them), representative cocycles in local block
// coordinates, and the boundary generators needed to take class coordinates.
struct CohomBlock {
  WeightVec w;
  std::vector<u64> cols;   // global free-cover columns of the block
  std::vector<u64> exps;   // summand Z/p^exps[i], each in [1, e]
  Dense reps;              // cols.size() x exps.size()
  Dense bgens;             // boundary + relation generators, local columns
};

struct CohomologyTable {
  i64 degree = 0;
  PrimePower R;
  std::vector<CohomBlock> blocks;  // sorted by weight vector

  // divisor exponents of the whole degree, descending
  std::vector<u64> divisors() const {
    std::vector<u64> d;
    for (const auto& b : blocks) d.insert(d.end(), b.exps.begin(), b.exps.end());
    std::sort(d.rbegin(), d.rend());
    return d;
  }

  u64 length() const {
    u64 t = 0;
    for (const auto& b : blocks)
      for (u64 x : b.exps) t += x;
    return t;
  }
};

namespace detail {

inline std::map<WeightVec, std::vector<u64>> column_blocks(const CochainComplex& c, i64 k) {
  std::map<WeightVec, std::vector<u64>> out;
  const auto* w = c.weights_at(k);
  for (u64 j = 0; j < c.rank(k); ++j) out[w ? (*w)[j] : WeightVec{}].push_back(j);
  return out;
}

struct LocalBlock {
  std::vector<u64> cols;
  std::map<u64, u64> toLocal;
};

inline LocalBlock local_block(const std::map<WeightVec, std::vector<u64>>& part, const WeightVec& w) {
  LocalBlock b;
  auto it = part.find(w);
  if (it != part.end()) {
    b.cols = it->second;
    for (u64 i = 0; i < b.cols.size(); ++i) b.toLocal[b.cols[i]] = i;
  }
  return b;
}

// relation rows of degree k restricted to a block, as local column vectors
inline Dense local_rel_cols(const CochainComplex& c, i64 k, const LocalBlock& b) {
  Dense cols(b.cols.size(), Vec{});
  const Dense* r = c.rels_at(k);
  if (!r || b.cols.empty()) {
    cols.assign(b.cols.size(), Vec{});
    return cols;
  }
  std::vector<Vec> found;
  for (const auto& row : *r) {
    bool inBlock = false, outside = false;
    Vec loc(b.cols.size(), 0);
    for (u64 j = 0; j < row.size(); ++j) {
      if (!row[j]) continue;
      auto it = b.toLocal.find(j);
      if (it == b.toLocal.end()) outside = true;
      else { loc[it->second] = row[j]; inBlock = true; }
    }
    if (inBlock && outside) throw std::logic_error("relation row straddles weight blocks");
    if (inBlock) found.push_back(std::move(loc));
  }
  Dense m(b.cols.size(), Vec(found.size(), 0));
  for (u64 t = 0; t < found.size(); ++t)
    for (u64 i = 0; i < b.cols.size(); ++i) m[i][t] = found[t][i];
  return m;
}

inline Dense local_diff(const SparseMatrix& d, const LocalBlock& rowsB, const LocalBlock& colsB) {
  Dense m(rowsB.cols.size(), Vec(colsB.cols.size(), 0));
  for (const auto& [rc, v] : d.entries) {
    auto ic = colsB.toLocal.find(rc.second);
    if (ic == colsB.toLocal.end()) continue;
    auto ir = rowsB.toLocal.find(rc.first);
    if (ir == rowsB.toLocal.end())
      throw std::logic_error("differential is not weight-preserving (block leak)");
    m[ir->second][ic->second] = v;
  }
  return m;
}

}  // namespace detail

// H^k = ker(d_k mod relations) / (im(d_{k-1}) + relations), computed per
// weight block.  Cocycles come from the stacked kernel of [d_k | rel cols of
// degree k+1], projected back to the free cover of degree k.  Blocks of total
// weight above maxTotal are skipped: near the window edge a differential that
// multiplies by positive-weight elements loses truncated terms, so only the
// blocks the window fully contains are meaningful there.
inline CohomologyTable cohomology(const CochainComplex& c, i64 k, u64 maxTotal = ~u64(0)) {
  CohomologyTable table;
  table.degree = k;
  table.R = c.R;
  if (!c.in_range(k)) return table;

  auto partK = detail::column_blocks(c, k);
  auto partKm = detail::column_blocks(c, k - 1);
  auto partKp = detail::column_blocks(c, k + 1);
  SparseMatrix dk = c.diff(k), dkm = c.diff(k - 1);

  std::vector<WeightVec> ws;
  for (const auto& [w, _] : partK) ws.push_back(w);
  std::vector<CohomBlock> results(ws.size());

  parallel_for(ws.size(), [&](u64 wi) {
    const WeightVec& w = ws[wi];
    if (total_weight(w) > maxTotal) return;
    auto bK = detail::local_block(partK, w);
    auto bKm = detail::local_block(partKm, w);
    auto bKp = detail::local_block(partKp, w);
    const u64 n = bK.cols.size();

    Dense dkLoc = detail::local_diff(dk, bKp, bK);
    Dense relKp = detail::local_rel_cols(c, k + 1, bKp);
    const u64 nrel = relKp.empty() || bKp.cols.empty() ? (relKp.empty() ? 0 : relKp[0].size()) : relKp[0].size();

    // cocycles: v with d v in span(rels at k+1)
    Dense Gz;
    if (bKp.cols.empty()) {
      Gz.assign(n, Vec(n, 0));
      for (u64 i = 0; i < n; ++i) Gz[i][i] = 1;
    } else {
      Dense stacked(bKp.cols.size(), Vec(n + nrel, 0));
      for (u64 r = 0; r < bKp.cols.size(); ++r) {
        for (u64 cidx = 0; cidx < n; ++cidx) stacked[r][cidx] = dkLoc[r][cidx];
        for (u64 t = 0; t < nrel; ++t) stacked[r][n + t] = relKp[r][t];
      }
      KernelBasis kb = kernel_basis(snf(SparseMatrix::from_dense(stacked), c.R));
      const u64 s = kb.orderExp.size();
      Gz.assign(n, Vec(s, 0));
      for (u64 j = 0; j < s; ++j)
        for (u64 i = 0; i < n; ++i) Gz[i][j] = kb.gens[i][j];
    }

    // boundaries + relations at degree k
    Dense dkmLoc = detail::local_diff(dkm, bK, bKm);
    Dense relK = detail::local_rel_cols(c, k, bK);
    const u64 nb = bKm.cols.size() + (relK.empty() ? 0 : relK[0].size());
    Dense Gb(n, Vec(nb, 0));
    for (u64 j = 0; j < bKm.cols.size(); ++j)
      for (u64 i = 0; i < n; ++i) Gb[i][j] = dkmLoc[i][j];
    if (!relK.empty())
      for (u64 t = 0; t < relK[0].size(); ++t)
        for (u64 i = 0; i < n; ++i) Gb[i][bKm.cols.size() + t] = relK[i][t];

    Subquotient H = subquotient(Gz, Gb, c.R);
    CohomBlock blk;
    blk.w = w;
    blk.cols = bK.cols;
    blk.exps = std::move(H.exps);
    blk.reps = std::move(H.reps);
    blk.bgens = std::move(Gb);
    results[wi] = std::move(blk);
  });

  for (auto& blk : results)
    if (!blk.exps.empty()) table.blocks.push_back(std::move(blk));
  return table;
}

// Coordinates of the class of a local cocycle in a block's summand basis,
// reduced mod p^{exps[i]}; nullopt if the vector is not a cocycle of the
// block's span (i.e. not solvable in reps + boundaries).
inline std::optional<Vec> class_coords(const CohomBlock& blk, const Vec& localX,
                                       const PrimePower& R) {
  const u64 n = blk.cols.size(), s = blk.exps.size();
  const u64 t = blk.bgens.empty() ? 0 : blk.bgens[0].size();
  Dense M(n, Vec(s + t, 0));
  for (u64 i = 0; i < n; ++i) {
    for (u64 j = 0; j < s; ++j) M[i][j] = blk.reps[i][j];
    for (u64 j = 0; j < t; ++j) M[i][s + j] = blk.bgens[i][j];
  }
  auto sol = solve(snf(SparseMatrix::from_dense(M), R), localX);
  if (!sol) return std::nullopt;
  Vec coords(s, 0);
  for (u64 j = 0; j < s; ++j) coords[j] = (*sol)[j] % R.ipow(blk.exps[j]);
  return coords;
}

// Mapping cone of multiplication by p^{ep} on c, i.e. the derived reduction
// of c modulo p^{ep}: cone^n = c^{n+1} (+) c^n with d(x, y) = (-d x,
// p^{ep} x + d y).  Defined for 1 <= ep < e; a precision-1 coefficient ring
// carries no room for a proper divisor and is rejected.
inline CochainComplex derived_mod_p(const CochainComplex& c, u64 ep) {
  if (c.R.e < 2) throw std::invalid_argument("derived reduction requires precision e >= 2");
  if (ep < 1 || ep >= c.R.e) throw std::invalid_argument("derived reduction needs 1 <= e' < e");
  CochainComplex out;
  out.R = c.R;
  out.lo = c.lo - 1;
  const i64 hiN = c.hi();
  const u64 scale = c.R.pow(c.R.p, ep);
  bool hasRels = !c.rels.empty(), hasW = !c.weights.empty();
  for (i64 n = out.lo; n <= hiN; ++n) {
    u64 rTop = c.rank(n + 1), rBot = c.rank(n);
    out.ranks.push_back(rTop + rBot);
    if (hasRels) {
      Dense rows;
      if (const Dense* r = c.rels_at(n + 1))
        for (const auto& row : *r) {
          Vec x(rTop + rBot, 0);
          for (u64 j = 0; j < rTop; ++j) x[j] = row[j];
          rows.push_back(std::move(x));
        }
      if (const Dense* r = c.rels_at(n))
        for (const auto& row : *r) {
          Vec x(rTop + rBot, 0);
          for (u64 j = 0; j < rBot; ++j) x[rTop + j] = row[j];
          rows.push_back(std::move(x));
        }
      out.rels.push_back(std::move(rows));
    }
    if (hasW) {
      std::vector<WeightVec> wv;
      const auto* wTop = c.weights_at(n + 1);
      const auto* wBot = c.weights_at(n);
      for (u64 j = 0; j < rTop; ++j) wv.push_back(wTop ? (*wTop)[j] : WeightVec{});
      for (u64 j = 0; j < rBot; ++j) wv.push_back(wBot ? (*wBot)[j] : WeightVec{});
      out.weights.push_back(std::move(wv));
    }
  }
  for (i64 n = out.lo; n < hiN; ++n) {
    u64 rTop = c.rank(n + 1), rBot = c.rank(n);
    u64 rTop2 = c.rank(n + 2);
    SparseMatrix d(rTop2 + rTop, rTop + rBot);
    SparseMatrix dTop = c.diff(n + 1), dBot = c.diff(n);
    for (const auto& [rc, v] : dTop.entries) d.set(rc.first, rc.second, c.R.neg(v));
    for (u64 j = 0; j < rTop; ++j) d.set(rTop2 + j, j, scale);
    for (const auto& [rc, v] : dBot.entries) d.set(rTop2 + rc.first, rTop + rc.second, v);
    out.diffs.push_back(std::move(d));
  }
  return out;
}

// Alternating sum of term lengths; equals the alternating sum of cohomology
// lengths, which the tests assert.
inline i64 euler_length(const CochainComplex& c) {
  i64 total = 0;
  for (i64 k = c.lo; k <= c.hi(); ++k) {
    i64 len = i64(c.R.e) * i64(c.rank(k));
    EchelonSpan sp = detail::rel_span(c, k);
    for (const auto& row : sp.rows) len -= i64(c.R.e - row.pivotVal);
    total += (k % 2 == 0 ? len : -len);
  }
  return total;
}

}  // namespace pdcrys
