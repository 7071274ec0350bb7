#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ring.hpp"

namespace pdcrys {

using Vec = std::vector<u64>;
using Dense = std::vector<Vec>;  // row-major: Dense[r][c]

// Sparse matrix over Z/p^e keyed by (row, col); zero entries are absent.
struct SparseMatrix {
  u64 rows = 0, cols = 0;
  std::map<std::pair<u64, u64>, u64> entries;

  SparseMatrix() = default;
  SparseMatrix(u64 r, u64 c) : rows(r), cols(c) {}

  static SparseMatrix identity(u64 n) {
    SparseMatrix m(n, n);
    for (u64 i = 0; i < n; ++i) m.entries[{i, i}] = 1;
    return m;
  }

  u64 get(u64 r, u64 c) const {
    auto it = entries.find({r, c});
    return it == entries.end() ? 0 : it->second;
  }

  void set(u64 r, u64 c, u64 v) {
    if (r >= rows || c >= cols) throw std::out_of_range("matrix index");
    if (v == 0) entries.erase({r, c});
    else entries[{r, c}] = v;
  }

  void add_to(u64 r, u64 c, u64 v, const PrimePower& R) { set(r, c, R.add(get(r, c), v)); }

  bool operator==(const SparseMatrix&) const = default;
  bool is_zero() const { return entries.empty(); }

  SparseMatrix mul(const SparseMatrix& o, const PrimePower& R) const {
    if (cols != o.rows) throw std::invalid_argument("matrix product shape mismatch");
    SparseMatrix out(rows, o.cols);
    // group o's entries by row for the sparse product
    for (const auto& [rc, v] : entries) {
      auto it = o.entries.lower_bound({rc.second, 0});
      for (; it != o.entries.end() && it->first.first == rc.second; ++it)
        out.add_to(rc.first, it->first.second, R.mul(v, it->second), R);
    }
    return out;
  }

  SparseMatrix add(const SparseMatrix& o, const PrimePower& R) const {
    if (rows != o.rows || cols != o.cols) throw std::invalid_argument("matrix sum shape mismatch");
    SparseMatrix out = *this;
    for (const auto& [rc, v] : o.entries) out.add_to(rc.first, rc.second, v, R);
    return out;
  }

  SparseMatrix scaled(u64 s, const PrimePower& R) const {
    SparseMatrix out(rows, cols);
    for (const auto& [rc, v] : entries) out.set(rc.first, rc.second, R.mul(v, s));
    return out;
  }

  Vec apply(const Vec& x, const PrimePower& R) const {
    if (x.size() != cols) throw std::invalid_argument("matrix apply shape mismatch");
    Vec y(rows, 0);
    for (const auto& [rc, v] : entries) y[rc.first] = R.add(y[rc.first], R.mul(v, x[rc.second]));
    return y;
  }

  Vec col(u64 j) const {
    Vec v(rows, 0);
    for (const auto& [rc, val] : entries)
      if (rc.second == j) v[rc.first] = val;
    return v;
  }

  Dense to_dense() const {
    Dense d(rows, Vec(cols, 0));
    for (const auto& [rc, v] : entries) d[rc.first][rc.second] = v;
    return d;
  }

  static SparseMatrix from_dense(const Dense& d) {
    SparseMatrix m(d.size(), d.empty() ? 0 : d[0].size());
    for (u64 r = 0; r < m.rows; ++r)
      for (u64 c = 0; c < m.cols; ++c)
        if (d[r][c]) m.entries[{r, c}] = d[r][c];
    return m;
  }

  // Text format: header "rows cols p e", then one "row col value" line per
  // nonzero entry in (row, col) order.
  std::string dump(const PrimePower& R) const {
    std::ostringstream os;
    os << rows << ' ' << cols << ' ' << R.p << ' ' << R.e << '\n';
    for (const auto& [rc, v] : entries) os << rc.first << ' ' << rc.second << ' ' << v << '\n';
    return os.str();
  }

  static std::pair<SparseMatrix, PrimePower> parse(const std::string& text) {
    std::istringstream is(text);
    u64 r, c, p, e;
    if (!(is >> r >> c >> p >> e)) throw std::invalid_argument("matrix header malformed");
    PrimePower R(p, e);
    SparseMatrix m(r, c);
    u64 i, j, v;
    while (is >> i >> j >> v) {
      if (i >= r || j >= c) throw std::invalid_argument("matrix entry out of range");
      m.set(i, j, v % R.q);
    }
    return {m, R};
  }
};

inline Vec vec_add(const Vec& a, const Vec& b, const PrimePower& R) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = R.add(a[i], b[i]);
  return r;
}

inline Vec vec_sub(const Vec& a, const Vec& b, const PrimePower& R) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = R.sub(a[i], b[i]);
  return r;
}

inline Vec vec_scale(u64 s, const Vec& a, const PrimePower& R) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = R.mul(s, a[i]);
  return r;
}

inline bool vec_is_zero(const Vec& a) {
  for (u64 x : a) if (x) return false;
  return true;
}

// --- Smith normal form over Z/p^e -----------------------------------------
//
// Pivoting on the entry of globally minimal p-valuation makes every
// elimination step an exact division, so the reduction never leaves Z/p^e.
// Diagonal valuations come out non-decreasing and U, V have unit determinant.
// diag[j] = p^{dvals[j]}, with dvals[j] == e meaning the entry is zero.
struct SnfResult {
  u64 rows = 0, cols = 0;
  std::vector<u64> dvals;       // length min(rows, cols)
  Dense U, Uinv, V;             // U*A*V = diag
  PrimePower R;

  u64 diag_entry(u64 j) const { return dvals[j] >= R.e ? 0 : R.pow(R.p, dvals[j]); }
};

namespace detail {
inline Dense dense_identity(u64 n) {
  Dense d(n, Vec(n, 0));
  for (u64 i = 0; i < n; ++i) d[i][i] = 1;
  return d;
}
}  // namespace detail

inline SnfResult snf(const SparseMatrix& m, const PrimePower& R) {
  Dense A = m.to_dense();
  const u64 nr = m.rows, nc = m.cols, nmin = std::min(nr, nc);
  SnfResult res;
  res.rows = nr;
  res.cols = nc;
  res.R = R;
  res.U = detail::dense_identity(nr);
  res.Uinv = detail::dense_identity(nr);
  res.V = detail::dense_identity(nc);
  res.dvals.assign(nmin, R.e);

  for (u64 k = 0; k < nmin; ++k) {
    // pivot: minimal valuation in A[k.., k..], ties by (row, col)
    u64 bv = R.e, br = 0, bc = 0;
    for (u64 i = k; i < nr; ++i)
      for (u64 j = k; j < nc; ++j) {
        if (!A[i][j]) continue;
        u64 v = R.val(A[i][j]);
        if (v < bv) { bv = v; br = i; bc = j; if (v == 0) { i = nr; break; } }
      }
    if (bv >= R.e) break;  // remaining block is zero
    if (br != k) {
      std::swap(A[br], A[k]);
      std::swap(res.U[br], res.U[k]);
      for (u64 i = 0; i < nr; ++i) std::swap(res.Uinv[i][br], res.Uinv[i][k]);
    }
    if (bc != k) {
      for (u64 i = 0; i < nr; ++i) std::swap(A[i][bc], A[i][k]);
      for (u64 i = 0; i < nc; ++i) std::swap(res.V[i][bc], res.V[i][k]);
    }
    // scale row k so the pivot becomes exactly p^bv
    u64 u = R.unit_part(A[k][k]), ui = R.inv(u);
    for (u64 j = 0; j < nc; ++j) A[k][j] = R.mul(A[k][j], ui);
    for (u64 j = 0; j < nr; ++j) res.U[k][j] = R.mul(res.U[k][j], ui);
    for (u64 i = 0; i < nr; ++i) res.Uinv[i][k] = R.mul(res.Uinv[i][k], u);
    // clear column k (exact divisions: every entry has valuation >= bv)
    for (u64 i = 0; i < nr; ++i) {
      if (i == k || !A[i][k]) continue;
      u64 t = R.pdiv(A[i][k], bv);
      for (u64 j = 0; j < nc; ++j) A[i][j] = R.sub(A[i][j], R.mul(t, A[k][j]));
      for (u64 j = 0; j < nr; ++j) res.U[i][j] = R.sub(res.U[i][j], R.mul(t, res.U[k][j]));
      for (u64 j = 0; j < nr; ++j) res.Uinv[j][k] = R.add(res.Uinv[j][k], R.mul(t, res.Uinv[j][i]));
    }
    // clear row k
    for (u64 j = 0; j < nc; ++j) {
      if (j == k || !A[k][j]) continue;
      u64 t = R.pdiv(A[k][j], bv);
      for (u64 i = 0; i < nr; ++i) A[i][j] = R.sub(A[i][j], R.mul(t, A[i][k]));
      for (u64 i = 0; i < nc; ++i) res.V[i][j] = R.sub(res.V[i][j], R.mul(t, res.V[i][k]));
    }
    res.dvals[k] = bv;
  }
  return res;
}

// Generators of ker(A) together with their additive order exponents: the
// generator for diagonal slot j is p^{e - v_j} * V e_j of order p^{v_j}
// (columns beyond the diagonal are free of order p^e).  The generators are
// independent, so ker = (+)_j Z/p^{orderExp[j]}.
struct KernelBasis {
  Dense gens;                 // cols(A) x s, column-per-generator
  std::vector<u64> orderExp;  // s entries, each in [1, e]
};

inline KernelBasis kernel_basis(const SnfResult& s) {
  const PrimePower& R = s.R;
  KernelBasis out;
  out.gens.assign(s.cols, Vec{});
  std::vector<Vec> cols;
  for (u64 j = 0; j < s.cols; ++j) {
    u64 v = j < s.dvals.size() ? s.dvals[j] : R.e;
    if (v == 0) continue;
    u64 scale = R.pow(R.p, R.e - v);
    Vec g(s.cols, 0);
    for (u64 i = 0; i < s.cols; ++i) g[i] = R.mul(scale, s.V[i][j]);
    cols.push_back(std::move(g));
    out.orderExp.push_back(v);
  }
  Dense m(s.cols, Vec(cols.size(), 0));
  for (u64 j = 0; j < cols.size(); ++j)
    for (u64 i = 0; i < s.cols; ++i) m[i][j] = cols[j][i];
  out.gens = std::move(m);
  return out;
}

// Solve A x = b; returns the canonical solution (free coordinates zero) or
// nullopt.  Requires the SNF of A.
inline std::optional<Vec> solve(const SnfResult& s, const Vec& b) {
  const PrimePower& R = s.R;
  if (b.size() != s.rows) throw std::invalid_argument("solve shape mismatch");
  Vec c(s.rows, 0);
  for (u64 i = 0; i < s.rows; ++i) {
    u64 acc = 0;
    for (u64 j = 0; j < s.rows; ++j) acc = R.add(acc, R.mul(s.U[i][j], b[j]));
    c[i] = acc;
  }
  Vec z(s.cols, 0);
  for (u64 i = 0; i < s.rows; ++i) {
    u64 v = i < s.dvals.size() ? s.dvals[i] : R.e;
    if (i >= s.cols) {
      if (c[i] != 0) return std::nullopt;
      continue;
    }
    if (R.val(c[i]) < v) return std::nullopt;
    z[i] = v >= R.e ? 0 : R.pdiv(c[i], v);
    if (v >= R.e && c[i] != 0) return std::nullopt;
  }
  Vec x(s.cols, 0);
  for (u64 i = 0; i < s.cols; ++i) {
    u64 acc = 0;
    for (u64 j = 0; j < s.cols; ++j) acc = R.add(acc, R.mul(s.V[i][j], z[j]));
    x[i] = acc;
  }
  return x;
}

// --- Row echelon span with valuation pivoting ------------------------------
//
// Spans a submodule of (Z/p^e)^cols by cross-reduced rows.  Pivots are chosen
// by globally minimal valuation (ties: lowest column, then input order), each
// pivot entry normalised to p^v.  Two structural invariants follow and are
// what make reduce() canonical in a single forward pass:
//   (1) every entry of a row has valuation >= the row's pivot valuation;
//   (2) rows selected later vanish at earlier pivot columns.
struct EchelonSpan {
  struct Row {
    u64 pivotCol = 0, pivotVal = 0;
    Vec v;
  };
  u64 cols = 0;
  PrimePower R;
  std::vector<Row> rows;             // in pivot-selection order
  std::vector<i64> pivotOfCol;       // index into rows, or -1

  EchelonSpan() = default;
  EchelonSpan(u64 c, const PrimePower& r) : cols(c), R(r), pivotOfCol(c, -1) {}

  u64 rank() const { return rows.size(); }

  void build(Dense input) {
    for (auto& r : input)
      if (r.size() != cols) throw std::invalid_argument("echelon row width mismatch");
    std::vector<char> used(input.size(), 0);
    for (;;) {
      u64 bv = R.e, bc = 0;
      size_t bi = input.size();
      for (size_t i = 0; i < input.size(); ++i) {
        if (used[i]) continue;
        for (u64 j = 0; j < cols; ++j) {
          if (!input[i][j]) continue;
          u64 v = R.val(input[i][j]);
          if (v < bv || (v == bv && (bi == input.size() || j < bc))) {
            bv = v; bc = j; bi = i;
          }
        }
      }
      if (bi == input.size() || bv >= R.e) break;
      used[bi] = 1;
      Vec piv = std::move(input[bi]);
      u64 ui = R.inv(R.unit_part(piv[bc]));
      for (auto& x : piv) x = R.mul(x, ui);
      u64 pv = R.pow(R.p, bv);
      // eliminate this column from every other row, selected rows included
      auto clear = [&](Vec& r) {
        if (!r[bc]) return;
        u64 t = r[bc] / pv;  // leaves r[bc] mod p^bv, exact for val >= bv
        if (!t) return;
        for (u64 j = 0; j < cols; ++j) r[j] = R.sub(r[j], R.mul(t, piv[j]));
      };
      for (size_t i = 0; i < input.size(); ++i)
        if (!used[i]) clear(input[i]);
      for (auto& row : rows) clear(row.v);
      pivotOfCol[bc] = i64(rows.size());
      rows.push_back(Row{bc, bv, std::move(piv)});
    }
  }

  // Canonical coset representative: coefficient at each pivot column reduced
  // below p^{pivotVal}.  Single forward pass (see invariants above).
  void reduce(Vec& x) const {
    if (x.size() != cols) throw std::invalid_argument("reduce width mismatch");
    for (const auto& row : rows) {
      u64 a = x[row.pivotCol];
      u64 pv = R.pow(R.p, row.pivotVal);
      u64 t = a / pv;
      if (!t) continue;
      for (u64 j = 0; j < cols; ++j) x[j] = R.sub(x[j], R.mul(t, row.v[j]));
    }
  }

  bool contains(Vec x) const {
    reduce(x);
    return vec_is_zero(x);
  }

  // Rows with pivot valuation >= 1 present honest torsion in the quotient.
  std::vector<const Row*> torsion_rows() const {
    std::vector<const Row*> t;
    for (const auto& r : rows)
      if (r.pivotVal >= 1) t.push_back(&r);
    return t;
  }
};

// --- Subquotient span(G)/span(B) -------------------------------------------
//
// G, B are column-generator matrices with span(B) <= span(G) <= (Z/p^e)^n;
// the generators need not be independent.  Output: elementary divisor
// exponents (each in [1, e], SNF order) and one representative column per
// summand, canonically reduced against span(B).
struct Subquotient {
  std::vector<u64> exps;
  Dense reps;  // n x exps.size()
};

inline Subquotient subquotient(const Dense& G, const Dense& B, const PrimePower& R) {
  const u64 n = G.size();
  const u64 sG = n ? G[0].size() : 0;
  const u64 sB = B.empty() ? 0 : (B[0].size());
  if (!B.empty() && B.size() != n) throw std::invalid_argument("subquotient shape mismatch");

  SnfResult sg = snf(SparseMatrix::from_dense(G), R);
  // independent generators: ghat_i = p^{sigma_i} * Uinv e_i of order p^{e - sigma_i}
  std::vector<u64> sigma;
  for (u64 j = 0; j < sg.dvals.size(); ++j)
    if (sg.dvals[j] < R.e) sigma.push_back(sg.dvals[j]);
  const u64 r = sigma.size();
  Subquotient out;
  if (r == 0) {
    out.reps.assign(n, Vec{});
    return out;  // span(G) = 0
  }

  // express B columns in ghat coordinates: z_i = (U b)_i / p^{sigma_i}
  Dense rel(r, Vec(r + sB, 0));
  for (u64 i = 0; i < r; ++i) rel[i][i] = R.pow(R.p, R.e - sigma[i]);
  for (u64 b = 0; b < sB; ++b) {
    for (u64 i = 0; i < sg.rows; ++i) {
      u64 acc = 0;
      for (u64 j = 0; j < n; ++j) acc = R.add(acc, R.mul(sg.U[i][j], B[j][b]));
      if (i < r) {
        if (R.val(acc) < sigma[i]) throw std::logic_error("subquotient: B not inside span(G)");
        rel[i][r + b] = R.pdiv(acc, sigma[i]);
      } else if (acc != 0) {
        throw std::logic_error("subquotient: B not inside span(G)");
      }
    }
  }

  SnfResult sr = snf(SparseMatrix::from_dense(rel), R);
  // H = R^r / colspan(rel) = (+)_j Z/p^{dvals[j]} (divisor p^v gives a
  // summand Z/p^v; a zero divisor gives the full Z/p^e).  The representative
  // of summand j in ghat coordinates is Uinv(rel) e_j, pushed into ambient
  // coordinates through ghat.  Representatives are reduced against span(B);
  // the ghat order relations are the zero vector in ambient coordinates and
  // contribute nothing.
  EchelonSpan zero_span(n, R);
  {
    Dense zrows;
    for (u64 b = 0; b < sB; ++b) {
      Vec row(n, 0);
      for (u64 i = 0; i < n; ++i) row[i] = B[i][b];
      zrows.push_back(std::move(row));
    }
    zero_span.build(std::move(zrows));
  }

  Dense reps_cols;
  for (u64 j = 0; j < r; ++j) {
    u64 w = j < sr.dvals.size() ? sr.dvals[j] : R.e;  // summand Z/p^w
    if (w == 0) continue;
    Vec ghat_coords(r, 0);
    for (u64 i = 0; i < r; ++i) ghat_coords[i] = sr.Uinv[i][j];
    Vec amb(n, 0);
    for (u64 i = 0; i < r; ++i) {
      u64 c = R.mul(ghat_coords[i], R.pow(R.p, sigma[i]));
      for (u64 a = 0; a < n; ++a) amb[a] = R.add(amb[a], R.mul(c, sg.Uinv[a][i]));
    }
    zero_span.reduce(amb);
    out.exps.push_back(w);
    reps_cols.push_back(std::move(amb));
  }
  out.reps.assign(n, Vec(reps_cols.size(), 0));
  for (u64 j = 0; j < reps_cols.size(); ++j)
    for (u64 i = 0; i < n; ++i) out.reps[i][j] = reps_cols[j][i];
  return out;
}

}  // namespace pdcrys
