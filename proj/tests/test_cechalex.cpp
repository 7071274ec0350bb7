#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "pdcrys/cechalex.hpp"

using namespace pdcrys;

namespace {

EnvelopeSpec flat_line_spec(u64 p, u64 e, u64 d) {
  EnvelopeSpec s;
  s.R = PrimePower(p, e);
  s.degree = d;
  s.ordNames = {"x"};
  s.ordWeights = {{1}};
  return s;
}

EnvelopeSpec square_line_spec(u64 p, u64 e, u64 d) {
  EnvelopeSpec s = flat_line_spec(p, e, d);
  s.genNames = {"y"};
  s.gens = {Monomial{2}};
  return s;
}

bool dense_eq(const Dense& a, const Dense& b) { return a == b; }

Dense dense_sum(const Dense& a, const Dense& b, const PrimePower& R) {
  return detail::dense_add_scaled(a, b, 1, R);
}

// multiply with explicit result shape, so empty factors still size correctly
Dense mul_sized(const Dense& a, const Dense& b, u64 rows, u64 cols, const PrimePower& R) {
  Dense r = detail::dense_mat(rows, cols);
  for (u64 i = 0; i < a.size(); ++i)
    for (u64 k = 0; k < b.size(); ++k) {
      if (!a[i][k]) continue;
      for (u64 j = 0; j < cols; ++j) r[i][j] = R.add(r[i][j], R.mul(a[i][k], b[k][j]));
    }
  return r;
}

// d s + s d at level n, shaped ranks[n] x ranks[n]
Dense contraction_defect(const HomotopyModule& m, u64 n, const PrimePower& R) {
  const u64 rk = m.ranks[n];
  return dense_sum(mul_sized(hm_coboundary(m, n - 1), hm_contraction(m, n), rk, rk, R),
                   mul_sized(hm_contraction(m, n + 1), hm_coboundary(m, n), rk, rk, R), R);
}

// per-weight divisor exponents, ignoring empty blocks
std::map<WeightVec, std::multiset<u64>> block_divisors(const CohomologyTable& t,
                                                       u64 maxWeight = ~u64(0)) {
  std::map<WeightVec, std::multiset<u64>> out;
  for (const auto& b : t.blocks) {
    if (b.exps.empty()) continue;
    if (total_weight(b.w) > maxWeight) continue;
    out[b.w].insert(b.exps.begin(), b.exps.end());
  }
  return out;
}

SparseMatrix sm_sub(const SparseMatrix& a, const SparseMatrix& b, const PrimePower& R) {
  return a.add(b.scaled(R.neg(1), R), R);
}

// drop terms with total exponent above maxDeg on the free divided-power slots
PDElement truncate_free_pd(const Envelope& env, const PDElement& a, u64 maxDeg) {
  PDElement out;
  for (const auto& [m, c] : a.terms) {
    u64 t = 0;
    for (u64 i = env.nbase; i < env.nbase + env.nfree; ++i) t += m[i];
    if (t <= maxDeg) pd_add_term(env.alg, out, m, c);
  }
  return out;
}

}  // namespace

TEST_CASE("coface and codegeneracy composition laws") {
  for (u64 n = 0; n <= 3; ++n) {
    // delta^j delta^i = delta^i delta^{j-1}, i < j
    for (u64 i = 0; i <= n + 1; ++i)
      for (u64 j = i + 1; j <= n + 2; ++j)
        REQUIRE(compose_mono(coface(n + 1, j), coface(n, i)) ==
                compose_mono(coface(n + 1, i), coface(n, j - 1)));
    // sigma^j sigma^i = sigma^i sigma^{j+1}, i <= j
    for (u64 i = 0; i <= n; ++i)
      for (u64 j = i; j <= n; ++j)
        REQUIRE(compose_mono(codegeneracy(n, j), codegeneracy(n + 1, i)) ==
                compose_mono(codegeneracy(n, i), codegeneracy(n + 1, j + 1)));
    // sigma^j delta^i: identity when i = j or i = j+1, shifted cofaces otherwise
    if (n >= 1)
      for (u64 i = 0; i <= n + 1; ++i)
        for (u64 j = 0; j <= n; ++j) {
          Monotone comp = compose_mono(codegeneracy(n, j), coface(n, i));
          if (i == j || i == j + 1) {
            Monotone id(n + 1);
            for (u64 v = 0; v <= n; ++v) id[v] = v;
            REQUIRE(comp == id);
          } else if (i < j) {
            REQUIRE(comp == compose_mono(coface(n - 1, i), codegeneracy(n - 1, j - 1)));
          } else {
            REQUIRE(comp == compose_mono(coface(n - 1, i - 1), codegeneracy(n - 1, j)));
          }
        }
  }
}

TEST_CASE("interval homotopy is a path-object morphism with prescribed endpoints") {
  PrimePower R(2, 2);
  HomotopyModule g = gadget_module(R, 4);
  for (u64 n = 0; n <= 4; ++n) {
    // endpoint evaluations: alpha_0 kills, alpha_{n+1} is the identity
    REQUIRE(dense_eq(g.h(n, 0), detail::dense_mat(n + 1, n + 1)));
    REQUIRE(dense_eq(g.h(n, n + 1), detail::dense_eye(n + 1)));
    for (u64 m = 0; m <= 4; ++m)
      for (const Monotone& f : all_monotone(n, m)) {
        Dense af = g.act(f, n, m);
        for (u64 j = 0; j <= m + 1; ++j)
          REQUIRE(dense_eq(detail::dense_mul(g.h(m, j), af, R),
                           detail::dense_mul(af, g.h(n, alpha_precompose(f, j)), R)));
      }
  }
}

TEST_CASE("contraction collapses the free interval module") {
  for (auto [p, e] : {std::pair<u64, u64>{2, 2}, {3, 1}}) {
    PrimePower R(p, e);
    HomotopyModule g = gadget_module(R, 4);
    REQUIRE(dense_eq(detail::dense_mul(hm_contraction(g, 1), hm_coboundary(g, 0), R),
                     detail::dense_eye(1)));
    for (u64 n = 1; n <= 3; ++n)
      REQUIRE(dense_eq(contraction_defect(g, n, R), detail::dense_eye(g.ranks[n])));
    CochainComplex c = hm_complex(g, 4);
    validate(c);
    for (i64 k = 0; k <= 3; ++k) REQUIRE(cohomology(c, k).length() == 0);
  }
}

TEST_CASE("exterior powers and tensor products inherit the contraction") {
  PrimePower R(2, 2);
  HomotopyModule g = gadget_module(R, 4);
  std::vector<HomotopyModule> derived = {wedge_module(g, 2), wedge_module(g, 3),
                                         tensor_module(g, g)};
  for (const HomotopyModule& m : derived) {
    REQUIRE(dense_eq(mul_sized(hm_contraction(m, 1), hm_coboundary(m, 0), m.ranks[0],
                               m.ranks[0], R),
                     detail::dense_eye(m.ranks[0])));
    for (u64 n = 1; n <= 3; ++n)
      REQUIRE(dense_eq(contraction_defect(m, n, R), detail::dense_eye(m.ranks[n])));
  }
  // morphism equation survives the exterior power
  HomotopyModule w2 = wedge_module(g, 2);
  for (u64 n = 1; n <= 3; ++n) {
    REQUIRE(dense_eq(w2.h(n, 0), detail::dense_mat(w2.ranks[n], w2.ranks[n])));
    REQUIRE(dense_eq(w2.h(n, n + 1), detail::dense_eye(w2.ranks[n])));
    for (u64 m = 1; m <= 3; ++m)
      for (const Monotone& f : all_monotone(n, m)) {
        Dense af = w2.act(f, n, m);
        for (u64 j = 0; j <= m + 1; ++j)
          REQUIRE(dense_eq(detail::dense_mul(w2.h(m, j), af, R),
                           detail::dense_mul(af, w2.h(n, alpha_precompose(f, j)), R)));
      }
  }
  // acyclicity of the square wedge, over both a field and a ramified base
  for (auto [p, e] : {std::pair<u64, u64>{2, 2}, {5, 1}}) {
    CochainComplex c = hm_complex(wedge_module(gadget_module(PrimePower(p, e), 4), 2), 4);
    for (i64 k = 0; k <= 3; ++k) REQUIRE(cohomology(c, k).length() == 0);
  }
}

TEST_CASE("tower cofaces satisfy the simplicial ring identities") {
  for (bool withGen : {false, true}) {
    EnvelopeSpec base = withGen ? square_line_spec(2, 2, 4) : flat_line_spec(2, 2, 4);
    CaTower t = ca_tower(base, 2);

    auto rm = [&](u64 n, u64 k) {
      return ring_map_matrix(t.lv[n], t.lv[n + 1], coface_images(t, n, k));
    };
    auto rs = [&](u64 n, u64 k) {
      // codegeneracy sigma^k : D(n+1) -> D(n)
      return ring_map_matrix(t.lv[n + 1], t.lv[n], codegeneracy_images(t, n, k));
    };
    const PrimePower& R = t.lv[0].alg.R;

    // delta^j delta^i = delta^i delta^{j-1} for i < j, as window matrices
    REQUIRE(rm(1, 1).mul(rm(0, 0), R) == rm(1, 0).mul(rm(0, 0), R));
    REQUIRE(rm(1, 2).mul(rm(0, 0), R) == rm(1, 0).mul(rm(0, 1), R));
    REQUIRE(rm(1, 2).mul(rm(0, 1), R) == rm(1, 1).mul(rm(0, 1), R));

    // sigma^0 delta^0 = sigma^0 delta^1 = identity (after normal forms)
    std::vector<PDElement> idImgs;
    for (u64 i = 0; i < t.lv[0].ndirs(); ++i) idImgs.push_back(pd_var(t.lv[0].alg, i));
    SparseMatrix proj = ring_map_matrix(t.lv[0], t.lv[0], idImgs);
    REQUIRE(rs(0, 0).mul(rm(0, 0), R) == proj);
    REQUIRE(rs(0, 0).mul(rm(0, 1), R) == proj);

    // sigma^0 sigma^0 = sigma^0 sigma^1 from level two down
    REQUIRE(rs(0, 0).mul(rs(1, 0), R) == rs(0, 0).mul(rs(1, 1), R));
  }

  // frozen zeroth-face image: x^2 -> (x + xi)^2 = x^2 + 2 x xi + 2 gamma_2(xi)
  CaTower t = ca_tower(flat_line_spec(2, 2, 4), 1);
  std::vector<PDElement> full = extend_images(t.lv[0], t.lv[1], coface_images(t, 0, 0));
  PDElement img = apply_hom(t.lv[0].alg, t.lv[1].alg, full,
                            parse_element(t.lv[0].alg, "x^2"));
  REQUIRE(img.terms == parse_element(t.lv[1].alg, "x^2 + 2*x*x_1 + 2*g(x_1,2)").terms);
}

TEST_CASE("generator-built levels match the adjoined thickenings") {
  auto summary_map = [](const Envelope& env) {
    std::map<WeightVec, std::pair<u64, std::multiset<u64>>> out;
    for (const auto& s : weight_summaries(env)) {
      auto& slot = out[s.w];
      slot.first = s.freeBasis.size();
      for (const auto& [mono, exp] : s.torsion) slot.second.insert(exp);
    }
    return out;
  };

  // the ideal (p, f) with n difference variables, built two ways: adjoining
  // free divided-power variables, or listing every difference as a generator
  auto honest_level = [](const PrimePower& R, u64 d, Monomial f, u64 n) {
    EnvelopeSpec s;
    s.R = R;
    s.degree = d;
    s.ordNames = {"x"};
    s.ordWeights = {{1}};
    for (u64 e = 1; e <= n; ++e) {
      s.ordNames.push_back(xi_name("x", e));
      s.ordWeights.push_back({1});
    }
    Monomial fWide(n + 1, 0);
    fWide[0] = f[0];
    s.genNames = {"y"};
    s.gens = {fWide};
    for (u64 e = 1; e <= n; ++e) {
      Monomial xi(n + 1, 0);
      xi[e] = 1;
      s.genNames.push_back("z" + std::to_string(e));
      s.gens.push_back(xi);
    }
    return make_envelope(s);
  };

  for (Monomial f : {Monomial{1}, Monomial{2}}) {
    EnvelopeSpec base = flat_line_spec(2, 2, 4);
    base.genNames = {"y"};
    base.gens = {f};
    u64 maxLevel = f[0] == 1 ? 2 : 1;
    CaTower t = ca_tower(base, maxLevel);
    for (u64 n = 1; n <= maxLevel; ++n)
      REQUIRE(summary_map(honest_level(PrimePower(2, 2), 4, f, n)) ==
              summary_map(t.lv[n]));
  }
}

TEST_CASE("de Rham cohomology is level-independent in the tower") {
  for (bool withGen : {false, true}) {
    EnvelopeSpec base = withGen ? square_line_spec(2, 2, 4) : flat_line_spec(2, 2, 4);
    CaTower t = ca_tower(base, 2);
    for (i64 j = 0; j <= 1; ++j) {
      CochainComplex c0 = derham_complex(t.lv[0]);
      auto ref = block_divisors(cohomology(c0, j), 4);
      for (u64 n = 1; n <= 2; ++n) {
        CochainComplex cn = derham_complex(t.lv[n]);
        REQUIRE(block_divisors(cohomology(cn, j), 4) == ref);
      }
    }
  }
}

TEST_CASE("rows of the form double complex are acyclic in positive form degree") {
  {
    CaTower t = ca_tower(flat_line_spec(2, 2, 4), 2);
    for (u64 j : {u64(1), u64(2)}) {
      CochainComplex row = ca_row_complex(t, j);
      validate(row);
      REQUIRE(block_divisors(cohomology(row, 0), 4).empty());
      REQUIRE(block_divisors(cohomology(row, 1), 4).empty());
    }
  }
  {
    CaTower t = ca_tower(square_line_spec(2, 2, 4), 2);
    CochainComplex row = ca_row_complex(t, 1);
    validate(row);
    REQUIRE(block_divisors(cohomology(row, 0), 4).empty());
    REQUIRE(block_divisors(cohomology(row, 1), 4).empty());
  }
}

TEST_CASE("zeroth face of the flat tower and its cohomology match de Rham") {
  CaTower t = ca_tower(flat_line_spec(2, 2, 4), 3);
  CochainComplex ca = ca_complex(t, trivial_crystal(t.lv[0]));
  validate(ca);

  // frozen level-zero differential: f -> f(x + xi) - f(x) on x^2
  const Envelope& lv1 = t.lv[1];
  Vec col(lv1.window.size(), 0);
  for (const auto& [rc, v] : ca.diffs[0].entries)
    if (rc.second == t.lv[0].window.index.at(Monomial{2})) col[rc.first] = v;
  PDElement got = lv1.window.from_vec(lv1.alg, col);
  REQUIRE(got.terms == parse_element(lv1.alg, "2*x*x_1 + 2*g(x_1,2)").terms);

  // frozen flat-line tables over Z/4, window degree 4
  std::map<WeightVec, std::multiset<u64>> h0 = {{{0}, {2}}, {{2}, {1}}, {{4}, {2}}};
  std::map<WeightVec, std::multiset<u64>> h1 = {{{2}, {1}}, {{4}, {2}}};
  CochainComplex dr = derham_complex(t.lv[0]);
  REQUIRE(block_divisors(cohomology(dr, 0), 4) == h0);
  REQUIRE(block_divisors(cohomology(dr, 1), 4) == h1);
  REQUIRE(block_divisors(cohomology(ca, 0), 4) == h0);
  REQUIRE(block_divisors(cohomology(ca, 1), 4) == h1);
  REQUIRE(block_divisors(cohomology(ca, 2), 4).empty());
  REQUIRE(block_divisors(cohomology(dr, 2), 4).empty());
}

TEST_CASE("totalization is a complex projecting onto its edge complexes") {
  CaTower t = ca_tower(flat_line_spec(2, 2, 4), 2);
  const PrimePower& R = t.lv[0].alg.R;
  auto [tot, lay] = ca_total_complex(t);
  validate(tot);

  // vertical and horizontal maps commute square by square, modulo relations
  std::vector<CochainComplex> cols;
  for (u64 n = 0; n <= 2; ++n) cols.push_back(derham_complex(t.lv[n]));
  for (u64 n = 0; n <= 1; ++n)
    for (u64 j = 0; j + 1 <= t.lv[n].ndirs(); ++j) {
      SparseMatrix lhs = cols[n + 1].diffs[j].mul(ca_form_coboundary(t, n, j), R);
      SparseMatrix rhs = ca_form_coboundary(t, n, j + 1).mul(cols[n].diffs[j], R);
      SparseMatrix diff = sm_sub(lhs, rhs, R);
      Dense rels;
      detail::form_term_labels(t.lv[n + 1], j + 1, &rels, nullptr);
      EchelonSpan span(lhs.rows, R);
      span.build(rels);
      for (u64 c = 0; c < diff.cols; ++c) REQUIRE(span.contains(diff.col(c)));
    }

  // the zeroth row of the double complex is the level complex itself
  CochainComplex row0 = ca_row_complex(t, 0);
  CochainComplex ca = ca_complex(t, trivial_crystal(t.lv[0]));
  REQUIRE(row0.ranks == ca.ranks);
  REQUIRE(row0.diffs == ca.diffs);
  REQUIRE(row0.rels == ca.rels);
  REQUIRE(row0.weights == ca.weights);

  // projections onto the de Rham column and the level row are chain maps
  CochainComplex dr = derham_complex(t.lv[0]);
  auto piece_at = [&](u64 k, u64 j, u64 n) -> const TotLayout::Piece* {
    for (const auto& p : lay.pieces[k])
      if (p.j == j && p.n == n) return &p;
    return nullptr;
  };
  auto projection = [&](u64 k, u64 j, u64 n, u64 rk) {
    SparseMatrix pr(rk, tot.ranks[k]);
    if (const auto* p = piece_at(k, j, n))
      for (u64 c = 0; c < p->cols; ++c) pr.set(c, p->offset + c, 1);
    return pr;
  };
  for (u64 k = 0; i64(k) + 1 <= dr.hi(); ++k) {
    SparseMatrix prK = projection(k, k, 0, dr.rank(i64(k)));
    SparseMatrix prK1 = projection(k + 1, k + 1, 0, dr.rank(i64(k) + 1));
    REQUIRE(prK1.mul(tot.diffs[k], R) == dr.diffs[k].mul(prK, R));
  }
  for (u64 k = 0; i64(k) + 1 <= ca.hi(); ++k) {
    SparseMatrix caK = projection(k, 0, k, ca.rank(i64(k)));
    SparseMatrix caK1 = projection(k + 1, 0, k + 1, ca.rank(i64(k) + 1));
    REQUIRE(caK1.mul(tot.diffs[k], R) == ca.diffs[k].mul(caK, R));
  }
}

TEST_CASE("level complexes carry crystal coefficients") {
  // graded rank-two twist on the squared line: nabla(e1) = y e0 dx
  EnvelopeSpec base = square_line_spec(2, 2, 4);
  CaTower t = ca_tower(base, 2);
  const Envelope& env = t.lv[0];

  Crystal cr;
  cr.rank = 2;
  cr.graded = true;
  cr.genWeights = {{0}, {3}};
  cr.A.assign(env.ndirs(), std::vector<std::vector<PDElement>>(
                               2, std::vector<PDElement>(2, PDElement{})));
  cr.A[0][0][1] = parse_element(env.alg, "y");
  REQUIRE(check_integrability(env, cr));
  REQUIRE(check_quasi_nilpotent(env, cr));

  CochainComplex dr = crystal_complex(env, cr);
  validate(dr);
  CochainComplex ca = ca_complex(t, cr);
  validate(ca);
  for (i64 k = 0; k <= 1; ++k)
    REQUIRE(block_divisors(cohomology(ca, k), 4) == block_divisors(cohomology(dr, k), 4));

  // ungraded rank-one version: the xi-linear part of the zeroth face is the
  // connection itself
  Crystal one;
  one.rank = 1;
  one.graded = false;
  one.genWeights = {{0}};
  one.A.assign(env.ndirs(), {{parse_element(env.alg, "y")}});
  CochainComplex ca1 = ca_complex(t, one);
  const Envelope& lv1 = t.lv[1];
  Vec col(lv1.window.size(), 0);
  for (const auto& [rc, v] : ca1.diffs[0].entries)
    if (rc.second == env.window.index.at(Monomial{0, 0})) col[rc.first] = v;
  PDElement lin = truncate_free_pd(lv1, lv1.window.from_vec(lv1.alg, col), 1);
  REQUIRE(lin.terms == parse_element(lv1.alg, "y*x_1").terms);
}
