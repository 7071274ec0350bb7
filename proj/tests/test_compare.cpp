#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <vector>

#include "pdcrys/compare.hpp"

using namespace pdcrys;

namespace {

EnvelopeSpec flat_spec(u64 p, u64 e, u64 d, std::vector<std::string> names) {
  EnvelopeSpec s;
  s.R = PrimePower(p, e);
  s.degree = d;
  const size_t m = names.size();
  s.ordNames = std::move(names);
  for (size_t i = 0; i < m; ++i) {
    WeightVec w(m, 0);
    w[i] = 1;
    s.ordWeights.push_back(w);
  }
  return s;
}

EnvelopeSpec square_line_spec(u64 p, u64 e, u64 d) {
  EnvelopeSpec s = flat_spec(p, e, d, {"x"});
  s.genNames = {"y"};
  s.gens = {Monomial{2}};
  return s;
}

// de Rham complex of the divided-power neighbourhood of the quadric cone
// (three generators x^2, xy, y^2 over a flat plane), at given precision
CochainComplex quadric_derham(u64 p, u64 prec, u64 d) {
  return derham_complex(envelope_monomial(PrimePower(p, prec), d, {"x", "y"},
                                          {"y1", "y2", "y3"},
                                          {Monomial{2, 0}, Monomial{1, 1}, Monomial{0, 2}}));
}

}  // namespace

// ----------------------------------------------------------------------------
// Frozen tables (hand-derived from d(x^w) = w x^{w-1} dx):
//
//   flat line, p = 2, e = 2, window 4:
//     H^0 = Z/4 @ {0}, Z/2 @ {2}, Z/4 @ {4};   H^1 = Z/2 @ {2}, Z/4 @ {4}
//   flat line, integral limit (p = 2, window 8):
//     H^0 = Z_2   @ {0} (free);  H^1 = Z/2 @ {2}, Z/4 @ {4}, Z/2 @ {6}, Z/8 @ {8}
//   flat line, direct at precision 1 (p = 2, window 8):
//     H^0 = Z/2 @ {0,2,4,6,8};   H^1 = Z/2 @ {2,4,6,8}
// ----------------------------------------------------------------------------

TEST_CASE("one thickening level resolves its base") {
  SECTION("flat line") {
    PoincareReport r = poincare_check(flat_spec(2, 2, 4, {"x"}), 2);
    CHECK(r.pass);
    CHECK(r.stable);
    REQUIRE(r.h.size() == 2);  // one relative direction
    BlockDivisors h0;
    for (u32 w = 0; w <= 4; ++w) h0[{w}] = {2};
    CHECK(r.h[0] == h0);
    CHECK(r.h[1].empty());
  }
  SECTION("flat plane") {
    PoincareReport r = poincare_check(flat_spec(2, 2, 3, {"x", "y"}), 2);
    CHECK(r.pass);
    CHECK(r.stable);
    REQUIRE(r.h.size() == 3);
    BlockDivisors h0;
    for (u32 a = 0; a <= 3; ++a)
      for (u32 b = 0; a + b <= 3; ++b) h0[{a, b}] = {2};
    CHECK(r.h[0] == h0);
    CHECK(r.h[1].empty());
    CHECK(r.h[2].empty());
  }
  SECTION("base with a generator") {
    PoincareReport r = poincare_check(square_line_spec(2, 2, 4), 2);
    CHECK(r.pass);
    CHECK(r.stable);
  }
}

TEST_CASE("de Rham, totalization, and the section row agree on the flat line") {
  CompareReport r = compare_derham_ca(flat_spec(2, 2, 4, {"x"}), nullptr, 2, 2);
  CHECK(r.pass);
  CHECK(r.stable);
  REQUIRE(r.maxDegree == 1);

  BlockDivisors h0{{{0}, {2}}, {{2}, {1}}, {{4}, {2}}};
  BlockDivisors h1{{{2}, {1}}, {{4}, {2}}};
  CHECK(r.lo.derham[0] == h0);
  CHECK(r.lo.derham[1] == h1);
  CHECK(r.lo.total[0] == h0);
  CHECK(r.lo.total[1] == h1);
  CHECK(r.lo.sections[0] == h0);
  CHECK(r.lo.sections[1] == h1);
  CHECK(r.lo.sidesEqual);
  CHECK(r.lo.derhamOnto);
  CHECK(r.lo.sectionsOnto);
  CHECK(r.hi.sidesEqual);

  CompareReport r3 = compare_derham_ca(flat_spec(3, 1, 4, {"x"}), nullptr, 2, 2);
  CHECK(r3.pass);
}

TEST_CASE("the comparison carries nontrivial crystal coefficients") {
  CrystalMaker mk = [](const Envelope& env) {
    Crystal cr;
    cr.rank = 2;
    cr.graded = true;
    cr.genWeights = {{0}, {3}};
    cr.A.assign(env.ndirs(),
                std::vector<std::vector<PDElement>>(2, std::vector<PDElement>(2, PDElement{})));
    cr.A[0][0][1] = parse_element(env.alg, "y");
    return cr;
  };
  CompareReport r = compare_derham_ca(square_line_spec(2, 2, 4), mk, 2, 2);
  CHECK(r.pass);
  CHECK(r.stable);

  // the twist genuinely acts: tables differ from the trivial-coefficient run
  CompareReport r1 = compare_derham_ca(square_line_spec(2, 2, 4), nullptr, 2, 2);
  CHECK(r1.pass);
  CHECK(r.lo.derham != r1.lo.derham);
}

TEST_CASE("precision tower splits integral cohomology into free and torsion parts") {
  ComplexBuilder line = [](u64 prec) {
    return derham_complex(envelope_flat(PrimePower(2, prec), 8, {"x"}));
  };
  IntegralTables it = integral_tables(line, 1, 2, 1, 8);
  REQUIRE(it.conclusive);

  REQUIRE(it.h.at(0).size() == 1);
  const auto& z = it.h.at(0).at(WeightVec{0});
  REQUIRE(z.size() == 1);
  CHECK(z[0].free);

  std::map<WeightVec, std::vector<u64>> tor;
  for (const auto& [w, summands] : it.h.at(1))
    for (const auto& s : summands) {
      CHECK_FALSE(s.free);
      tor[w].push_back(s.exp);
    }
  std::map<WeightVec, std::vector<u64>> expect{{{2}, {1}}, {{4}, {2}}, {{6}, {1}}, {{8}, {3}}};
  CHECK(tor == expect);
}

TEST_CASE("derived reduction matches the direct computation on a flat base") {
  ComplexBuilder line = [](u64 prec) {
    return derham_complex(envelope_flat(PrimePower(2, prec), 8, {"x"}));
  };
  BaseChangeReport r = base_change_check(line, 1, 2, 1, 8);
  REQUIRE(r.conclusive);
  CHECK(r.pass);
  CHECK(r.obstruction.empty());

  BlockDivisors h0, h1;
  for (u32 w = 0; w <= 8; w += 2) h0[{w}] = {1};
  for (u32 w = 2; w <= 8; w += 2) h1[{w}] = {1};
  CHECK(r.predicted.at(0) == h0);
  CHECK(r.direct.at(0) == h0);
  CHECK(r.predicted.at(1) == h1);
  CHECK(r.direct.at(1) == h1);
  CHECK(r.direct.at(-1).empty());
}

TEST_CASE("derived reduction detects the obstruction on the quadric cone") {
  ComplexBuilder quad = [](u64 prec) { return quadric_derham(2, prec, 8); };
  BaseChangeReport r = base_change_check(quad, 2, 2, 1, 8);
  REQUIRE(r.conclusive);
  CHECK_FALSE(r.pass);
  auto it = r.obstruction.find(WeightVec{4, 4});
  REQUIRE(it != r.obstruction.end());
  CHECK(it->second == std::vector<u64>{1});
  CHECK(r.obstruction.size() == 1);
}

TEST_CASE("the quadric cone carries p-torsion horizontal classes") {
  SECTION("p = 2, window 4") {
    TorsionReport r = quadric_torsion_experiment(2, 2, 4, 2);
    CHECK(r.pass);
    CHECK(r.lo.found);
    CHECK(r.stable);
    CHECK(r.coneNegative);
    BlockDivisors expect{{{0, 0}, {1}}, {{0, 2}, {1}}, {{0, 4}, {1}}, {{2, 0}, {1}}, {{4, 0}, {1}}};
    CHECK(r.lo.table == expect);
    CHECK(r.lo.classes == 5);
    // every class here is p^{e-1} times a unit section: the window is still
    // too small for the distinguished weight-(4,4) class (total weight 8)
    CHECK(r.lo.genuineClasses == 0);
    CHECK_FALSE(r.candidateVisible);
    // top-power classes are finite-precision artifacts: one precision higher
    // nothing reduces onto them as p-torsion
    CHECK_FALSE(r.liftsToNextPrecision);
  }
  SECTION("p = 2, window 6") {
    TorsionReport r = quadric_torsion_experiment(2, 2, 6, 2);
    CHECK(r.pass);
    CHECK(r.stable);
    CHECK(r.coneNegative);
    CHECK(r.lo.classes == 9);
    CHECK(r.lo.genuineClasses == 0);
  }
  SECTION("p = 3, window 4") {
    TorsionReport r = quadric_torsion_experiment(3, 2, 4, 2);
    CHECK(r.pass);
    CHECK(r.stable);
    CHECK(r.coneNegative);
    BlockDivisors expect{{{0, 0}, {1}}, {{0, 3}, {1}}, {{3, 0}, {1}}};
    CHECK(r.lo.table == expect);
    CHECK(r.lo.genuineClasses == 0);
    CHECK_FALSE(r.candidateVisible);
  }
  SECTION("p = 3, window 6") {
    TorsionReport r = quadric_torsion_experiment(3, 2, 6, 2);
    CHECK(r.pass);
    CHECK(r.stable);
    CHECK(r.coneNegative);
    CHECK(r.lo.classes == 3);
    CHECK(r.lo.genuineClasses == 0);
  }
}

TEST_CASE("the distinguished class enters once the window holds weight (2p, 2p)") {
  TorsionReport r = quadric_torsion_experiment(2, 2, 8, 2);
  CHECK(r.pass);
  CHECK(r.stable);
  CHECK(r.coneNegative);
  CHECK(r.candidateWeight == WeightVec{4, 4});
  REQUIRE(r.candidateVisible);
  CHECK(r.candidateNonzero);
  CHECK(r.candidatePKills);
  CHECK(r.candidateHorizontal);
  CHECK(r.candidateClassNonzero);
  CHECK(r.candidateGenuine);
  CHECK(r.lo.genuineClasses == 1);
  auto it = r.lo.table.find(WeightVec{4, 4});
  REQUIRE(it != r.lo.table.end());
  CHECK(it->second == std::vector<u64>{1});
  // genuine torsion persists: the class at (4,4) is the reduction of a
  // p-torsion class at the next precision, unlike the top-power artifacts
  CHECK(r.liftsToNextPrecision);
}
