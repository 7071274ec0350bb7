#pragma once

#include <json.hpp>
#include <random>
#include <string>

#include "pdcrys/compare.hpp"

namespace pdcrys {

// A job document is a JSON description of a presentation (prime power, base
// variables, monomial ideal, truncation window, optional crystal) plus a
// command.  Executing it yields a deterministic JSON report: identical jobs
// produce byte-identical documents regardless of thread count, so reports
// double as regression goldens.
//
// Exit codes: 0 the command ran and every asserted property held; 1 a
// mathematical check failed or an internal invariant broke; 2 the job was
// malformed (schema, parse, or unsupported presentation); 3 the computation
// finished but the stability recheck disagreed, so the window is too small
// to conclude.

struct JobError : std::runtime_error {
  int exitCode;
  JobError(const std::string& msg, int code) : std::runtime_error(msg), exitCode(code) {}
};

enum class JobCommand { Envelope, Derham, Cech, Compare, Torsion, Selftest };

struct Job {
  JobCommand command = JobCommand::Selftest;
  u64 prime = 2, precision = 1, nilpotency = 1, degree = 0, level = 1;
  std::vector<std::string> variables;
  std::vector<Monomial> ideal;  // exponent rows over `variables`; "p" dropped
  bool hasCrystal = false;
  u64 crystalRank = 1;
  std::vector<WeightVec> crystalWeights;
  std::vector<std::vector<std::vector<std::string>>> connection;  // [dir][i][j]
  std::string out;  // default output path, overridable on the command line
};

struct JobResult {
  std::string document;  // JSON report, newline-terminated
  std::string summary;   // one human-readable line
  int exitCode = 0;
};

namespace jobdetail {

using json = nlohmann::ordered_json;

inline u64 get_count(const json& j, const char* key, u64 lo, u64 hi) {
  const json& v = j.at(key);
  if (!v.is_number_unsigned())
    throw JobError(std::string("job key '") + key + "' must be a nonnegative integer", 2);
  u64 x = v.get<u64>();
  if (x < lo || x > hi)
    throw JobError(std::string("job key '") + key + "' out of range [" + std::to_string(lo) +
                       ", " + std::to_string(hi) + "]",
                   2);
  return x;
}

inline bool is_prime(u64 p) {
  if (p < 2) return false;
  for (u64 d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

inline std::vector<std::string> get_names(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_array() || v.empty())
    throw JobError(std::string("job key '") + key + "' must be a nonempty array of strings", 2);
  std::vector<std::string> out;
  for (const json& x : v) {
    if (!x.is_string())
      throw JobError(std::string("job key '") + key + "' must contain only strings", 2);
    out.push_back(x.get<std::string>());
  }
  return out;
}

// Parse one ideal-generator string as a coefficient-1 monomial over the base
// variables.  The literal "p" is the canonically divided-powered part of the
// ideal and contributes nothing to the envelope presentation, so it is
// accepted and dropped (signalled by nullopt).
inline std::optional<Monomial> parse_ideal_generator(const std::string& s, const PDAlgebra& base) {
  std::string t;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) t += c;
  if (t == "p") return std::nullopt;
  PDElement a = parse_element(base, s);
  if (a.lossy) throw JobError("ideal generator '" + s + "' exceeds the degree window", 2);
  if (a.terms.size() != 1)
    throw JobError("ideal generator '" + s + "' is not a single monomial", 2);
  const auto& [m, c] = *a.terms.begin();
  if (c != 1) throw JobError("ideal generator '" + s + "' must have coefficient 1", 2);
  if (base.mono_total(m) == 0)
    throw JobError("ideal generator '" + s + "' must be nonconstant", 2);
  return m;
}

inline void require_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::vector<std::string>& required, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || key == a;
    if (!ok) throw JobError("unknown key '" + key + "' in " + where, 2);
  }
  for (const auto& r : required)
    if (!j.contains(r)) throw JobError("missing key '" + r + "' in " + where, 2);
}

inline json weight_json(const WeightVec& w) {
  json a = json::array();
  for (u32 x : w) a.push_back(x);
  return a;
}

inline json divisors_json(const BlockDivisors& t) {
  json a = json::array();
  for (const auto& [w, exps] : t) {
    json b;
    b["weight"] = weight_json(w);
    b["divisors"] = exps;
    a.push_back(std::move(b));
  }
  return a;
}

inline json table_list_json(const std::vector<BlockDivisors>& h) {
  json a = json::array();
  for (size_t k = 0; k < h.size(); ++k) {
    json b;
    b["degree"] = k;
    b["blocks"] = divisors_json(h[k]);
    a.push_back(std::move(b));
  }
  return a;
}

}  // namespace jobdetail

inline Job parse_job(const std::string& text) {
  using jobdetail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw JobError(std::string("job document is not valid JSON: ") + ex.what(), 2);
  }
  if (!doc.is_object()) throw JobError("job document must be a JSON object", 2);
  if (!doc.contains("command") || !doc.at("command").is_string())
    throw JobError("job document needs a string key 'command'", 2);
  const std::string cmd = doc.at("command").get<std::string>();

  Job job;
  if (cmd == "envelope")
    job.command = JobCommand::Envelope;
  else if (cmd == "derham")
    job.command = JobCommand::Derham;
  else if (cmd == "cech")
    job.command = JobCommand::Cech;
  else if (cmd == "compare")
    job.command = JobCommand::Compare;
  else if (cmd == "torsion")
    job.command = JobCommand::Torsion;
  else if (cmd == "selftest")
    job.command = JobCommand::Selftest;
  else
    throw JobError("unknown command '" + cmd + "'", 2);

  if (job.command == JobCommand::Selftest) {
    jobdetail::require_keys(doc, {"command", "out"}, {}, "selftest job");
    if (doc.contains("out")) job.out = doc.at("out").get<std::string>();
    return job;
  }

  std::vector<std::string> allowed = {"command", "prime",  "precision", "nilpotency",
                                      "variables", "ideal", "degree",    "out"};
  const bool leveled = job.command == JobCommand::Cech || job.command == JobCommand::Compare;
  const bool crystalline = job.command == JobCommand::Derham || leveled;
  if (leveled) allowed.push_back("level");
  if (crystalline) allowed.push_back("crystal");
  jobdetail::require_keys(doc, allowed, {"prime", "precision", "variables", "degree"},
                          "job document");

  job.prime = jobdetail::get_count(doc, "prime", 2, 251);
  if (!jobdetail::is_prime(job.prime))
    throw JobError("'prime' must be a prime number", 2);
  job.precision = jobdetail::get_count(doc, "precision", 1, 12);
  if (doc.contains("nilpotency")) {
    job.nilpotency = jobdetail::get_count(doc, "nilpotency", 1, 12);
    if (job.nilpotency != 1)
      throw JobError("unsupported presentation: only nilpotency 1 targets are implemented", 2);
  }
  job.degree = jobdetail::get_count(doc, "degree", 1, 64);
  if (doc.contains("level")) job.level = jobdetail::get_count(doc, "level", 1, 6);
  if (doc.contains("out")) {
    if (!doc.at("out").is_string()) throw JobError("'out' must be a string path", 2);
    job.out = doc.at("out").get<std::string>();
  }
  job.variables = jobdetail::get_names(doc, "variables");

  // a throwaway flat algebra over the variables, for parsing generators
  std::vector<VarKind> kinds(job.variables.size(), VarKind::Ordinary);
  std::vector<WeightVec> ws;
  for (size_t i = 0; i < job.variables.size(); ++i) {
    WeightVec w(job.variables.size(), 0);
    w[i] = 1;
    ws.push_back(w);
  }
  PDAlgebra base(PrimePower(job.prime, job.precision), job.degree, job.variables, kinds, ws);

  if (doc.contains("ideal")) {
    const json& gens = doc.at("ideal");
    if (!gens.is_array()) throw JobError("'ideal' must be an array of monomial strings", 2);
    for (const json& g : gens) {
      if (!g.is_string()) throw JobError("'ideal' must contain only strings", 2);
      if (auto m = jobdetail::parse_ideal_generator(g.get<std::string>(), base)) {
        for (const Monomial& seen : job.ideal)
          if (seen == *m)
            throw JobError("duplicate ideal generator '" + g.get<std::string>() + "'", 2);
        job.ideal.push_back(*m);
      }
    }
  }

  if (doc.contains("crystal")) {
    const json& c = doc.at("crystal");
    if (!c.is_object()) throw JobError("'crystal' must be an object", 2);
    jobdetail::require_keys(c, {"rank", "weights", "connection"},
                            {"rank", "weights", "connection"}, "crystal block");
    job.hasCrystal = true;
    job.crystalRank = jobdetail::get_count(c, "rank", 1, 16);
    const json& wj = c.at("weights");
    if (!wj.is_array() || wj.size() != job.crystalRank)
      throw JobError("'crystal.weights' must list one weight vector per generator", 2);
    for (const json& row : wj) {
      if (!row.is_array() || row.size() != job.variables.size())
        throw JobError("crystal weight vectors must have one entry per variable", 2);
      WeightVec w;
      for (const json& x : row) {
        if (!x.is_number_unsigned()) throw JobError("crystal weights must be nonnegative", 2);
        w.push_back(x.get<u32>());
      }
      job.crystalWeights.push_back(std::move(w));
    }
    const json& conn = c.at("connection");
    if (!conn.is_array() || conn.size() != job.variables.size())
      throw JobError("'crystal.connection' must list one matrix per variable", 2);
    for (const json& mat : conn) {
      if (!mat.is_array() || mat.size() != job.crystalRank)
        throw JobError("connection matrices must be rank x rank", 2);
      std::vector<std::vector<std::string>> rows;
      for (const json& row : mat) {
        if (!row.is_array() || row.size() != job.crystalRank)
          throw JobError("connection matrices must be rank x rank", 2);
        std::vector<std::string> r;
        for (const json& x : row) {
          if (!x.is_string()) throw JobError("connection entries must be element strings", 2);
          r.push_back(x.get<std::string>());
        }
        rows.push_back(std::move(r));
      }
      job.connection.push_back(std::move(rows));
    }
  }
  return job;
}

namespace jobdetail {

inline EnvelopeSpec job_envelope_spec(const Job& job) {
  EnvelopeSpec s;
  s.R = PrimePower(job.prime, job.precision);
  s.degree = job.degree;
  s.ordNames = job.variables;
  for (size_t i = 0; i < job.variables.size(); ++i) {
    WeightVec w(job.variables.size(), 0);
    w[i] = 1;
    s.ordWeights.push_back(w);
  }
  for (size_t t = 0; t < job.ideal.size(); ++t) {
    s.genNames.push_back("g" + std::to_string(t + 1));
    s.gens.push_back(job.ideal[t]);
  }
  return s;
}

inline Crystal job_crystal(const Job& job, const Envelope& env) {
  if (!job.hasCrystal) return trivial_crystal(env);
  Crystal cr;
  cr.rank = job.crystalRank;
  cr.graded = true;
  cr.genWeights = job.crystalWeights;
  cr.A.assign(env.ndirs(), std::vector<std::vector<PDElement>>(
                               cr.rank, std::vector<PDElement>(cr.rank)));
  if (job.connection.size() != env.ndirs())
    throw JobError("connection matrices must cover every direction", 2);
  for (u64 d = 0; d < env.ndirs(); ++d)
    for (u64 i = 0; i < cr.rank; ++i)
      for (u64 j = 0; j < cr.rank; ++j) {
        try {
          cr.A[d][i][j] = parse_element(env.alg, job.connection[d][i][j]);
        } catch (const ParseError& ex) {
          throw JobError(std::string("connection entry [") + std::to_string(d) + "][" +
                             std::to_string(i) + "][" + std::to_string(j) + "]: " + ex.what(),
                         2);
        }
      }
  if (!check_integrability(env, cr))
    throw JobError("crystal connection is not integrable", 2);
  if (!check_quasi_nilpotent(env, cr))
    throw JobError("crystal connection is not topologically quasi-nilpotent", 2);
  return cr;
}

inline json job_header(const Job& job) {
  json doc;
  doc["prime"] = job.prime;
  doc["precision"] = job.precision;
  doc["degree"] = job.degree;
  return doc;
}

inline JobResult finish(json doc, std::string summary, int exitCode) {
  JobResult r;
  r.document = doc.dump(2) + "\n";
  r.summary = std::move(summary);
  r.exitCode = exitCode;
  return r;
}

inline JobResult run_envelope(const Job& job) {
  Envelope env = make_envelope(job_envelope_spec(job));
  const PDAlgebra& alg = env.alg;
  json doc;
  doc["kind"] = "envelope";
  doc.update(job_header(job));
  json vars = json::array();
  for (u64 i = 0; i < alg.nvars(); ++i) {
    json v;
    v["name"] = alg.names[i];
    v["kind"] = alg.kinds[i] == VarKind::Ordinary ? "ordinary" : "divided-power";
    v["weight"] = weight_json(alg.weights[i]);
    vars.push_back(std::move(v));
  }
  doc["variables"] = std::move(vars);
  doc["window_size"] = env.window.size();
  json window = json::array();
  for (u64 j = 0; j < env.window.size(); ++j)
    window.push_back(mono_to_string(alg, env.window.monos[j], 1));
  doc["window"] = std::move(window);
  doc["relation_rank"] = env.rel.rows.size();
  json rels = json::array();
  for (size_t i = 0; i < env.rel.rows.size(); ++i)
    rels.push_back(to_string(alg, env.row_element(i)));
  doc["relations"] = std::move(rels);
  doc["saturation_passes"] = env.saturationPasses;
  return finish(std::move(doc),
                "envelope: window " + std::to_string(env.window.size()) + ", relation rank " +
                    std::to_string(env.rel.rows.size()),
                0);
}

inline JobResult run_derham(const Job& job) {
  Envelope env = make_envelope(job_envelope_spec(job));
  Crystal cr = job_crystal(job, env);
  CochainComplex c = crystal_complex(env, cr);
  detail::validate_trusted(c, job.degree);
  json doc;
  doc["kind"] = "derham";
  doc.update(job_header(job));
  doc["directions"] = env.ndirs();
  doc["crystal_rank"] = cr.rank;
  std::vector<BlockDivisors> h;
  for (u64 k = 0; k <= env.ndirs(); ++k)
    h.push_back(block_divisors(cohomology(c, i64(k), job.degree), job.degree));
  doc["cohomology"] = table_list_json(h);
  u64 classes = 0;
  for (const auto& t : h)
    for (const auto& [w, exps] : t) classes += exps.size();
  return finish(std::move(doc), "derham: " + std::to_string(classes) + " summands", 0);
}

inline JobResult run_cech(const Job& job) {
  CaTower t = ca_tower(job_envelope_spec(job), job.level);
  Crystal cr = job_crystal(job, t.lv[0]);
  CochainComplex row = ca_complex(t, cr);
  detail::validate_trusted(row, job.degree);
  json doc;
  doc["kind"] = "cech";
  doc.update(job_header(job));
  doc["level"] = job.level;
  json sizes = json::array();
  for (const Envelope& lv : t.lv) sizes.push_back(lv.window.size());
  doc["window_sizes"] = std::move(sizes);
  doc["crystal_rank"] = cr.rank;
  std::vector<BlockDivisors> h;
  for (u64 k = 0; k <= job.level; ++k)
    h.push_back(block_divisors(cohomology(row, i64(k), job.degree), job.degree));
  doc["sections_cohomology"] = table_list_json(h);
  return finish(std::move(doc), "cech: tower of " + std::to_string(job.level + 1) + " envelopes",
                0);
}

inline JobResult run_compare(const Job& job, u64 margin) {
  CrystalMaker maker;
  if (job.hasCrystal) maker = [&job](const Envelope& env) { return job_crystal(job, env); };
  CompareReport r = compare_derham_ca(job_envelope_spec(job), maker, job.level, margin);
  json doc;
  doc["kind"] = "compare";
  doc.update(job_header(job));
  doc["levels"] = r.levels;
  doc["margin"] = r.margin;
  doc["max_degree"] = r.maxDegree;
  json windows = json::array();
  for (const CompareWindow* w : {&r.lo, &r.hi}) {
    json jw;
    jw["window"] = w->window;
    jw["derham"] = table_list_json(w->derham);
    jw["total"] = table_list_json(w->total);
    jw["sections"] = table_list_json(w->sections);
    jw["sides_equal"] = w->sidesEqual;
    jw["derham_onto"] = w->derhamOnto;
    jw["sections_onto"] = w->sectionsOnto;
    windows.push_back(std::move(jw));
  }
  doc["windows"] = std::move(windows);
  doc["stable"] = r.stable;
  doc["pass"] = r.pass;
  int code = r.pass ? 0 : (r.stable ? 1 : 3);
  return finish(std::move(doc),
                std::string("compare: ") +
                    (r.pass ? "pass" : (r.stable ? "FAIL" : "inconclusive (window too small)")),
                code);
}

inline JobResult run_torsion(const Job& job, u64 margin) {
  // the experiment is specific to the quadric-cone presentation
  std::vector<Monomial> want = {Monomial{2, 0}, Monomial{1, 1}, Monomial{0, 2}};
  bool quadric = job.variables.size() == 2 && job.ideal.size() == 3;
  if (quadric) {
    std::vector<Monomial> sorted = job.ideal;
    std::sort(sorted.begin(), sorted.end());
    std::sort(want.begin(), want.end());
    quadric = sorted == want;
  }
  if (!quadric)
    throw JobError(
        "unsupported presentation: the torsion experiment needs two variables "
        "and the ideal (x^2, x*y, y^2)",
        2);
  if (job.precision < 2)
    throw JobError("the torsion experiment needs precision >= 2", 2);

  TorsionReport r = quadric_torsion_experiment(job.prime, job.precision, job.degree, margin);
  json doc;
  doc["kind"] = "torsion";
  doc.update(job_header(job));
  doc["margin"] = r.margin;
  doc["torsion_table"] = divisors_json(r.lo.table);
  doc["classes"] = r.lo.classes;
  doc["genuine_classes"] = r.lo.genuineClasses;
  doc["stable"] = r.stable;
  doc["cone_negative"] = r.coneNegative;
  json cand;
  cand["weight"] = weight_json(r.candidateWeight);
  cand["visible"] = r.candidateVisible;
  if (r.candidateVisible) {
    cand["element"] = r.candidateElement;
    cand["nonzero"] = r.candidateNonzero;
    cand["p_kills"] = r.candidatePKills;
    cand["horizontal"] = r.candidateHorizontal;
    cand["class_nonzero"] = r.candidateClassNonzero;
    cand["genuine"] = r.candidateGenuine;
  }
  doc["candidate"] = std::move(cand);
  doc["lifts_to_next_precision"] = r.liftsToNextPrecision;
  doc["pass"] = r.pass;
  int code = r.pass ? 0 : (r.stable ? 1 : 3);
  return finish(std::move(doc),
                "torsion: " + std::to_string(r.lo.classes) + " classes (" +
                    std::to_string(r.lo.genuineClasses) + " genuine), " +
                    (r.pass ? "pass" : (r.stable ? "FAIL" : "inconclusive")),
                code);
}

// Compact end-to-end exercise of every layer, with a fixed seed so the
// resulting document is reproducible.
inline JobResult run_selftest() {
  std::vector<std::pair<std::string, bool>> checks;
  std::mt19937_64 rng(0x5eeded);

  {  // divided-power axioms on random ideal elements
    bool ok = true;
    for (u64 p : {u64(2), u64(3)}) {
      PrimePower R(p, 2);
      Envelope env = envelope_regular(R, 8, {"x"}, {"y"});
      const PDAlgebra& alg = env.alg;
      for (int rep = 0; rep < 25 && ok; ++rep) {
        auto rnd = [&](u64 maxw) {
          PDElement a;
          for (u64 j = 0; j < env.window.size(); ++j) {
            const Monomial& m = env.window.monos[j];
            if (alg.mono_total(m) > maxw) continue;
            bool pd = m[1] > 0;
            u64 c = rng() % R.q;
            if (!pd) c = R.mul(c, R.p);  // stay inside the divided-power ideal
            pd_add_term(alg, a, m, c);
          }
          return a;
        };
        PDElement a = rnd(2), b = rnd(2);
        for (u64 m = 1; m + 2 <= 4 && ok; ++m)
          for (u64 n = 1; m + n <= 4 && ok; ++n) {
            PDElement lhs = pd_mul(alg, gamma(alg, a, m), gamma(alg, a, n));
            u64 binom = 1;
            for (u64 i = 1; i <= n; ++i) binom = binom * (m + i) / i;
            PDElement rhs = pd_scale(alg, R.reduce(binom), gamma(alg, a, m + n));
            ok = ok && pd_sub(alg, lhs, rhs).is_zero();
          }
        for (u64 n = 1; n <= 3 && ok; ++n) {
          PDElement lhs = gamma(alg, pd_add(alg, a, b), n);
          PDElement rhs;
          for (u64 i = 0; i <= n; ++i)
            rhs = pd_add(alg, rhs, pd_mul(alg, gamma(alg, a, i), gamma(alg, b, n - i)));
          ok = ok && pd_sub(alg, lhs, rhs).is_zero();
        }
      }
    }
    checks.emplace_back("pd-axioms", ok);
  }

  {  // Smith normal form factorization on random small matrices
    bool ok = true;
    PrimePower R(2, 3);
    for (int rep = 0; rep < 20 && ok; ++rep) {
      Dense A(4, Vec(4, 0));
      for (auto& row : A)
        for (auto& x : row) x = rng() % R.q;
      SnfResult s = snf(SparseMatrix::from_dense(A), R);
      for (u64 i = 0; i < 4 && ok; ++i)
        for (u64 j = 0; j < 4 && ok; ++j) {
          u64 acc = 0;
          for (u64 k = 0; k < 4; ++k)
            for (u64 l = 0; l < 4; ++l) acc = R.add(acc, R.mul(R.mul(s.U[i][k], A[k][l]), s.V[l][j]));
          ok = acc == (i == j ? s.diag_entry(i) : 0);
        }
    }
    checks.emplace_back("snf-factorization", ok);
  }

  {  // interval homotopy contracts the free cosimplicial module
    PrimePower R(2, 2);
    HomotopyModule g = gadget_module(R, 4);
    bool ok = true;
    for (u64 n = 1; n <= 3 && ok; ++n) {
      Dense ds = detail::dense_mul(hm_coboundary(g, n - 1), hm_contraction(g, n), R);
      Dense sd = detail::dense_mul(hm_contraction(g, n + 1), hm_coboundary(g, n), R);
      Dense sum = detail::dense_add_scaled(ds, sd, 1, R);
      for (u64 i = 0; i < g.ranks[n] && ok; ++i)
        for (u64 j = 0; j < g.ranks[n] && ok; ++j) ok = sum[i][j] == (i == j ? 1u : 0u);
    }
    checks.emplace_back("cosimplicial-contraction", ok);
  }

  {  // one thickening level resolves the flat line
    EnvelopeSpec s;
    s.R = PrimePower(2, 2);
    s.degree = 4;
    s.ordNames = {"x"};
    s.ordWeights = {{1}};
    checks.emplace_back("poincare-flat-line", poincare_check(s, 2).pass);
    checks.emplace_back("compare-flat-line", compare_derham_ca(s, nullptr, 2, 2).pass);
  }

  checks.emplace_back("torsion-quadric", quadric_torsion_experiment(2, 2, 4, 2).pass);

  json doc;
  doc["kind"] = "selftest";
  json arr = json::array();
  bool all = true;
  for (const auto& [name, pass] : checks) {
    json c;
    c["name"] = name;
    c["pass"] = pass;
    arr.push_back(std::move(c));
    all = all && pass;
  }
  doc["checks"] = std::move(arr);
  doc["pass"] = all;
  return finish(std::move(doc),
                std::string("selftest: ") + (all ? "pass" : "FAIL") + " (" +
                    std::to_string(checks.size()) + " checks)",
                all ? 0 : 1);
}

}  // namespace jobdetail

inline JobResult run_job(const Job& job, u64 margin = 2) {
  switch (job.command) {
    case JobCommand::Envelope: return jobdetail::run_envelope(job);
    case JobCommand::Derham: return jobdetail::run_derham(job);
    case JobCommand::Cech: return jobdetail::run_cech(job);
    case JobCommand::Compare: return jobdetail::run_compare(job, margin);
    case JobCommand::Torsion: return jobdetail::run_torsion(job, margin);
    case JobCommand::Selftest: return jobdetail::run_selftest();
  }
  throw JobError("unhandled command", 2);
}

}  // namespace pdcrys
