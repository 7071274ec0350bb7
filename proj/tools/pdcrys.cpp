// Command-line driver: reads a JSON job document, runs the requested
// computation, and writes a deterministic JSON report to --out or stdout.
// Human-readable status and timing go to stderr so the report stream stays
// byte-exact across runs and thread counts.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pdcrys/job.hpp"
#include "pdcrys/parallel.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pdcrys::JobError("cannot open job file '" + path + "'", 2);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative output paths land in $PDCRYS_OUT_DIR when it is set.
std::string resolve_out(const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  if (const char* dir = std::getenv("PDCRYS_OUT_DIR"); dir && *dir)
    return (std::filesystem::path(dir) / p).string();
  return path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"divided-power envelopes, crystals, and their cohomology over Z/p^e"};
  std::string jobPath, outPath;
  pdcrys::u64 degree = 0, level = 0, margin = 2;
  int threads = 1;
  app.add_option("--job", jobPath, "path to a JSON job document")->required();
  auto* optOut = app.add_option("--out", outPath, "report path (default: job's 'out' or stdout)");
  auto* optDeg = app.add_option("--degree", degree, "override the job's truncation window");
  auto* optLvl = app.add_option("--level", level, "override the job's level cap");
  app.add_option("--stability-margin", margin, "window bump for the stability recheck")
      ->default_val(2);
  app.add_option("--threads", threads, "worker threads for block-parallel loops")
      ->default_val(1);
  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  try {
    if (threads < 1) throw pdcrys::JobError("--threads must be at least 1", 2);
    pdcrys::global_thread_count() = threads;
    pdcrys::Job job = pdcrys::parse_job(read_file(jobPath));
    if (optDeg->count()) {
      if (degree < 1 || degree > 64) throw pdcrys::JobError("--degree out of range [1, 64]", 2);
      job.degree = degree;
    }
    if (optLvl->count()) {
      if (level < 1 || level > 6) throw pdcrys::JobError("--level out of range [1, 6]", 2);
      job.level = level;
    }
    if (margin < 1 || margin > 16)
      throw pdcrys::JobError("--stability-margin out of range [1, 16]", 2);

    pdcrys::JobResult res = pdcrys::run_job(job, margin);
    std::string target = optOut->count() ? outPath : job.out;
    target = resolve_out(target);
    if (target.empty()) {
      std::fwrite(res.document.data(), 1, res.document.size(), stdout);
    } else {
      std::filesystem::path p(target);
      if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
      std::ofstream out(p, std::ios::binary);
      if (!out) throw pdcrys::JobError("cannot write report to '" + target + "'", 2);
      out << res.document;
      std::cerr << "report written to " << target << "\n";
    }
    std::cerr << res.summary << "\n";
    code = res.exitCode;
  } catch (const pdcrys::JobError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    code = ex.exitCode;
  } catch (const pdcrys::ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    code = 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    code = 2;
  } catch (const std::logic_error& ex) {
    std::cerr << "invariant failure: " << ex.what() << "\n";
    code = 1;
  } catch (const std::exception& ex) {
    std::cerr << "failure: " << ex.what() << "\n";
    code = 1;
  }
  const auto t1 = std::chrono::steady_clock::now();
  std::cerr << "elapsed: "
            << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() << " ms\n";
  return code;
}
