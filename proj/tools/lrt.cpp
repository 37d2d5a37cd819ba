#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "lrt/lrt.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoConverge = 2;

std::vector<double> parse_window_arg(const std::string& arg) {
  std::vector<double> vals;
  std::size_t start = 0;
  while (start <= arg.size()) {
    const std::size_t comma = arg.find(',', start);
    const std::string part = arg.substr(
        start, comma == std::string::npos ? std::string::npos
                                          : comma - start);
    std::size_t pos = 0;
    try {
      vals.push_back(std::stod(part, &pos));
    } catch (const std::exception&) {
      throw lrt::InvalidInputError("malformed window '" + arg +
                                   "', expected x,y,w,h");
    }
    if (pos != part.size())
      throw lrt::InvalidInputError("malformed window '" + arg +
                                   "', expected x,y,w,h");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (vals.size() != 4)
    throw lrt::InvalidInputError("window needs four components x,y,w,h");
  return vals;
}

lrt::InnerSolverKind parse_solver(const std::string& name) {
  if (name == "direct") return lrt::InnerSolverKind::direct;
  if (name == "sgs") return lrt::InnerSolverKind::sgs;
  if (name == "sgs-g") return lrt::InnerSolverKind::sgs_g;
  throw lrt::InvalidInputError("unknown solver '" + name +
                               "' (expected direct, sgs or sgs-g)");
}

void validate_steps(double xi, double rho) {
  if (!(xi > 0.0 && xi < lrt::kGoldenRatio))
    throw lrt::InvalidInputError("xi must lie in (0, (1+sqrt(5))/2)");
  if (!(rho > 0.0 && rho < 2.0))
    throw lrt::InvalidInputError("rho must lie in (0, 2)");
}

void write_transform(const fs::path& path,
                     const lrt::AffineParams& tau) {
  std::ofstream out(path);
  if (!out) throw lrt::IoError("cannot write " + path.string());
  char buf[64];
  for (int k = 0; k < 6; ++k) {
    std::snprintf(buf, sizeof(buf), "%.12g\n", tau.p(k));
    out << buf;
  }
}

void write_report_csv(const fs::path& path,
                      const std::vector<lrt::RoundRecord>& rounds,
                      const std::string& solver) {
  lrt::RunReport report;
  for (const auto& r : rounds) {
    lrt::BenchRow row;
    row.instance = 0;
    row.outer = r.round;
    row.solver = solver;
    row.iterations = r.iterations;
    row.time_s = r.time_s;
    row.rank = r.rank;
    row.e_l1 = r.e_l1;
    row.eta = r.eta;
    report.rows.push_back(row);
  }
  std::ofstream out(path);
  if (!out) throw lrt::IoError("cannot write " + path.string());
  report.write_csv(out);
}

struct RectifyArgs {
  std::string input;
  std::string window;
  std::string solver = "sgs";
  std::string lambda = "auto";
  double xi = 1.618;
  double rho = 1.8;
  double tol = 1e-3;
  int max_iter = 1000;
  int max_outer = 30;
  bool init_search = false;
  std::string out = "lrt_out";
};

int cmd_rectify(const RectifyArgs& args) {
  const lrt::GrayImage scene = lrt::read_pnm(args.input);
  const auto w = parse_window_arg(args.window);
  lrt::Window window{w[0], w[1], static_cast<int>(w[2]),
                     static_cast<int>(w[3])};
  if (window.width < 2 || window.height < 2 || window.x0 < 0 ||
      window.y0 < 0 || window.x0 + window.width > scene.cols() ||
      window.y0 + window.height > scene.rows())
    throw lrt::InvalidInputError(
        "window " + args.window + " does not fit inside the " +
        std::to_string(scene.cols()) + "x" + std::to_string(scene.rows()) +
        " image");

  validate_steps(args.xi, args.rho);
  lrt::OuterConfig cfg;
  cfg.solver = parse_solver(args.solver);
  cfg.inner.xi = args.xi;
  cfg.inner.rho = args.rho;
  cfg.inner.tol = args.tol;
  cfg.inner.max_iter = args.max_iter;
  cfg.max_outer = args.max_outer;
  cfg.use_init_search = args.init_search;
  if (args.lambda != "auto") {
    std::size_t pos = 0;
    double value = 0.0;
    try {
      value = std::stod(args.lambda, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != args.lambda.size() || !(value > 0.0))
      throw lrt::InvalidInputError("lambda must be 'auto' or a positive "
                                   "number, got '" +
                                   args.lambda + "'");
    cfg.lambda_override = value;
  }

  const lrt::RectifyResult res = lrt::rectify(scene, window, cfg);

  fs::create_directories(args.out);
  const fs::path dir(args.out);

  lrt::GrayImage rectified =
      lrt::normalize(lrt::warp(scene, res.tau_final, window)).first;
  lrt::GrayImage lowrank = res.X_final;
  lrt::GrayImage sparse = res.E_final.cwiseAbs();
  const auto s_rect = lrt::rescale_unit(rectified);
  const auto s_low = lrt::rescale_unit(lowrank);
  const auto s_sparse = lrt::rescale_unit(sparse);
  lrt::write_pgm((dir / "rectified.pgm").string(), rectified);
  lrt::write_pgm((dir / "lowrank.pgm").string(), lowrank);
  lrt::write_pgm((dir / "sparse.pgm").string(), sparse);
  {
    std::ofstream scales(dir / "scales.txt");
    char buf[128];
    std::snprintf(buf, sizeof(buf), "rectified %.12g %.12g\n", s_rect.first,
                  s_rect.second);
    scales << buf;
    std::snprintf(buf, sizeof(buf), "lowrank %.12g %.12g\n", s_low.first,
                  s_low.second);
    scales << buf;
    std::snprintf(buf, sizeof(buf), "sparse %.12g %.12g\n", s_sparse.first,
                  s_sparse.second);
    scales << buf;
  }
  write_transform(dir / "transform.txt", res.tau_final);
  write_report_csv(dir / "report.csv", res.per_round, args.solver);

  std::printf("%s: %d round(s), final objective %.6g, rank %d, %s\n",
              args.solver.c_str(), res.rounds,
              res.per_round.back().objective, res.per_round.back().rank,
              res.stagnated ? "stagnated" : "max rounds reached");
  return res.stagnated ? kExitOk : kExitNoConverge;
}

struct BenchArgs {
  std::string suite = "default";
  std::string solvers = "direct,sgs,sgs-g";
  std::uint64_t seed = 1;
  std::string out = "lrt_out";
};

int cmd_bench(const BenchArgs& args) {
  std::vector<lrt::InnerSolverKind> solvers;
  std::vector<std::string> names;
  std::size_t start = 0;
  while (start <= args.solvers.size()) {
    const std::size_t comma = args.solvers.find(',', start);
    const std::string part = args.solvers.substr(
        start,
        comma == std::string::npos ? std::string::npos : comma - start);
    if (!part.empty()) {
      solvers.push_back(parse_solver(part));
      names.push_back(part);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (solvers.empty())
    throw lrt::InvalidInputError("empty solver list");

  const auto suite = lrt::make_suite(args.suite, args.seed);
  lrt::OuterConfig cfg;
  const lrt::RunReport report = lrt::run_benchmark(suite, solvers, cfg);

  fs::create_directories(args.out);
  const fs::path csv = fs::path(args.out) / "report.csv";
  {
    std::ofstream out(csv);
    if (!out) throw lrt::IoError("cannot write " + csv.string());
    report.write_csv(out);
  }

  bool all_converged = true;
  for (const auto& name : names) {
    std::vector<int> iters;
    int converged = 0, total = 0;
    for (const auto& row : report.rows) {
      if (row.solver != name) continue;
      ++total;
      iters.push_back(row.iterations);
      if (row.converged && !row.failed) ++converged;
    }
    std::sort(iters.begin(), iters.end());
    const int median = iters.empty() ? 0 : iters[iters.size() / 2];
    std::printf("%s: median_iter=%d converged=%d/%d\n", name.c_str(),
                median, converged, total);
    if (converged != total) all_converged = false;
  }
  std::printf("report: %s\n", csv.string().c_str());
  return all_converged ? kExitOk : kExitNoConverge;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-rank texture rectification (nuclear norm + l1, "
               "ADMM family solvers)"};
  app.require_subcommand(1);

  RectifyArgs rect;
  auto* rcmd =
      app.add_subcommand("rectify", "rectify a window of a PGM/PPM image");
  rcmd->add_option("--input", rect.input, "input image (P2/P3/P5/P6)")
      ->required();
  rcmd->add_option("--window", rect.window, "window as x,y,w,h")->required();
  rcmd->add_option("--solver", rect.solver, "direct | sgs | sgs-g");
  rcmd->add_option("--lambda", rect.lambda,
                   "sparsity weight, 'auto' = 1/sqrt(window width)");
  rcmd->add_option("--xi", rect.xi, "multiplier step length");
  rcmd->add_option("--rho", rect.rho, "relaxation factor (sgs-g)");
  rcmd->add_option("--tol", rect.tol, "KKT tolerance");
  rcmd->add_option("--max-iter", rect.max_iter, "inner iteration cap");
  rcmd->add_option("--max-outer", rect.max_outer, "outer round cap");
  rcmd->add_flag("--init-search", rect.init_search,
                 "rotation grid initialization");
  rcmd->add_option("--out", rect.out, "output directory");

  BenchArgs bench;
  auto* bcmd =
      app.add_subcommand("bench", "synthetic solver comparison benchmark");
  bcmd->add_option("--suite", bench.suite, "tiny | default");
  bcmd->add_option("--solvers", bench.solvers,
                   "comma-separated solver list");
  bcmd->add_option("--seed", bench.seed, "suite seed");
  bcmd->add_option("--out", bench.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (rcmd->parsed()) return cmd_rectify(rect);
    if (bcmd->parsed()) return cmd_bench(bench);
  } catch (const lrt::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConverge;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
