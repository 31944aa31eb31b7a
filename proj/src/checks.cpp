#include "nld/checks.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "nld/errors.hpp"
#include "nld/oracle.hpp"

namespace nld {

namespace {

// pinned tolerances and budgets
constexpr double kOracleTol = 1e-6;
constexpr double kGradientTol = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kBracketSlack = 1e-12;
constexpr double kPartitionTol = 1e-10;
constexpr double kTableTol = 0.05;
constexpr double kDescentSlack = 1e-12;
constexpr double kBbmGapTol = 0.10;
constexpr double kKornFloor = 0.01;

constexpr double kLocalRow[4] = {0.636809, 2.175644, 1.370092, 1.882695};  // u_l2, u_semi, a_l2, cost
constexpr double kNonlocalRowCost = 2.027113;
constexpr double kNonlocalRowUl2 = 0.669808;

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel(double value, double ref) { return std::abs(value - ref) / std::abs(ref); }

DesignField random_design(const Mesh& m, std::mt19937_64& rng, double lo, double hi, double amin, double amax) {
  DesignField a = DesignField::constant(m, 1.0, amin, amax);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : a.values) v = u(rng);
  return a;
}

StateField random_state(const Mesh& m, int comps, std::mt19937_64& rng) {
  StateField u = StateField::zeros(m, comps);
  std::normal_distribution<double> n;
  for (double& v : u.values) v = n(rng);
  return u;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// CSV text without its last column.
std::string drop_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

struct FormCase {
  std::string label;
  Mesh mesh;
  FormKind kind;
};

}  // namespace

CheckSuite::CheckSuite(std::string work_dir, int threads) : work_dir_(std::move(work_dir)), threads_(threads) {}

std::vector<CheckResult> CheckSuite::run(std::span<const int> ids, std::ostream* progress) {
  std::vector<CheckResult> out;
  for (int id : ids) {
    out.push_back(run(id));
    if (progress) *progress << format_check_line(out.back()) << std::endl;
  }
  return out;
}

CheckResult CheckSuite::run(int id) {
  const auto t0 = Clock::now();
  CheckResult r;
  try {
    switch (id) {
      case 1: r = oracle_equivalence(); break;
      case 2: r = gradient_check(); break;
      case 3: r = coefficient_bracket(); break;
      case 4: r = partition_identity(); break;
      case 5: r = table_local_row(); break;
      case 6: r = table_nonlocal_row(); break;
      case 7: r = asymptotic_compatibility(); break;
      case 8: r = descent(); break;
      case 9: r = limit_probes(); break;
      case 10: r = determinism(); break;
      default: throw ParameterError("criteria are numbered 1 to 10");
    }
  } catch (const ParameterError&) {
    throw;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.id = id;
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (r.limit_seconds > 0.0 && r.seconds > r.limit_seconds) {
    r.passed = false;
    r.detail += "; over the time budget";
  }
  return r;
}

StudyConfig CheckSuite::table_config(const std::string& text, const std::string& subdir) const {
  StudyConfig c = StudyConfig::from_string(text);
  c.pgd.quad.threads = threads_;
  c.out = (std::filesystem::path(work_dir_) / subdir).string();
  return c;
}

CheckResult CheckSuite::oracle_equivalence() {
  CheckResult r{0, "oracle equivalence", true, "", 0.0, 120.0};
  const double R = 0.25;
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 16), R);
  std::mt19937_64 rng(101);
  const DesignField a = random_design(m, rng, 0.1, 2.0, 0.1, 2.0);
  QuadConfig q = QuadConfig::defaults(1);
  q.threads = threads_;
  double worst = 0.0;
  for (double s : {0.25, 0.5, 0.75}) {
    const Eigen::MatrixXd O = dense_fractional_assembly_1d(m, a, s, R);
    const Eigen::MatrixXd F = assemble_stiffness(m, a, FormKind::fractional_conductivity(s, R), q).to_dense();
    worst = std::max(worst, ((F - O).array() / O.array()).abs().maxCoeff());
  }
  r.passed = worst <= kOracleTol;
  r.detail = "max entrywise rel err " + fmt("%.2e", worst) + " (tol " + fmt("%.0e", kOracleTol) + ")";
  return r;
}

CheckResult CheckSuite::gradient_check() {
  CheckResult r{0, "gradient vs finite differences", true, "", 0.0, 300.0};
  const double R = 0.25;
  const Mesh local = build_interval_mesh(0.0, 1.0, 32);
  const Mesh layered = extend_with_horizon(local, R);
  QuadConfig q = QuadConfig::defaults(1);
  q.threads = threads_;
  std::mt19937_64 rng(202);
  std::normal_distribution<double> N;
  double worst = 0.0;
  int samples = 0;
  for (const auto& [mesh, kind] : {std::pair<const Mesh&, FormKind>{layered, FormKind::fractional_conductivity(0.5, R)},
                                   std::pair<const Mesh&, FormKind>{local, FormKind::local_conductivity()}})
    for (int k = 0; k < 20; ++k) {
      const DesignField a = random_design(mesh, rng, 0.2, 1.9, 0.1, 2.0);
      std::vector<double> b(a.values.size());
      for (double& v : b) v = N(rng);
      const double exact = directional_derivative(mesh, a, b, kind, Source{}, 0.5, 2.0, q, 1e-12);
      const double fd = central_difference_derivative(mesh, a, b, kind, Source{}, 0.5, 2.0, q, kFdStep, 1e-12);
      worst = std::max(worst, rel(exact, fd));
      ++samples;
    }
  r.passed = worst <= kGradientTol;
  r.detail = std::to_string(samples) + " samples, max rel err " + fmt("%.2e", worst) + " (tol " +
             fmt("%.0e", kGradientTol) + ")";
  return r;
}

CheckResult CheckSuite::coefficient_bracket() {
  CheckResult r{0, "coefficient bracket", true, "", 0.0, 120.0};
  const std::vector<FormCase> cases{
      {"fractional-conductivity", extend_with_horizon(build_interval_mesh(0.0, 1.0, 16), 0.25),
       FormKind::fractional_conductivity(0.5, 0.25)},
      {"local-conductivity", build_disk_mesh_rings(1.0, 4), FormKind::local_conductivity()},
      {"fractional-peridynamic", extend_with_horizon(build_disk_mesh_rings(1.0, 2), 0.3),
       FormKind::fractional_peridynamic(0.6, 0.3)},
      {"local-elasticity", build_disk_mesh_rings(1.0, 4), FormKind::local_elasticity()}};
  std::mt19937_64 rng(303);
  double worst = -1e300;  // largest normalized violation
  int checks = 0;
  for (const auto& c : cases) {
    QuadConfig q = QuadConfig::defaults(c.mesh.dimension());
    q.threads = threads_;
    const FormOperator op(c.mesh, c.kind, q);
    const auto K1 = op.stiffness(DesignField::constant(c.mesh, 1.0, 1.0, 1.0));
    for (int d = 0; d < 10; ++d) {
      const DesignField a = random_design(c.mesh, rng, 0.1, 2.0, 0.1, 2.0);
      const auto Ka = op.stiffness(a);
      for (int k = 0; k < 100; ++k) {
        const StateField v = random_state(c.mesh, op.components(), rng);
        const double e1 = K1.quadratic_form(v.values);
        const double ea = Ka.quadratic_form(v.values);
        worst = std::max({worst, (0.1 * e1 - ea) / e1, (ea - 2.0 * e1) / e1});
        ++checks;
      }
    }
  }
  r.passed = worst <= kBracketSlack;
  r.detail = std::to_string(checks) + " quadratic forms over 4 kinds, worst normalized violation " +
             fmt("%.2e", worst) + " (slack " + fmt("%.0e", kBracketSlack) + ")";
  return r;
}

CheckResult CheckSuite::partition_identity() {
  CheckResult r{0, "partition identity", true, "", 0.0, 60.0};
  const std::vector<FormCase> cases{
      {"1d s=0.5", extend_with_horizon(build_interval_mesh(0.0, 1.0, 16), 0.25),
       FormKind::fractional_conductivity(0.5, 0.25)},
      {"1d s=0.9", extend_with_horizon(build_interval_mesh(0.0, 1.0, 16), 0.25),
       FormKind::fractional_conductivity(0.9, 0.25)},
      {"2d conductivity", extend_with_horizon(build_disk_mesh_rings(1.0, 3), 0.2),
       FormKind::fractional_conductivity(0.4, 0.2)},
      {"2d peridynamic", extend_with_horizon(build_disk_mesh_rings(1.0, 2), 0.3),
       FormKind::fractional_peridynamic(0.7, 0.3)}};
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (const auto& c : cases) {
    QuadConfig q = QuadConfig::defaults(c.mesh.dimension());
    q.threads = threads_;
    const FormOperator op(c.mesh, c.kind, q);
    const auto K1 = op.stiffness(DesignField::constant(c.mesh, 1.0, 1.0, 1.0));
    for (int k = 0; k < 5; ++k) {
      const StateField u = random_state(c.mesh, op.components(), rng);
      double sum = 0.0;
      for (double g : op.element_energies(u)) sum += g;
      worst = std::max(worst, rel(sum, K1.quadratic_form(u.values)));
    }
  }
  r.passed = worst <= kPartitionTol;
  r.detail = "max rel err " + fmt("%.2e", worst) + " (tol " + fmt("%.0e", kPartitionTol) + ")";
  return r;
}

CheckResult CheckSuite::table_local_row() {
  CheckResult r{0, "local reference row", true, "", 0.0, 600.0};
  const StudyConfig c = table_config("study=table\ndofs_ladder=3969\niterations=20\ntau=0.25\nf=const:1\n"
                                     "bounds=0.1:2.0\n",
                                     "criterion5");
  const RungRun run = run_rung(c, c.ladder.front());
  histories_["local reference row"] = {run.result.cost_history};
  const ExperimentRecord& x = run.record;
  const double got[4] = {x.u_l2, x.u_semi, x.a_l2, x.cost};
  const char* names[4] = {"u_l2", "u_semi", "a_l2", "cost"};
  std::string detail;
  for (int k = 0; k < 4; ++k) {
    const double e = rel(got[k], kLocalRow[k]);
    r.passed &= e <= kTableTol;
    detail += std::string(k ? ", " : "") + names[k] + " " + fmt("%.6f", got[k]) + " vs " +
              fmt("%.6f", kLocalRow[k]) + " (" + fmt("%.1f", 100.0 * e) + "%)";
  }
  r.detail = detail + "; tol " + fmt("%.0f", 100.0 * kTableTol) + "%";
  return r;
}

CheckResult CheckSuite::table_nonlocal_row() {
  CheckResult r{0, "nonlocal reference row", true, "", 0.0, 3600.0};
  const StudyConfig c = table_config("study=table\ndofs_ladder=961\ns_ladder=0.3\nr_ladder=0.1\niterations=50\n"
                                     "tau=0.25\nf=const:1\nbounds=0.1:2.0\n",
                                     "criterion6");
  const RungRun run = run_rung(c, c.ladder.front());
  histories_["nonlocal reference row"] = {run.result.cost_history};
  const double ec = rel(run.record.cost, kNonlocalRowCost);
  const double eu = rel(run.record.u_l2, kNonlocalRowUl2);
  r.passed = ec <= kTableTol && eu <= kTableTol;
  r.detail = "cost " + fmt("%.6f", run.record.cost) + " vs " + fmt("%.6f", kNonlocalRowCost) + " (" +
             fmt("%.1f", 100.0 * ec) + "%), u_l2 " + fmt("%.6f", run.record.u_l2) + " vs " +
             fmt("%.6f", kNonlocalRowUl2) + " (" + fmt("%.1f", 100.0 * eu) + "%); tol " +
             fmt("%.0f", 100.0 * kTableTol) + "%, run " + fmt("%.0f", run.record.wall_time) + " s";
  return r;
}

CheckResult CheckSuite::asymptotic_compatibility() {
  CheckResult r{0, "asymptotic compatibility", true, "", 0.0, 600.0};
  const StudyConfig c = table_config("study=ac\ndim=1\ns_ladder=0.5,0.9,0.99\nr_ladder=0.2,0.05,0.01\n"
                                     "dofs_ladder=15,31,63\nreference=1:0:255:20\niterations=20\n",
                                     "criterion7");
  const StudySummary s = run_joint_ac_study(c);
  histories_["asymptotic compatibility"] = s.cost_histories;
  r.passed = s.state_errors_decrease && s.cost_errors_decrease;
  std::string detail = "state L2 errors";
  for (double e : s.state_errors) detail += " " + fmt("%.3e", e);
  detail += ", cost errors";
  for (double e : s.cost_errors) detail += " " + fmt("%.3e", e);
  r.detail = detail + (r.passed ? "; both strictly decrease" : "; not strictly decreasing");
  return r;
}

CheckResult CheckSuite::descent() {
  CheckResult r{0, "descent", true, "", 0.0, 0.0};
  // runs the optimization criteria that have not run yet in this suite
  if (!histories_.count("local reference row")) table_local_row();
  if (!histories_.count("nonlocal reference row")) table_nonlocal_row();
  if (!histories_.count("asymptotic compatibility")) asymptotic_compatibility();
  double worst = 0.0;
  int runs = 0;
  for (const auto& [name, list] : histories_)
    for (const auto& h : list) {
      ++runs;
      for (std::size_t k = 1; k < h.size(); ++k) worst = std::max(worst, h[k] - h[k - 1]);
    }
  r.passed = worst <= kDescentSlack;
  r.detail = std::to_string(runs) + " runs, largest per-step increase " + fmt("%.2e", worst) + " (slack " +
             fmt("%.0e", kDescentSlack) + ")";
  return r;
}

CheckResult CheckSuite::limit_probes() {
  CheckResult r{0, "BBM and Korn probes", true, "", 0.0, 300.0};
  QuadConfig q1 = QuadConfig::defaults(1);
  q1.threads = threads_;
  const Mesh line = build_interval_mesh(0.0, 1.0, 8);
  StateField hat = StateField::zeros(line, 1);
  hat.values[3] = 1.0;
  const std::vector<double> bbm_ladder{0.5, 0.9, 0.99, 0.999};
  const BbmProbe bbm = bbm_limit_probe(line, hat, bbm_ladder, 1.0, q1);
  const bool bbm_ok = bbm.rungs.back().gap <= kBbmGapTol && bbm.last_rung_is_minimum;

  QuadConfig q2 = QuadConfig::defaults(2);
  q2.threads = threads_;
  const std::vector<double> korn_ladder{0.3, 0.6, 0.9};
  const auto korn = korn_probe(build_disk_mesh_rings(1.0, 3), korn_ladder, 0.3, 100, 909, q2);
  double korn_min = 1e300;
  bool random_ok = true;
  for (const auto& k : korn) {
    korn_min = std::min(korn_min, k.min_eigen_ratio);
    random_ok &= k.min_random_ratio > 0.0;
  }
  r.passed = bbm_ok && korn_min > kKornFloor && random_ok;
  std::string detail = "BBM gaps";
  for (const auto& g : bbm.rungs) detail += " " + fmt("%.3f", g.gap);
  detail += " (tol " + fmt("%.2f", kBbmGapTol) + std::string(bbm.last_rung_is_minimum ? ", last is min" : ", last not min") +
            "); Korn min ratio " + fmt("%.4f", korn_min) + " (floor " + fmt("%.2f", kKornFloor) + ")";
  r.detail = detail;
  return r;
}

CheckResult CheckSuite::determinism() {
  CheckResult r{0, "determinism", true, "", 0.0, 1200.0};
  const std::string text = "study=table\ndofs_ladder=3969\niterations=20\ntau=0.25\nf=const:1\nbounds=0.1:2.0\n";
  const std::string dir5 = (std::filesystem::path(work_dir_) / "criterion5").string();
  if (!std::filesystem::exists(std::filesystem::path(dir5) / "records.csv")) run_table_row(table_config(text, "criterion5"));
  run_table_row(table_config(text, "criterion10"));
  const std::string dir10 = (std::filesystem::path(work_dir_) / "criterion10").string();
  auto path = [](const std::string& d, const char* f) { return (std::filesystem::path(d) / f).string(); };
  const bool records = drop_last_column(read_file(path(dir5, "records.csv"))) ==
                       drop_last_column(read_file(path(dir10, "records.csv")));
  const bool log = read_file(path(dir5, "rung0_log.csv")) == read_file(path(dir10, "rung0_log.csv"));
  const bool fields = read_file(path(dir5, "rung0_fields.txt")) == read_file(path(dir10, "rung0_fields.txt"));
  r.passed = records && log && fields;
  r.detail = std::string("records ") + (records ? "identical" : "differ") + " (wall_time excluded), log " +
             (log ? "identical" : "differs") + ", fields " + (fields ? "identical" : "differ");
  return r;
}

std::string format_check_line(const CheckResult& r) {
  char head[128];
  std::snprintf(head, sizeof head, "criterion %2d %s %s: ", r.id, r.passed ? "PASS" : "FAIL", r.name.c_str());
  std::string line = head + r.detail;
  char tail[96];
  if (r.limit_seconds > 0.0)
    std::snprintf(tail, sizeof tail, " [%.1f s, budget %.0f s]", r.seconds, r.limit_seconds);
  else
    std::snprintf(tail, sizeof tail, " [%.1f s]", r.seconds);
  return line + tail;
}

}  // namespace nld
