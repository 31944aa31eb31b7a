#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "nld/checks.hpp"
#include "nld/errors.hpp"
#include "nld/experiments.hpp"
#include "nld/solver.hpp"

using namespace nld;

namespace {

struct Common {
  int threads = 0;
};

struct MeshArgs {
  int dim = 2;
  std::size_t dofs = 961;
  double horizon = 0.0;
  std::string out;
};

struct SolveArgs {
  std::string mesh;
  int dim = 2;
  std::size_t dofs = 961;
  std::string form = "conductivity";
  double s = 1.0;
  double R = 0.0;
  std::string f = "const:1";
  double design = 1.0;
  std::string bounds = "0.1:2.0";
  double tol = 1e-10;
  std::string out;
};

struct OptimizeArgs {
  int dim = 2;
  std::size_t dofs = 961;
  std::string form = "conductivity";
  double s = 1.0;
  double R = 0.0;
  int iterations = 20;
  double tau = 0.25;
  std::string f = "const:1";
  std::string bounds = "0.1:2.0";
  double stop_tol = 0.0;
  std::string out = "optimize_out";
};

std::pair<double, double> parse_bounds(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigurationError("bounds must look like amin:amax");
  return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
}

FormKind make_kind(const std::string& form, double s, double R) {
  const bool local = s >= 1.0;
  if (form == "conductivity") return local ? FormKind::local_conductivity() : FormKind::fractional_conductivity(s, R);
  if (form == "peridynamic") return local ? FormKind::local_elasticity() : FormKind::fractional_peridynamic(s, R);
  throw ConfigurationError("form must be conductivity or peridynamic");
}

int run_mesh(const MeshArgs& a) {
  const Mesh m = extend_with_horizon(study_mesh(a.dim, a.dofs), a.horizon);
  if (a.out.empty())
    std::cout << mesh_to_string(m);
  else
    write_mesh_file(a.out, m);
  std::fprintf(stderr, "%zu vertices, %zu elements, %zu dofs, h = %.6g\n", m.num_vertices(), m.num_elements(),
               m.num_dofs(), m.h());
  return 0;
}

int run_solve(const SolveArgs& a, const Common& c) {
  const FormKind kind = make_kind(a.form, a.s, a.R);
  Mesh base = a.mesh.empty() ? study_mesh(a.dim, a.dofs) : read_mesh_file(a.mesh);
  const Mesh mesh = kind.fractional() && base.horizon_width() == 0.0 ? extend_with_horizon(base, a.R) : std::move(base);
  const auto [amin, amax] = parse_bounds(a.bounds);
  const DesignField design = DesignField::constant(mesh, a.design, amin, amax);
  QuadConfig q = QuadConfig::defaults(mesh.dimension());
  q.threads = c.threads;
  const FormOperator op(mesh, kind, q);
  const auto F = assemble_load(mesh, Source::parse(a.f), op.components());
  SolveStats stats;
  const StateField u = design_to_state(op, design, F, a.tol, &stats);
  double compliance = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) compliance += F[i] * u.values[i];
  std::printf("unknowns %zu\ncompliance %.10e\nu_l2 %.10e\nu_semi %.10e\n", op.num_unknowns(), compliance,
              l2_norm(mesh, u), std::sqrt(op.unit_energy(u)));
  if (!a.out.empty()) write_file_atomic(a.out, fields_to_string(mesh, u, design));
  return 0;
}

int run_optimize(const OptimizeArgs& a, const Common& c) {
  char text[1024];
  std::snprintf(text, sizeof text,
                "study=table\ndim=%d\nform=%s\ns_ladder=%.17g\nr_ladder=%.17g\ndofs_ladder=%zu\niterations=%d\n"
                "tau=%.17g\nf=%s\nbounds=%s\nstop_tol=%.17g\nthreads=%d\n",
                a.dim, a.form.c_str(), a.s, a.R, a.dofs, a.iterations, a.tau, a.f.c_str(), a.bounds.c_str(),
                a.stop_tol, c.threads);
  StudyConfig config = StudyConfig::from_string(text);
  config.out = a.out;
  const ExperimentRecord r = run_table_row(config);
  std::cout << kRecordCsvHeader << "\n" << record_csv_row(r) << "\n";
  return 0;
}

int run_study_cmd(const std::string& path, const std::string& out, const Common& c) {
  StudyConfig config = StudyConfig::from_file(path);
  if (!out.empty()) config.out = out;
  if (c.threads > 0) config.pgd.quad.threads = c.threads;
  const StudySummary s = run_study(config);
  std::cout << kRecordCsvHeader << "\n";
  for (const auto& r : s.records) std::cout << record_csv_row(r) << "\n";
  if (!s.state_errors.empty()) {
    std::cout << "state_errors";
    for (double e : s.state_errors) std::printf(" %.6e", e);
    std::cout << "\ncost_errors";
    for (double e : s.cost_errors) std::printf(" %.6e", e);
    std::cout << "\nstate errors " << (s.state_errors_decrease ? "decrease" : "do not decrease") << ", cost errors "
              << (s.cost_errors_decrease ? "decrease" : "do not decrease") << "\n";
  }
  return 0;
}

int run_check(std::vector<int> ids, const std::string& work, const Common& c) {
  if (ids.empty())
    for (int k = 1; k <= CheckSuite::kCount; ++k) ids.push_back(k);
  std::filesystem::create_directories(work);
  CheckSuite suite(work, c.threads);
  const auto results = suite.run(ids, &std::cout);
  int failed = 0;
  for (const auto& r : results) failed += !r.passed;
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametrized nonlocal optimal design"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  MeshArgs ma;
  auto* mesh = app.add_subcommand("mesh", "build a mesh and save it");
  mesh->add_option("--dim", ma.dim)->check(CLI::IsMember({1, 2}));
  mesh->add_option("--dofs", ma.dofs, "interior DOFs ((2m-1)^2 in 2D)");
  mesh->add_option("--horizon", ma.horizon, "width of the horizon layer");
  mesh->add_option("-o,--out", ma.out, "output file (stdout if omitted)");

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "one state solve for a constant design");
  solve->add_option("--mesh", sa.mesh, "mesh file")->check(CLI::ExistingFile);
  solve->add_option("--dim", sa.dim)->check(CLI::IsMember({1, 2}));
  solve->add_option("--dofs", sa.dofs);
  solve->add_option("--form", sa.form)->check(CLI::IsMember({"conductivity", "peridynamic"}));
  solve->add_option("--s", sa.s, "fractional order, 1 for local");
  solve->add_option("--R", sa.R, "horizon");
  solve->add_option("--f", sa.f, "const:c or ball:c:r:x0:y0");
  solve->add_option("--design", sa.design, "constant design value");
  solve->add_option("--bounds", sa.bounds, "amin:amax");
  solve->add_option("--tol", sa.tol);
  solve->add_option("-o,--out", sa.out, "field file");

  OptimizeArgs oa;
  auto* optimize = app.add_subcommand("optimize", "one projected gradient run");
  optimize->add_option("--dim", oa.dim)->check(CLI::IsMember({1, 2}));
  optimize->add_option("--dofs", oa.dofs);
  optimize->add_option("--form", oa.form)->check(CLI::IsMember({"conductivity", "peridynamic"}));
  optimize->add_option("--s", oa.s);
  optimize->add_option("--R", oa.R);
  optimize->add_option("--iterations", oa.iterations);
  optimize->add_option("--tau", oa.tau);
  optimize->add_option("--f", oa.f);
  optimize->add_option("--bounds", oa.bounds);
  optimize->add_option("--stop-tol", oa.stop_tol);
  optimize->add_option("-o,--out", oa.out, "output directory");

  std::string study_config, study_out;
  auto* study = app.add_subcommand("study", "run a study from a config file");
  study->add_option("--config", study_config)->required()->check(CLI::ExistingFile);
  study->add_option("--out", study_out, "overrides out= from the config");

  std::vector<int> criteria;
  std::string work_dir = "check_work";
  auto* check = app.add_subcommand("check", "acceptance criteria");
  check->add_option("--criteria", criteria, "criterion ids (default: all)")->check(CLI::Range(1, CheckSuite::kCount));
  check->add_option("--work-dir", work_dir);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*mesh) return run_mesh(ma);
    if (*solve) return run_solve(sa, common);
    if (*optimize) return run_optimize(oa, common);
    if (*study) return run_study_cmd(study_config, study_out, common);
    if (*check) return run_check(criteria, work_dir, common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
