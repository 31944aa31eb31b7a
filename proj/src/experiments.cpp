#include "nld/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "nld/errors.hpp"

namespace nld {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw ConfigurationError("bad value '" + text + "' for key '" + key + "'");
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<T>(key, item));
  if (out.empty()) throw ConfigurationError("empty list for key '" + key + "'");
  return out;
}

double element_integral_of_square(const Mesh& mesh, std::size_t e, const std::vector<double>& w) {
  double sum = 0.0, sq = 0.0;
  for (int v : mesh.element(e)) {
    sum += w[static_cast<std::size_t>(v)];
    sq += w[static_cast<std::size_t>(v)] * w[static_cast<std::size_t>(v)];
  }
  const double denom = mesh.dimension() == 1 ? 6.0 : 12.0;
  return mesh.measure(e) / denom * (sq + sum * sum);
}

std::array<double, 3> barycentric_of(const Mesh& mesh, std::size_t e, const Point& p) {
  const auto el = mesh.element(e);
  const Point& a = mesh.vertex(static_cast<std::size_t>(el[0]));
  const Point& b = mesh.vertex(static_cast<std::size_t>(el[1]));
  if (mesh.dimension() == 1) {
    const double t = (p[0] - a[0]) / (b[0] - a[0]);
    return {1.0 - t, t, 0.0};
  }
  const Point& c = mesh.vertex(static_cast<std::size_t>(el[2]));
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
  const double l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
  const double l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
  return {1.0 - l1 - l2, l1, l2};
}

/// P1 interpolant of u at the vertices of target, component c.
std::vector<double> transfer(const Mesh& mesh, const StateField& u, const Mesh& target, int c) {
  std::vector<double> out(target.num_vertices(), 0.0);
  for (std::size_t v = 0; v < target.num_vertices(); ++v) {
    const auto e = locate_point(mesh, target.vertex(v), true);
    if (e) out[v] = u.evaluate(mesh, *e, barycentric_of(mesh, *e, target.vertex(v)), c);
  }
  return out;
}

bool strictly_decreasing(const std::vector<double>& x) {
  for (std::size_t k = 1; k < x.size(); ++k)
    if (!(x[k] < x[k - 1])) return false;
  return true;
}

std::string rung_prefix(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_rung_outputs(const StudyConfig& config, const std::string& name, const RungRun& run) {
  if (config.out.empty()) return;
  std::ostringstream log;
  write_iteration_log(log, run.result.log);
  write_file_atomic(rung_prefix(config.out, name + "_log.csv"), log.str());
  write_file_atomic(rung_prefix(config.out, name + "_fields.txt"),
                    fields_to_string(run.mesh, run.result.state, run.result.design));
}

void write_records(const StudyConfig& config, const std::string& file, const std::vector<ExperimentRecord>& records) {
  if (config.out.empty()) return;
  std::string text = std::string(kRecordCsvHeader) + "\n";
  for (const auto& r : records) text += record_csv_row(r) + "\n";
  write_file_atomic(rung_prefix(config.out, file), text);
}

void write_summary(const StudyConfig& config, const StudySummary& summary, std::size_t offset) {
  if (config.out.empty()) return;
  std::string text = "rung,s,R,dofs,state_error,cost_error\n";
  char buf[256];
  for (std::size_t k = 0; k < summary.state_errors.size(); ++k) {
    const auto& r = summary.records[k + offset];
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%zu,%.10e,%.10e\n", k + offset, r.s, r.R, r.dofs,
                  summary.state_errors[k], summary.cost_errors[k]);
    text += buf;
  }
  write_file_atomic(rung_prefix(config.out, "summary.csv"), text);
}

void prepare_output(const StudyConfig& config) {
  if (!config.out.empty()) std::filesystem::create_directories(config.out);
}

}  // namespace

std::string record_csv_row(const ExperimentRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%d,%.10g,%.10g,%.10e,%.10e,%.10e,%.10e,%.3f", r.dofs, r.iterations, r.s, r.R,
                r.u_l2, r.u_semi, r.a_l2, r.cost, r.wall_time);
  return buf;
}

StudyConfig StudyConfig::parse(std::istream& in) {
  StudyConfig c;
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigurationError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (kv.count(key)) throw ConfigurationError("duplicate key '" + key + "'");
    kv[key] = trim(line.substr(eq + 1));
  }

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (auto v = take("study")) {
    static const std::map<std::string, StudyKind> kinds{{"table", StudyKind::TableRow},
                                                         {"h", StudyKind::HRefinement},
                                                         {"s", StudyKind::SUpOne},
                                                         {"ac", StudyKind::JointAC}};
    const auto it = kinds.find(*v);
    if (it == kinds.end()) throw ConfigurationError("unknown study '" + *v + "' (use table, h, s or ac)");
    c.kind = it->second;
  }
  if (auto v = take("dim")) c.dimension = parse_number<int>("dim", *v);
  if (auto v = take("form")) {
    if (*v != "conductivity" && *v != "peridynamic")
      throw ConfigurationError("unknown form '" + *v + "' (use conductivity or peridynamic)");
    c.peridynamic = *v == "peridynamic";
  }
  const auto s_ladder = parse_list<double>("s_ladder", take("s_ladder").value_or("1"));
  const auto r_ladder = parse_list<double>("r_ladder", take("r_ladder").value_or("0"));
  const auto its = parse_list<int>("iterations", take("iterations").value_or("20"));
  const auto dofs_text = take("dofs_ladder");
  if (!dofs_text) throw ConfigurationError("missing key 'dofs_ladder'");
  const auto dofs = parse_list<std::size_t>("dofs_ladder", *dofs_text);
  const std::size_t n = std::max({s_ladder.size(), r_ladder.size(), dofs.size(), its.size()});
  auto pick = [n](const auto& list, const char* key) {
    if (list.size() != 1 && list.size() != n)
      throw ConfigurationError(std::string("ladder '") + key + "' has the wrong length");
    return [&list](std::size_t k) { return list.size() == 1 ? list[0] : list[k]; };
  };
  const auto s_at = pick(s_ladder, "s_ladder");
  const auto r_at = pick(r_ladder, "r_ladder");
  const auto d_at = pick(dofs, "dofs_ladder");
  const auto i_at = pick(its, "iterations");
  for (std::size_t k = 0; k < n; ++k) c.ladder.push_back({s_at(k), r_at(k), d_at(k), i_at(k)});

  if (auto v = take("reference")) {
    const auto parts = split(*v, ':');
    if (parts.size() != 4) throw ConfigurationError("reference needs s:R:dofs:iterations");
    c.reference = RungSpec{parse_number<double>("reference", parts[0]), parse_number<double>("reference", parts[1]),
                           parse_number<std::size_t>("reference", parts[2]), parse_number<int>("reference", parts[3])};
  }
  if (auto v = take("tau")) c.pgd.tau = parse_number<double>("tau", *v);
  if (auto v = take("f")) {
    try {
      c.pgd.source = Source::parse(*v);
    } catch (const ParameterError& e) {
      throw ConfigurationError(e.what());
    }
  }
  if (auto v = take("bounds")) {
    const auto parts = split(*v, ':');
    if (parts.size() != 2) throw ConfigurationError("bounds needs amin:amax");
    c.pgd.a_min = parse_number<double>("bounds", parts[0]);
    c.pgd.a_max = parse_number<double>("bounds", parts[1]);
  }
  if (auto v = take("lambda")) c.pgd.lambda = parse_number<double>("lambda", *v);
  if (auto v = take("q")) c.pgd.q = parse_number<double>("q", *v);
  if (auto v = take("solver_tol")) c.pgd.solver_tol = parse_number<double>("solver_tol", *v);
  if (auto v = take("stop_tol")) c.pgd.stop_tol = parse_number<double>("stop_tol", *v);
  c.pgd.quad = QuadConfig::defaults(c.dimension);
  if (auto v = take("threads")) c.pgd.quad.threads = parse_number<int>("threads", *v);
  if (auto v = take("seed")) c.seed = parse_number<std::uint64_t>("seed", *v);
  if (auto v = take("out")) c.out = *v;
  if (!kv.empty()) throw ConfigurationError("unknown key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

StudyConfig StudyConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config " + path);
  return parse(in);
}

StudyConfig StudyConfig::from_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

void StudyConfig::validate() const {
  if (dimension != 1 && dimension != 2) throw ConfigurationError("dim must be 1 or 2");
  if (peridynamic && dimension != 2) throw ConfigurationError("the peridynamic form needs dim=2");
  if (ladder.empty()) throw ConfigurationError("the ladder is empty");
  for (const auto& r : ladder) {
    if (!(r.s > 0.0 && r.s <= 1.0)) throw ConfigurationError("ladder s values must lie in (0, 1]");
    if (r.s < 1.0 && !(r.R > 0.0)) throw ConfigurationError("fractional rungs need R > 0");
    if (r.iterations < 0) throw ConfigurationError("iteration counts must be nonnegative");
  }
  if (kind == StudyKind::JointAC)
    for (std::size_t k = 1; k < ladder.size(); ++k)
      if (!(ladder[k].s > ladder[k - 1].s) || !(ladder[k].dofs > ladder[k - 1].dofs))
        throw ConfigurationError("a joint ladder needs increasing s and increasing resolution");
  if (kind == StudyKind::SUpOne)
    for (const auto& r : ladder)
      if (r.dofs != ladder[0].dofs) throw ConfigurationError("an s ladder uses one resolution");
  if (kind == StudyKind::HRefinement)
    for (const auto& r : ladder)
      if (r.s != ladder[0].s || r.R != ladder[0].R) throw ConfigurationError("an h ladder uses one (s, R)");
  try {
    pgd.validate();
  } catch (const ParameterError& e) {
    throw ConfigurationError(e.what());
  }
}

Mesh study_mesh(int dimension, std::size_t dofs) {
  if (dimension == 1) return build_interval_mesh(0.0, 1.0, static_cast<int>(dofs) + 1);
  return build_disk_mesh_for_dofs(1.0, dofs);
}

RungRun run_rung(const StudyConfig& config, const RungSpec& rung) {
  const auto t0 = std::chrono::steady_clock::now();
  const Mesh base = study_mesh(config.dimension, rung.dofs);
  const bool local = rung.s >= 1.0;
  FormKind kind;
  if (config.peridynamic)
    kind = local ? FormKind::local_elasticity() : FormKind::fractional_peridynamic(rung.s, rung.R);
  else
    kind = local ? FormKind::local_conductivity() : FormKind::fractional_conductivity(rung.s, rung.R);
  Mesh mesh = local ? base : extend_with_horizon(base, rung.R);
  PgdConfig pgd = config.pgd;
  pgd.kind = kind;
  pgd.max_iterations = rung.iterations;
  PgdResult result = run_pgd(mesh, pgd);

  ExperimentRecord r;
  r.dofs = base.num_dofs();
  r.iterations = result.iterations_run;
  r.s = local ? 1.0 : rung.s;
  r.R = local ? 0.0 : rung.R;
  r.u_l2 = l2_norm(mesh, result.state);
  r.u_semi = seminorm(mesh, result.state, kind, pgd.quad);
  r.a_l2 = design_l2(mesh, result.design);
  r.cost = result.cost_history.back();
  r.compliance = result.compliance;
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {r, std::move(mesh), std::move(result)};
}

double interpolated_l2_difference(const Mesh& mesh_a, const StateField& a, const Mesh& mesh_b, const StateField& b,
                                  const Mesh& target) {
  if (mesh_a.dimension() != target.dimension() || mesh_b.dimension() != target.dimension())
    throw ConfigurationError("cannot compare states across dimensions");
  if (a.components != b.components) throw ConfigurationError("cannot compare states with different components");
  double total = 0.0;
  for (int c = 0; c < a.components; ++c) {
    const auto ua = transfer(mesh_a, a, target, c);
    const auto ub = transfer(mesh_b, b, target, c);
    std::vector<double> diff(ua.size());
    for (std::size_t v = 0; v < diff.size(); ++v) diff[v] = ua[v] - ub[v];
    for (std::size_t e = 0; e < target.num_interior_elements(); ++e)
      total += element_integral_of_square(target, e, diff);
  }
  return std::sqrt(total);
}

ExperimentRecord run_table_row(const StudyConfig& config) {
  config.validate();
  prepare_output(config);
  const RungRun run = run_rung(config, config.ladder.front());
  write_rung_outputs(config, "rung0", run);
  write_records(config, "records.csv", {run.record});
  return run.record;
}

StudySummary run_joint_ac_study(const StudyConfig& config) {
  config.validate();
  prepare_output(config);
  StudySummary out;
  RungSpec ref_spec = config.reference.value_or(RungSpec{1.0, 0.0, 0, config.ladder.back().iterations});
  if (!config.reference) {
    // finest rung refined twice: 4x the DOFs in 1D, the (2m-1)^2 family in 2D
    const std::size_t last = config.ladder.back().dofs;
    if (config.dimension == 1) {
      ref_spec.dofs = 4 * (last + 1) - 1;
    } else {
      const auto m = static_cast<std::size_t>(std::lround((std::sqrt(static_cast<double>(last)) + 1.0) / 2.0));
      ref_spec.dofs = (8 * m - 1) * (8 * m - 1);
    }
  }
  const RungRun ref = run_rung(config, ref_spec);
  write_rung_outputs(config, "reference", ref);
  write_records(config, "reference.csv", {ref.record});
  out.reference = ref.record;
  const Mesh ref_base = study_mesh(config.dimension, ref_spec.dofs);
  for (std::size_t k = 0; k < config.ladder.size(); ++k) {
    const RungRun run = run_rung(config, config.ladder[k]);
    write_rung_outputs(config, "rung" + std::to_string(k), run);
    out.records.push_back(run.record);
    out.cost_histories.push_back(run.result.cost_history);
    out.state_errors.push_back(
        interpolated_l2_difference(run.mesh, run.result.state, ref.mesh, ref.result.state, ref_base));
    out.cost_errors.push_back(std::abs(run.record.cost - ref.record.cost));
  }
  out.state_errors_decrease = strictly_decreasing(out.state_errors);
  out.cost_errors_decrease = strictly_decreasing(out.cost_errors);
  write_records(config, "records.csv", out.records);
  write_summary(config, out, 0);
  return out;
}

StudySummary run_s_up_one_study(const StudyConfig& config) {
  config.validate();
  prepare_output(config);
  StudySummary out;
  const RungSpec local_spec{1.0, 0.0, config.ladder.front().dofs, config.ladder.back().iterations};
  const RungRun local = run_rung(config, local_spec);
  write_rung_outputs(config, "reference", local);
  write_records(config, "reference.csv", {local.record});
  out.reference = local.record;
  for (std::size_t k = 0; k < config.ladder.size(); ++k) {
    const RungRun run = run_rung(config, config.ladder[k]);
    write_rung_outputs(config, "rung" + std::to_string(k), run);
    out.records.push_back(run.record);
    out.cost_histories.push_back(run.result.cost_history);
    out.state_errors.push_back(
        interpolated_l2_difference(run.mesh, run.result.state, local.mesh, local.result.state, local.mesh));
    out.cost_errors.push_back(std::abs(run.record.cost - local.record.cost));
  }
  out.state_errors_decrease = strictly_decreasing(out.state_errors);
  out.cost_errors_decrease = strictly_decreasing(out.cost_errors);
  write_records(config, "records.csv", out.records);
  write_summary(config, out, 0);
  return out;
}

StudySummary run_h_refinement_study(const StudyConfig& config) {
  config.validate();
  prepare_output(config);
  StudySummary out;
  std::vector<RungRun> runs;
  std::size_t finest = 0;
  for (std::size_t k = 0; k < config.ladder.size(); ++k) {
    runs.push_back(run_rung(config, config.ladder[k]));
    write_rung_outputs(config, "rung" + std::to_string(k), runs.back());
    out.records.push_back(runs.back().record);
    out.cost_histories.push_back(runs.back().result.cost_history);
    if (config.ladder[k].dofs > config.ladder[finest].dofs) finest = k;
  }
  const Mesh target = study_mesh(config.dimension, config.ladder[finest].dofs);
  for (std::size_t k = 1; k < runs.size(); ++k) {
    out.state_errors.push_back(interpolated_l2_difference(runs[k].mesh, runs[k].result.state, runs[k - 1].mesh,
                                                          runs[k - 1].result.state, target));
    out.cost_errors.push_back(std::abs(runs[k].record.cost - runs[k - 1].record.cost));
  }
  out.state_errors_decrease = strictly_decreasing(out.state_errors);
  out.cost_errors_decrease = strictly_decreasing(out.cost_errors);
  write_records(config, "records.csv", out.records);
  write_summary(config, out, 1);
  return out;
}

StudySummary run_study(const StudyConfig& config) {
  switch (config.kind) {
    case StudyKind::TableRow: {
      StudySummary out;
      out.records.push_back(run_table_row(config));
      return out;
    }
    case StudyKind::HRefinement: return run_h_refinement_study(config);
    case StudyKind::SUpOne: return run_s_up_one_study(config);
    case StudyKind::JointAC: return run_joint_ac_study(config);
  }
  throw ConfigurationError("unknown study kind");
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigurationError("cannot write " + tmp);
    out << text;
    if (!out) throw ConfigurationError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string fields_to_string(const Mesh& mesh, const StateField& u, const DesignField& a) {
  std::vector<std::vector<double>> vertex_cols(static_cast<std::size_t>(u.components),
                                               std::vector<double>(mesh.num_vertices()));
  for (int c = 0; c < u.components; ++c)
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
      vertex_cols[static_cast<std::size_t>(c)][v] = u.vertex_value(mesh, v, c);
  std::vector<std::vector<double>> element_cols(1, std::vector<double>(mesh.num_elements()));
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) element_cols[0][e] = a.on_element(e);
  std::ostringstream out;
  write_mesh(out, mesh, vertex_cols, element_cols);
  return out.str();
}

}  // namespace nld
