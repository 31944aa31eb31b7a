#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nld/optimizer.hpp"

namespace nld {

/// One table row. s = 1 and R = 0 denote the local problem.
struct ExperimentRecord {
  std::size_t dofs = 0;
  int iterations = 0;
  double s = 1.0;
  double R = 0.0;
  double u_l2 = 0.0;
  double u_semi = 0.0;
  double a_l2 = 0.0;
  double cost = 0.0;
  double wall_time = 0.0;
  double compliance = 0.0;  // not part of the CSV row
};

inline constexpr const char* kRecordCsvHeader = "dofs,iterations,s,R,u_l2,u_semi,a_l2,cost,wall_time";
std::string record_csv_row(const ExperimentRecord& r);

enum class StudyKind : std::uint8_t { TableRow, HRefinement, SUpOne, JointAC };

struct RungSpec {
  double s = 1.0;  // 1 selects the local form
  double R = 0.0;
  std::size_t dofs = 0;
  int iterations = 20;
};

/// Flat key=value configuration. Recognized keys:
///   study=table|h|s|ac  dim=1|2  form=conductivity|peridynamic
///   s_ladder=  r_ladder=  dofs_ladder=  iterations=  (comma-separated ladders; a
///   single value is broadcast)  tau=  f=const:c|ball:c:r:x0:y0  bounds=amin:amax
///   lambda=  q=  solver_tol=  stop_tol=  threads=  seed=  out=
///   reference=s:R:dofs:iterations (JointAC; default local at 4x the last rung's DOFs)
/// In 1D the domain is (0, 1) and dofs + 1 elements are used; in 2D the unit disk.
struct StudyConfig {
  StudyKind kind = StudyKind::TableRow;
  int dimension = 2;
  bool peridynamic = false;
  std::vector<RungSpec> ladder;
  std::optional<RungSpec> reference;
  PgdConfig pgd;
  std::uint64_t seed = 0;
  std::string out;

  static StudyConfig parse(std::istream& in);
  static StudyConfig from_file(const std::string& path);
  static StudyConfig from_string(const std::string& text);
  /// Throws ConfigurationError.
  void validate() const;
};

/// Base mesh of Omega for a rung (no horizon layer).
Mesh study_mesh(int dimension, std::size_t dofs);

struct RungRun {
  ExperimentRecord record;
  Mesh mesh;  // with horizon layer for fractional rungs
  PgdResult result;
};

RungRun run_rung(const StudyConfig& config, const RungSpec& rung);

/// ||u_a - u_b||_{L^2} after P1 interpolation of both states onto the vertices of
/// `target` (states vanish outside their own Omega). Throws ConfigurationError on
/// a dimension or component mismatch.
double interpolated_l2_difference(const Mesh& mesh_a, const StateField& a, const Mesh& mesh_b, const StateField& b,
                                  const Mesh& target);

struct StudySummary {
  std::vector<ExperimentRecord> records;
  std::optional<ExperimentRecord> reference;
  std::vector<double> state_errors;  // L^2 distance per rung (Cauchy differences for HRefinement)
  std::vector<double> cost_errors;
  bool state_errors_decrease = true;
  bool cost_errors_decrease = true;
  std::vector<std::vector<double>> cost_histories;
};

/// Runs the first rung and writes its outputs.
ExperimentRecord run_table_row(const StudyConfig& config);
StudySummary run_joint_ac_study(const StudyConfig& config);
/// Gaps are measured against the local problem on the same mesh.
StudySummary run_s_up_one_study(const StudyConfig& config);
/// Cauchy differences between consecutive rungs, states compared on the finest mesh.
StudySummary run_h_refinement_study(const StudyConfig& config);
StudySummary run_study(const StudyConfig& config);

/// Writes `text` to `path` via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& text);

/// Mesh text with per-vertex state columns and a per-element design column.
std::string fields_to_string(const Mesh& mesh, const StateField& u, const DesignField& a);

}  // namespace nld
