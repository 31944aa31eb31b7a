#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nld/errors.hpp"
#include "nld/experiments.hpp"

using namespace nld;

namespace {

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("nld_test_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(StudyConfigParse, LaddersBroadcast) {
  const StudyConfig c = StudyConfig::from_string(
      "study = ac  # joint ladder\ndim=1\ns_ladder=0.5,0.9\nr_ladder=0.2,0.05\ndofs_ladder=15,31\niterations=3\n"
      "f=ball:3:0.25:0.5:0\nbounds=0.2:1.5\nreference=1:0:63:5\n");
  EXPECT_EQ(c.kind, StudyKind::JointAC);
  ASSERT_EQ(c.ladder.size(), 2u);
  EXPECT_EQ(c.ladder[1].dofs, 31u);
  EXPECT_DOUBLE_EQ(c.ladder[1].R, 0.05);
  EXPECT_EQ(c.ladder[0].iterations, 3);
  EXPECT_DOUBLE_EQ(c.pgd.a_min, 0.2);
  EXPECT_EQ(c.pgd.source.kind, Source::Kind::Ball);
  ASSERT_TRUE(c.reference.has_value());
  EXPECT_EQ(c.reference->dofs, 63u);
}

TEST(StudyConfigParse, Errors) {
  EXPECT_THROW(StudyConfig::from_string("study=table\n"), ConfigurationError);
  EXPECT_THROW(StudyConfig::from_string("dofs_ladder=9\nbogus=1\n"), ConfigurationError);
  EXPECT_THROW(StudyConfig::from_string("dofs_ladder=9\ndofs_ladder=9\n"), ConfigurationError);
  EXPECT_THROW(StudyConfig::from_string("dofs_ladder=9\nstudy=x\n"), ConfigurationError);
  EXPECT_THROW(StudyConfig::from_string("dofs_ladder=9,25\ns_ladder=0.5,0.6,0.7\n"), ConfigurationError);
  EXPECT_THROW(StudyConfig::from_string("dofs_ladder=9\ntau=abc\n"), ConfigurationError);
  EXPECT_THROW(StudyConfig::from_string("dofs_ladder=9\nf=sin:1\n"), ConfigurationError);
  EXPECT_THROW(StudyConfig::from_string("dofs_ladder=9\nline without equals\n"), ConfigurationError);
  EXPECT_THROW(StudyConfig::from_string("study=ac\ndim=1\ns_ladder=0.9,0.5\nr_ladder=0.1\ndofs_ladder=15,31\n"),
               ConfigurationError);
}

TEST(StudyMesh, DofCounts) {
  EXPECT_EQ(study_mesh(1, 31).num_dofs(), 31u);
  EXPECT_EQ(study_mesh(2, 49).num_dofs(), 49u);
}

TEST(Interpolation, IdentityAndNesting) {
  const Mesh coarse = study_mesh(1, 7);
  const Mesh fine = study_mesh(1, 15);
  StateField u = StateField::zeros(coarse, 1);
  for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = std::sin(0.3 * static_cast<double>(i));
  EXPECT_NEAR(interpolated_l2_difference(coarse, u, coarse, u, fine), 0.0, 1e-15);
  // a P1 function on the coarse mesh is reproduced exactly on the nested mesh
  StateField v = StateField::zeros(fine, 1);
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    const double x = fine.vertex(i + 1)[0];
    for (std::size_t e = 0; e < coarse.num_elements(); ++e) {
      const double x0 = coarse.vertex(coarse.element(e)[0])[0], x1 = coarse.vertex(coarse.element(e)[1])[0];
      if (x >= std::min(x0, x1) && x <= std::max(x0, x1)) {
        const double t = (x - x0) / (x1 - x0);
        v.values[i] = (1 - t) * u.vertex_value(coarse, coarse.element(e)[0]) + t * u.vertex_value(coarse, coarse.element(e)[1]);
        break;
      }
    }
  }
  EXPECT_NEAR(interpolated_l2_difference(coarse, u, fine, v, fine), 0.0, 1e-14);
  EXPECT_THROW(interpolated_l2_difference(coarse, u, study_mesh(2, 9), StateField::zeros(study_mesh(2, 9), 1), fine),
               ConfigurationError);
}

TEST(RunRung, RecordSelfConsistency) {
  const StudyConfig c = StudyConfig::from_string("dim=1\ns_ladder=0.6\nr_ladder=0.2\ndofs_ladder=31\niterations=5\n");
  const RungRun run = run_rung(c, c.ladder[0]);
  const ExperimentRecord& r = run.record;
  EXPECT_NEAR(r.cost, r.compliance + 0.5 * r.a_l2 * r.a_l2, 1e-10 * r.cost);
  EXPECT_EQ(run.result.cost_history.size(), 6u);
  EXPECT_DOUBLE_EQ(run.result.cost_history.back(), r.cost);
  EXPECT_GT(r.u_l2, 0.0);
  EXPECT_GT(r.u_semi, 0.0);
}

TEST(Studies, SingleRungSelfComparisonIsZero) {
  StudyConfig c = StudyConfig::from_string(
      "study=ac\ndim=1\ns_ladder=1\nr_ladder=0\ndofs_ladder=31\niterations=4\nreference=1:0:31:4\n");
  c.out = temp_dir("self");
  const StudySummary s = run_joint_ac_study(c);
  ASSERT_EQ(s.state_errors.size(), 1u);
  EXPECT_LT(s.state_errors[0], 1e-9);
  EXPECT_LT(s.cost_errors[0], 1e-9);
}

TEST(Studies, TrivialSLadderHasZeroGap) {
  StudyConfig c = StudyConfig::from_string("study=s\ndim=1\ns_ladder=1\ndofs_ladder=15\niterations=3\n");
  c.out = temp_dir("sone");
  const StudySummary s = run_s_up_one_study(c);
  ASSERT_EQ(s.cost_errors.size(), 1u);
  EXPECT_LT(s.cost_errors[0], 1e-12);
}

TEST(Studies, HRefinementCauchyDifferencesShrink) {
  StudyConfig c = StudyConfig::from_string("study=h\ndim=1\ndofs_ladder=31,63,127\niterations=5\n");
  c.out = temp_dir("href");
  const StudySummary s = run_h_refinement_study(c);
  ASSERT_EQ(s.state_errors.size(), 2u);
  EXPECT_GT(std::log2(s.state_errors[0] / s.state_errors[1]), 1.0);
  EXPECT_TRUE(s.cost_errors_decrease);
}

TEST(Studies, OutputsAreDeterministic) {
  StudyConfig c = StudyConfig::from_string("dim=1\ns_ladder=0.5\nr_ladder=0.2\ndofs_ladder=15\niterations=4\n");
  c.out = temp_dir("det_a");
  run_table_row(c);
  const std::string first = c.out;
  c.out = temp_dir("det_b");
  run_table_row(c);
  for (const char* f : {"rung0_log.csv", "rung0_fields.txt"})
    EXPECT_EQ(slurp(std::filesystem::path(first) / f), slurp(std::filesystem::path(c.out) / f)) << f;
  const std::string rec = slurp(std::filesystem::path(first) / "records.csv");
  EXPECT_EQ(rec.substr(0, rec.find('\n')), kRecordCsvHeader);
}
