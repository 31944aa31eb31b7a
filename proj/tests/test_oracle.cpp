#include <gtest/gtest.h>

#include <Eigen/Cholesky>

#include <random>

#include "nld/errors.hpp"
#include "nld/oracle.hpp"

using namespace nld;

TEST(DenseOracle, TwoElementBaseline) {
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 2), 1.0);
  const Eigen::MatrixXd K = dense_fractional_assembly_1d(m, DesignField::constant(m, 1.0, 1.0, 1.0), 0.5, 1.0);
  ASSERT_EQ(K.rows(), 1);
  EXPECT_NEAR(K(0, 0), 2.32304153891744, 1e-9 * 2.32304153891744);
}

TEST(DenseOracle, LinearSymmetricDefinite) {
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 6), 0.3);
  const Eigen::MatrixXd K1 = dense_fractional_assembly_1d(m, DesignField::constant(m, 1.0, 0.1, 3.0), 0.4, 0.3);
  DesignField three = DesignField::constant(m, 3.0, 0.1, 3.0);
  three.exterior_value = 3.0;
  const Eigen::MatrixXd K3 = dense_fractional_assembly_1d(m, three, 0.4, 0.3);
  const Eigen::MatrixXd Kunit = dense_fractional_assembly_1d(m, DesignField::constant(m, 1.0, 1.0, 1.0), 0.4, 0.3);
  EXPECT_LE((K3 - 3.0 * Kunit).cwiseAbs().maxCoeff(), 1e-12 * K3.cwiseAbs().maxCoeff());
  EXPECT_EQ((K1 - K1.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(K1).info(), Eigen::Success);
}

TEST(DenseOracle, ReflectionSymmetry) {
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 6), 0.2);
  DesignField a = DesignField::constant(m, 1.0, 0.1, 2.0);
  a.values = {0.3, 1.7, 1.1, 1.1, 1.7, 0.3};
  const Eigen::MatrixXd K = dense_fractional_assembly_1d(m, a, 0.6, 0.2);
  const Eigen::MatrixXd flipped = K.colwise().reverse().rowwise().reverse();
  EXPECT_LE((K - flipped).cwiseAbs().maxCoeff(), 1e-9 * K.cwiseAbs().maxCoeff());
}

TEST(DenseOracle, AgreesWithFastAssembly) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(0.1, 2.0);
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 8), 0.25);
  DesignField a = DesignField::constant(m, 1.0, 0.1, 2.0);
  for (double& v : a.values) v = U(rng);
  for (double s : {0.25, 0.5}) {
    const Eigen::MatrixXd O = dense_fractional_assembly_1d(m, a, s, 0.25);
    const Eigen::MatrixXd F =
        assemble_stiffness(m, a, FormKind::fractional_conductivity(s, 0.25), QuadConfig::defaults(1)).to_dense();
    EXPECT_LE(((F - O).array() / O.array()).abs().maxCoeff(), 1e-6) << "s = " << s;
  }
}

TEST(DenseOracle, RejectsBadInput) {
  const Mesh bare = build_interval_mesh(0.0, 1.0, 4);
  EXPECT_THROW(dense_fractional_assembly_1d(bare, DesignField::constant(bare, 1.0, 1.0, 1.0), 0.5, 0.2),
               ConfigurationError);
  const Mesh m = extend_with_horizon(bare, 0.2);
  EXPECT_THROW(dense_fractional_assembly_1d(m, DesignField::constant(m, 1.0, 1.0, 1.0), 1.0, 0.2), ParameterError);
}

TEST(BbmProbe, ZeroAndScaling) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 8);
  const std::vector<double> ladder{0.5, 0.9};
  const auto zero = bbm_limit_probe(m, StateField::zeros(m, 1), ladder, 1.0, QuadConfig::defaults(1));
  for (const auto& r : zero.rungs) EXPECT_EQ(r.energy, 0.0);
  StateField v = StateField::zeros(m, 1);
  v.values[3] = 1.0;
  const auto p1 = bbm_limit_probe(m, v, ladder, 1.0, QuadConfig::defaults(1));
  v.values[3] = 2.0;
  const auto p2 = bbm_limit_probe(m, v, ladder, 1.0, QuadConfig::defaults(1));
  for (std::size_t k = 0; k < ladder.size(); ++k)
    EXPECT_NEAR(p2.rungs[k].energy, 4.0 * p1.rungs[k].energy, 1e-12 * p2.rungs[k].energy);
}

TEST(BbmProbe, HatApproachesDirichletEnergy) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 8);
  StateField v = StateField::zeros(m, 1);
  v.values[3] = 1.0;
  const std::vector<double> ladder{0.5, 0.9, 0.99, 0.999};
  const auto p = bbm_limit_probe(m, v, ladder, 1.0, QuadConfig::defaults(1));
  EXPECT_NEAR(p.local_energy, 16.0, 1e-12);
  EXPECT_TRUE(p.last_rung_is_minimum);
  EXPECT_LE(p.rungs.back().gap, 0.1);
}

TEST(KornProbe, RatioStaysPositive) {
  const Mesh m = build_disk_mesh_rings(1.0, 2);
  const std::vector<double> ladder{0.3, 0.9};
  for (const auto& r : korn_probe(m, ladder, 0.3, 20, 5, QuadConfig::defaults(2))) {
    EXPECT_GT(r.min_eigen_ratio, 0.01) << "s = " << r.s;
    EXPECT_GE(r.min_random_ratio, r.min_eigen_ratio * (1.0 - 1e-12));
  }
}
