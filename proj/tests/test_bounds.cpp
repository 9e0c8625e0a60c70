#include "checks.hpp"

#include <gtest/gtest.h>

using namespace prb;

TEST(BorellTis, Arithmetic) {
  EXPECT_NEAR(borell_tis_tail(1.0, 0.0, 0.5), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(borell_tis_tail(1.0, 0.0, 0.5), 0.6065, 1e-4);
  EXPECT_DOUBLE_EQ(borell_tis_tail(0.3, 0.3, 1.0), 1.0);
  EXPECT_LT(borell_tis_tail(1.0, 0.0, 1e-3), 1e-100);
}

TEST(BorellTis, Preconditions) {
  EXPECT_THROW(borell_tis_tail(0.1, 0.2, 1.0), std::invalid_argument);
  EXPECT_THROW(borell_tis_tail(0.3, 0.2, 0.0), std::invalid_argument);
  BoundInputs in;
  in.epsilon = 2.0;
  in.sigma_max = 1.0;
  EXPECT_DOUBLE_EQ(borell_tis_tail(in), std::exp(-0.5));
}

TEST(BorellTis, DominatesMonteCarlo) {
  const auto checks = check::borell_tis_checks(200, 2000, 17);
  int ok = 0;
  for (const auto& c : checks) ok += c.dominates();
  EXPECT_GE(ok, 190);
}

TEST(ExpectedSupBound, Arithmetic) {
  EXPECT_NEAR(expected_sup_bound(1.0, 1, 0.0, 1.0), 12.0 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(expected_sup_bound(2.0, 1, 0.0, 1.0), 2.0 * expected_sup_bound(1.0, 1, 0.0, 1.0), 1e-12);
  EXPECT_NEAR(expected_sup_bound(0.1, 2, 1.0, 1.0), 1.2 * std::sqrt(4.0 + 2.0 * std::log(401.0)), 1e-12);
  EXPECT_THROW(expected_sup_bound(0.0, 1, 1.0, 1.0), std::invalid_argument);
}

TEST(ExpectedSupBound, DominatesMonteCarlo) {
  const auto checks = check::expected_sup_checks();
  int ok = 0;
  for (const auto& c : checks) ok += c.dominates();
  EXPECT_GE(ok, static_cast<int>(std::ceil(0.95 * checks.size())));
}

TEST(VarianceContraction, FormulaValue) {
  const double eps = 0.01, rho = std::pow(eps, eps), eta = std::max(1.0, rho / (4 * eps));
  const double expect = ((4 * rho - rho * rho) * eta + 0.01) / ((1 + 2 * rho) * eta + 0.01);
  EXPECT_NEAR(variance_contraction_bound(1.0, 1.0, 0.01, eps, 1), expect, 1e-14);
  EXPECT_NEAR(variance_contraction_bound(1.0, 1.0, 0.01, eps, 1), 0.999, 1e-3);
}

TEST(VarianceContraction, SingleObservationLimit) {
  for (double g : {1e-3, 0.1, 1.0}) {
    EXPECT_NEAR(variance_contraction_ratio(1.5, 1.0, g, 0.0, 1.0), g * 1.5 / (1.5 + g), 1e-14);
  }
}

TEST(VarianceContraction, WithinPriorVariance) {
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double k = 0.1 + 3 * u(rng), L = 0.1 + 3 * u(rng), g = u(rng);
    const double eps = u(rng) * std::min(1.0, k / L);
    const double v = variance_contraction_bound(k, L, g, eps, 1 + i % 4);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, k);
  }
}

TEST(VarianceContraction, RejectsLargeRadius) {
  try {
    variance_contraction_bound(1.0, 2.0, 0.1, 0.6, 1);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("cover radius too large"), std::string::npos);
  }
  EXPECT_THROW(variance_contraction_bound(1.0, 0.0, 0.1, 0.1, 1), std::invalid_argument);
}

using check::CoverCase;
using check::cover_cases;

TEST(VarianceContraction, DominatesCoverDatasets) {
  int ok = 0, total = 0;
  for (const CoverCase& c : cover_cases()) {
    if (!c.applies) continue;
    ok += c.dominated;
    ++total;
  }
  ASSERT_GE(total, 20);
  EXPECT_GE(ok, static_cast<int>(std::ceil(0.95 * total)));
}

TEST(VarianceContraction, StatedRangeAloneIsNotEnough) {
  // Inside eps <= min(1, k/L_k) but with eps^eps > k/L_k the bound can fail.
  int failures = 0;
  for (const CoverCase& c : cover_cases()) failures += !c.applies && !c.dominated;
  EXPECT_GT(failures, 0);
}

TEST(Lipschitz, MaternSlope) {
  const KernelSpec k(1.3, Vec::Constant(1, 0.25));
  double slope = 0.0;
  for (int i = 1; i < 100000; ++i) {
    const double a = (i - 1) * 1e-5, b = i * 1e-5;
    slope = std::max(slope, std::abs(k(Vec::Zero(1), Vec::Constant(1, b)) - k(Vec::Zero(1), Vec::Constant(1, a))) / 1e-5);
  }
  EXPECT_NEAR(matern52_lipschitz(k), slope, 1e-4);
}

TEST(FillDistance, CenterPoint) {
  EXPECT_NEAR(fill_distance(Mat::Constant(1, 2, 0.5), 11), 0.5, 1e-12);
  EXPECT_THROW(fill_distance(Mat(0, 2), 11), std::invalid_argument);
  EXPECT_THROW(fill_distance(Mat::Constant(1, 4, 0.5), 3), std::invalid_argument);
}

TEST(FillDistance, ShrinksWithMorePoints) {
  Rng rng = make_rng(4);
  Mat pts(40, 2);
  for (int i = 0; i < 40; ++i) pts.row(i) = uniform_point(rng, 2).transpose();
  EXPECT_LE(fill_distance(pts, 41), fill_distance(pts.topRows(10), 41) + 1e-12);
}

TEST(PseudoMetric, ZeroOnDiagonalAndMonotone) {
  const PosteriorGP gp = oracle::fixture_1d(4, 1e-2, 8);
  const Vec x = Vec::Constant(1, 0.3), y = Vec::Constant(1, 0.6);
  EXPECT_EQ(pseudo_metric(gp, x, x), 0.0);
  Dataset more = gp.data();
  more.add(Vec::Constant(1, 0.45), 0.0);
  EXPECT_LE(pseudo_metric(PosteriorGP(gp.hyper(), more), x, y), pseudo_metric(gp, x, y) + 1e-8);
}
