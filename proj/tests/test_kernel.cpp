#include "test_support.hpp"

using namespace oparc;
using namespace oparc::testing;

namespace {

Real level_after(const Vcm& v, const CVector& a0, const CVector& ac, Real beta) {
  RVector b(1);
  b(0) = beta;
  const Vcm next = v.updated(BlockAssignment{{0.0}, ac, b});
  const CVector w = optimal_weight(next, a0);
  return std::norm(w.dot(ac)) / std::norm(w.dot(a0));
}

Real gain_along(const SinglePointTerms& s, Real beta) { return s.g0 - beta * std::norm(s.t) / (1.0 + beta * s.q); }

}  // namespace

TEST(SolveSingleBeta, CurrentLevelGivesZero) {
  const auto g = ula(8);
  const CVector a0 = steering_vector(g, 0.0);
  const CVector ac = steering_vector(g, 20.0);
  const Real current = response_level(a0, 20.0, 0.0, g);
  EXPECT_EQ(solve_single_beta(Vcm::identity(8), a0, ac, current), 0.0);
  const auto r = control_single(Vcm::identity(8), g, 0.0, {20.0, current});
  EXPECT_EQ(r.beta, 0.0);
  EXPECT_EQ(r.gamma, Complex(0.0, 0.0));
  EXPECT_EQ(r.vcm.matrix(), CMatrix::Identity(8, 8));
  EXPECT_TRUE(r.vcm.ledger().empty());
}

TEST(SolveSingleBeta, MatchesDenseGridOracle) {
  const auto g = ula(8);
  const CVector a0 = steering_vector(g, 0.0);
  const CVector ac = steering_vector(g, 20.0);
  const Real rho = from_db(-30.0);
  const Real beta = solve_single_beta(Vcm::identity(8), a0, ac, rho);
  const auto ref = oracle::kernel_grid_oracle(CMatrix::Identity(8, 8), a0, ac, rho);
  ASSERT_TRUE(ref.has_value());
  EXPECT_NEAR(beta, ref->beta, 1e-6 * std::max(1.0, std::abs(ref->beta)));
  EXPECT_NEAR(to_db(level_after(Vcm::identity(8), a0, ac, beta)), -30.0, 1e-8);
}

TEST(SolveSingleBeta, RandomFeasibleTasksBeatOracle) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 25; ++k) {
    const auto g = oracle::random_array(rng, 4, 12);
    const Real theta0 = std::round(uniform(rng, -40.0, 40.0));
    const Real thc = spread_angles(rng, 1, -88.0, 88.0, theta0, 6.0)[0];
    Vcm v = Vcm::identity(g.size());
    if (k % 2 == 1) {
      RVector b(1);
      b(0) = uniform(rng, 0.1, 20.0);
      v = v.updated(BlockAssignment::make(g, {spread_angles(rng, 1, -88.0, 88.0, theta0, 6.0)[0]}, b));
    }
    const CVector a0 = steering_vector(g, theta0);
    const CVector ac = steering_vector(g, thc);
    const auto terms = single_point_terms(v, a0, ac);
    const Real sup = terms.q * terms.q / std::norm(terms.t);
    const Real rho = std::min(sup * 0.9, from_db(uniform(rng, -50.0, 0.0)));
    const Real beta = solve_single_beta(v, a0, ac, rho);
    EXPECT_NEAR(level_after(v, a0, ac, beta) / rho, 1.0, 1e-8);
    EXPECT_GT(1.0 + beta * terms.q, 0.0);
    const auto ref = oracle::kernel_grid_oracle(v.matrix(), a0, ac, rho, 200000);
    ASSERT_TRUE(ref.has_value());
    EXPECT_GE(gain_along(terms, beta), ref->gain * (1.0 - 1e-6));
  }
}

TEST(SolveSingleBeta, LevelAboveSupremumIsInfeasible) {
  const auto g = ula(8);
  const CVector a0 = steering_vector(g, 0.0);
  const CVector ac = steering_vector(g, 37.0);
  const auto terms = single_point_terms(Vcm::identity(8), a0, ac);
  const Real sup = terms.q * terms.q / std::norm(terms.t);
  try {
    solve_single_beta(Vcm::identity(8), a0, ac, sup * 1.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleLevel);
  }
  EXPECT_NO_THROW(solve_single_beta(Vcm::identity(8), a0, ac, sup * 0.99));
}

TEST(SolveSingleBeta, RaisingLevelUsesNegativeInr) {
  const auto g = ula(8);
  const CVector a0 = steering_vector(g, 0.0);
  const CVector ac = steering_vector(g, 37.0);
  const Real current = response_level(a0, 37.0, 0.0, g);
  const Real beta = solve_single_beta(Vcm::identity(8), a0, ac, current * 4.0);
  EXPECT_LT(beta, 0.0);
  EXPECT_NEAR(level_after(Vcm::identity(8), a0, ac, beta) / (current * 4.0), 1.0, 1e-9);
}

TEST(SolveSingleBeta, DegenerateGeometry) {
  const auto g = ula(8);
  const CVector a0 = steering_vector(g, 0.0);
  const Real orth = rad2deg(std::asin(0.25));
  try {
    solve_single_beta(Vcm::identity(8), a0, steering_vector(g, orth), 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateGeometry);
  }
  // grating lobe: same steering vector as the axis
  const auto wide = ula(8, 1.0);
  try {
    solve_single_beta(Vcm::identity(8), steering_vector(wide, 0.0), steering_vector(wide, 90.0), 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateGeometry);
  }
}

TEST(SolveSingleBeta, NullRequestGivesInfiniteInr) {
  const auto g = ula(8);
  const auto r = control_single(Vcm::identity(8), g, 0.0, {35.0, 0.0});
  EXPECT_TRUE(std::isinf(r.beta));
  EXPECT_LT(response_level(r.weight, 35.0, 0.0, g), 1e-26);
  const CVector w0 = steering_vector(g, 0.0);
  const CVector ac = steering_vector(g, 35.0);
  EXPECT_LT((r.weight - (w0 + r.gamma * ac)).norm(), 1e-12 * w0.norm());
}

TEST(SolveSingleBeta, RejectsInvalidTasks) {
  const auto g = ula(8);
  EXPECT_THROW(control_single(Vcm::identity(8), g, 10.0, {10.0, 0.1}), Error);
  EXPECT_THROW(control_single(Vcm::identity(8), g, 10.0, {20.0, -0.1}), Error);
  EXPECT_THROW(control_single(Vcm::identity(8), g, 10.0, {95.0, 0.1}), Error);
}

TEST(SolveSingleBeta, GainStrictlyDecreasingAlongAdmissibleBranch) {
  std::mt19937_64 rng(22);
  for (int k = 0; k < 100; ++k) {
    const auto g = oracle::random_array(rng, 4, 12);
    const CVector a0 = steering_vector(g, uniform(rng, -30.0, 30.0));
    const CVector ac = steering_vector(g, uniform(rng, 40.0, 85.0));
    const auto terms = single_point_terms(Vcm::identity(g.size()), a0, ac);
    const Real beta = -1.0 / terms.q + std::exp(uniform(rng, -5.0, 5.0)) / terms.q;
    const Real h = 1e-6 * std::max(1.0, std::abs(beta)) * std::min(1.0, (beta + 1.0 / terms.q) * terms.q);
    EXPECT_LT(gain_along(terms, beta + h), gain_along(terms, beta - h));
  }
}

TEST(ControlSingle, GammaAndWeightConsistent) {
  std::mt19937_64 rng(23);
  const auto g = ula(8);
  for (int k = 0; k < 20; ++k) {
    const Real thc = spread_angles(rng, 1, -85.0, 85.0, 0.0, 10.0)[0];
    const auto r = control_single(Vcm::identity(8), g, 0.0, ControlTask::from_db(thc, uniform(rng, -50.0, -20.0)));
    const CVector a0 = steering_vector(g, 0.0);
    const CVector ac = steering_vector(g, thc);
    const CVector w_expected = a0 + r.gamma * ac;
    EXPECT_LT((r.weight - w_expected).norm() / w_expected.norm(), 1e-10);
    const Real rho = from_db(to_db(response_level(r.weight, thc, 0.0, g)));
    EXPECT_NEAR(std::norm(r.weight.dot(ac)) - rho * std::norm(r.weight.dot(a0)), 0.0, 1e-10 * std::norm(r.weight.dot(a0)));
  }
}

TEST(ControlSingle, ConstraintExactInDb) {
  const auto g = ula(10);
  const auto r = control_single(Vcm::identity(10), g, 15.0, ControlTask::from_db(-42.0, -37.5));
  EXPECT_NEAR(to_db(response_level(r.weight, -42.0, 15.0, g)), -37.5, 1e-6);
}

TEST(ControlSingle, OrthogonalSteeringDecouples) {
  // Steering vectors at th1 and th2 are orthogonal on an 8-element
  // half-wavelength ULA (sine difference 2/8), so the second control leaves
  // w^H a(th1) untouched. The level at th1 then moves only through the
  // beam-axis response: L1' = L1 |w^H a0|^2 / |w'^H a0|^2.
  const auto g = ula(8);
  const Real th1 = rad2deg(std::asin(0.3));
  const Real th2 = rad2deg(std::asin(0.55));
  const CVector a0 = steering_vector(g, 0.0);
  const CVector a1 = steering_vector(g, th1);
  ASSERT_LT(std::abs(a1.dot(steering_vector(g, th2))), 1e-12);
  const auto r1 = control_single(Vcm::identity(8), g, 0.0, ControlTask::from_db(th1, -40.0));
  const auto r2 = control_single(r1.vcm, g, 0.0, ControlTask::from_db(th2, -35.0));
  EXPECT_NEAR(std::abs(r2.weight.dot(a1) - r1.weight.dot(a1)), 0.0, 1e-12 * r1.weight.norm());
  const Real axis_ratio = std::norm(r1.weight.dot(a0)) / std::norm(r2.weight.dot(a0));
  EXPECT_NEAR(response_level(r2.weight, th1, 0.0, g) / (from_db(-40.0) * axis_ratio), 1.0, 1e-8);
  EXPECT_NEAR(to_db(response_level(r2.weight, th2, 0.0, g)), -35.0, 1e-6);
}
