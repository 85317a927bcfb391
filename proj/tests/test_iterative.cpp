#include "test_support.hpp"

using namespace oparc;
using namespace oparc::testing;

namespace {

std::vector<ControlTask> benchmark_tasks() {
  return {ControlTask::from_db(-40.0, -45.0), ControlTask::from_db(25.0, -35.0), ControlTask::from_db(50.0, -30.0)};
}

}  // namespace

TEST(SolveIterative, AlreadySatisfiedTasksTakeOneSweep) {
  const auto g = ula(8);
  const CVector a0 = steering_vector(g, 0.0);
  const std::vector<ControlTask> tasks{{20.0, response_level(a0, 20.0, 0.0, g)}, {-50.0, response_level(a0, -50.0, 0.0, g)}};
  const auto r = solve_iterative(Vcm::identity(8), g, 0.0, tasks);
  EXPECT_EQ(r.sweeps_used, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.sigma_star, RVector::Zero(2));
  EXPECT_EQ(r.beta_max_trace.back(), 0.0);
}

TEST(SolveIterative, SixteenElementThreeTaskBenchmark) {
  const auto g = ula(16);
  const auto tasks = benchmark_tasks();
  const auto r = solve_iterative(Vcm::identity(16), g, 0.0, tasks);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.sweeps_used, 30);
  for (Real b : r.beta_max_trace) EXPECT_TRUE(std::isfinite(b));
  EXPECT_LE(r.beta_max_trace.back(), 1e-10);
  for (const auto& t : tasks) EXPECT_NEAR(to_db(response_level(r.weight, t.theta_deg, 0.0, g)), to_db(t.rho), 1e-6);
  // frozen from a converged run
  EXPECT_NEAR(r.sigma_star(0), 0.2419032029848268, 1e-9);
  EXPECT_NEAR(r.sigma_star(1), 0.2672406260875286, 1e-9);
  EXPECT_NEAR(r.sigma_star(2), 0.0003606554098416194, 1e-12);
}

TEST(SolveIterative, SigmaIsSumOfSweepInrs) {
  const auto g = ula(16);
  const auto r = solve_iterative(Vcm::identity(16), g, 0.0, benchmark_tasks());
  for (Eigen::Index m = 0; m < 3; ++m) {
    Real sum = 0.0;
    for (const auto& s : r.sweeps) sum += s.betas[static_cast<std::size_t>(m)];
    EXPECT_EQ(sum, r.sigma_star(m));
  }
  ASSERT_EQ(r.sweeps.size(), r.beta_max_trace.size());
}

TEST(SolveIterative, ReplayAndClosedFormAgree) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 10; ++k) {
    const auto g = oracle::random_array(rng, 8, 14);
    const auto angles = spread_angles(rng, 3, -85.0, 85.0, 0.0, 8.0);
    std::vector<ControlTask> tasks;
    for (Real th : angles) tasks.push_back(ControlTask::from_db(th, uniform(rng, -45.0, -25.0)));
    const auto r = solve_iterative(Vcm::identity(g.size()), g, 0.0, tasks);
    ASSERT_TRUE(r.converged);
    const CVector a0 = steering_vector(g, 0.0);
    const CMatrix a = steering_matrix(g, angles);
    const Vcm replay = Vcm::identity(g.size()).updated(BlockAssignment{angles, a, r.sigma_star});
    EXPECT_LT(rel_diff(replay.matrix(), r.vcm_out.matrix()), 1e-9);
    EXPECT_LT((closed_form_weight(Vcm::identity(g.size()), a, r.sigma_star, a0) - r.weight).norm() / r.weight.norm(), 1e-9);
    EXPECT_LT((optimal_weight(r.vcm_out, a0) - r.weight).norm(), 1e-15 * r.weight.norm() + 1e-300);
    for (const auto& t : tasks) EXPECT_NEAR(to_db(response_level(r.weight, t.theta_deg, 0.0, g)), to_db(t.rho), 1e-6);
  }
}

TEST(SolveIterative, NullTasksProduceExactNulls) {
  const auto g = ula(10);
  const std::vector<ControlTask> tasks{{-30.0, 0.0}, {20.0, from_db(-30.0)}, {45.0, 0.0}};
  const auto r = solve_iterative(Vcm::identity(10), g, 0.0, tasks);
  ASSERT_TRUE(r.converged);
  EXPECT_TRUE(std::isinf(r.sigma_star(0)));
  EXPECT_TRUE(std::isinf(r.sigma_star(2)));
  EXPECT_LT(response_level(r.weight, -30.0, 0.0, g), 1e-24);
  EXPECT_LT(response_level(r.weight, 45.0, 0.0, g), 1e-24);
  EXPECT_NEAR(to_db(response_level(r.weight, 20.0, 0.0, g)), -30.0, 1e-6);
}

TEST(SolveIterative, ValidatesTasks) {
  const auto g = ula(4);
  try {
    solve_iterative(Vcm::identity(4), g, 0.0, {{10.0, 0.01}, {20.0, 0.01}, {30.0, 0.01}, {40.0, 0.01}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegreesOfFreedom);
  }
  EXPECT_THROW(solve_iterative(Vcm::identity(4), g, 0.0, {}), Error);
  EXPECT_THROW(solve_iterative(Vcm::identity(4), g, 0.0, {{10.0, 0.01}, {10.0, 0.02}}), Error);
  EXPECT_THROW(solve_iterative(Vcm::identity(4), g, 0.0, {{0.0, 0.01}}), Error);
  EXPECT_THROW(solve_iterative(Vcm::identity(4), g, 0.0, {{10.0, 0.01}}, {0.0, 10}), Error);
}

TEST(SolveIterative, InfeasibleTaskAbortsWithTrace) {
  const auto g = ula(8);
  try {
    solve_iterative(Vcm::identity(8), g, 0.0, {ControlTask::from_db(-40.0, -30.0), ControlTask::from_db(3.0, 20.0)});
    FAIL();
  } catch (const IterativeAborted& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleLevel);
    ASSERT_EQ(e.trace().size(), 1u);
    EXPECT_EQ(e.trace()[0].betas.size(), 1u);
  }
}

TEST(SolveIterative, SweepCapGivesWarningNotError) {
  const auto g = ula(16);
  const auto r = solve_iterative(Vcm::identity(16), g, 0.0, benchmark_tasks(), {1e-10, 2});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.sweeps_used, 2);
  EXPECT_FALSE(r.warning.empty());
  EXPECT_GT(r.beta_max_trace.back(), 1e-10);
}

TEST(SolveStep, DispatchesBothSolvers) {
  const auto g = ula(16);
  SolverConfig cfg;
  const auto it = solve_step(Vcm::identity(16), g, 0.0, benchmark_tasks(), cfg);
  cfg.kind = SolverKind::kCadmm;
  const auto ad = solve_step(Vcm::identity(16), g, 0.0, benchmark_tasks(), cfg);
  EXPECT_TRUE(it.converged);
  EXPECT_TRUE(ad.converged);
  EXPECT_EQ(it.sweeps.size(), static_cast<std::size_t>(it.iterations));
  EXPECT_EQ(ad.trace.size(), static_cast<std::size_t>(ad.iterations));
  EXPECT_LT((it.sigma - ad.sigma).norm(), 1e-6 * it.sigma.norm());
  EXPECT_STREQ(to_string(SolverKind::kCadmm), "cadmm");
}
