#include "oparc/adaptive.hpp"
#include "oparc/scenario.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace oparc {
namespace {

using testing::rel_diff;
using testing::ula;

Scenario two_sources(std::uint64_t seed, int snapshots) {
  Scenario sc;
  sc.sigma_n2 = 1.0;
  sc.add_interference_inr(-35.0, 100.0);
  sc.add_interference_inr(20.0, 30.0);
  sc.seed = seed;
  sc.snapshot_count = snapshots;
  return sc;
}

TEST(CounterRng, SeedZeroVectors) {
  const CounterRng rng(0);
  EXPECT_EQ(rng.bits(0), 0xe220a8397b1dcdafull);
  EXPECT_EQ(rng.bits(1), 0x6e789e6aa1b965f4ull);
  EXPECT_EQ(rng.bits(2), 0x06c45d188009454full);
}

TEST(CounterRng, Seed42Vectors) {
  const CounterRng rng(42);
  EXPECT_EQ(rng.bits(0), 0xbdd732262feb6e95ull);
  EXPECT_EQ(rng.bits(1), 0x28efe333b266f103ull);
  EXPECT_EQ(rng.bits(2), 0x47526757130f9f52ull);
}

TEST(CounterRng, MatchesSequentialSplitMix) {
  std::uint64_t state = 12345;
  const CounterRng rng(12345);
  for (std::uint64_t k = 0; k < 1000; ++k) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    ASSERT_EQ(rng.bits(k), z) << k;
  }
}

TEST(CounterRng, UniformsInsideOpenInterval) {
  const CounterRng rng(7);
  Real sum = 0.0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const Real u = rng.uniform(k);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000.0, 0.5, 0.005);
}

TEST(CounterRng, ComplexGaussianUnitPower) {
  const CounterRng rng(9);
  Real power = 0.0;
  Complex mean(0.0, 0.0);
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const Complex z = rng.complex_gaussian(static_cast<std::uint64_t>(k));
    power += std::norm(z);
    mean += z;
  }
  EXPECT_NEAR(power / n, 1.0, 0.01);
  EXPECT_LT(std::abs(mean / static_cast<Real>(n)), 0.01);
}

TEST(TrueCovariance, NoInterferenceIsScaledIdentity) {
  Scenario sc;
  sc.sigma_n2 = 2.5;
  EXPECT_LT(rel_diff(true_covariance(sc, ula(6)), 2.5 * CMatrix::Identity(6, 6)), 1e-16);
}

TEST(TrueCovariance, OneInterferenceShiftsTopEigenvalue) {
  const auto g = ula(8);
  Scenario sc;
  sc.sigma_n2 = 0.5;
  sc.add_interference_inr(27.0, 40.0);
  const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(true_covariance(sc, g)).eigenvalues();
  EXPECT_NEAR(ev(7), 0.5 * (1.0 + 40.0 * 8.0), 1e-10);
  EXPECT_NEAR(ev(0), 0.5, 1e-12);
  EXPECT_NEAR(ev(6), 0.5, 1e-12);
}

TEST(TrueCovariance, TwoInterferencesMatchDirectSum) {
  const auto g = ula(8);
  const Scenario sc = two_sources(1, 1);
  CMatrix r(8, 8);
  for (int m = 0; m < 8; ++m) {
    for (int n = 0; n < 8; ++n) {
      Complex v = (m == n) ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
      for (const auto& in : sc.interferences) {
        const Real phase = kPi * std::sin(deg2rad(in.theta_deg));
        v += in.power * std::polar(1.0, -phase * (m - n));
      }
      r(m, n) = v;
    }
  }
  EXPECT_LT(rel_diff(true_covariance(sc, g), r), 1e-12);
}

TEST(GenerateSnapshots, NoiselessSingleSourceIsRankOne) {
  const auto g = ula(8);
  Scenario sc;
  sc.sigma_n2 = 0.0;
  sc.interferences.push_back({33.0, 1.0});
  sc.snapshot_count = 50;
  const CMatrix x = generate_snapshots(sc, g);
  const CVector a = steering_vector(g, 33.0);
  for (int t = 0; t < x.cols(); ++t) {
    const Complex c = a.dot(x.col(t)) / a.squaredNorm();
    EXPECT_LT((x.col(t) - c * a).norm(), 1e-12 * x.col(t).norm());
  }
  const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(sample_covariance(x)).eigenvalues();
  EXPECT_LT(ev(6), 1e-12 * ev(7));
}

TEST(GenerateSnapshots, Deterministic) {
  const auto g = ula(6);
  const CMatrix a = generate_snapshots(two_sources(99, 300), g);
  const CMatrix b = generate_snapshots(two_sources(99, 300), g);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, generate_snapshots(two_sources(100, 300), g));
}

TEST(GenerateSnapshots, PrefixStable) {
  const auto g = ula(6);
  const CMatrix a = generate_snapshots(two_sources(5, 100), g);
  const CMatrix b = generate_snapshots(two_sources(5, 40), g);
  EXPECT_EQ(a.leftCols(40), b);
}

TEST(GenerateSnapshots, ConvergesAtLargeT) {
  const auto g = ula(8);
  const Scenario sc = two_sources(2024, 100000);
  const CMatrix r = true_covariance(sc, g);
  EXPECT_LT(rel_diff(sample_covariance(generate_snapshots(sc, g)), r), 0.03);
}

TEST(GenerateSnapshots, ErrorFallsLikeInverseRootT) {
  const auto g = ula(8);
  std::vector<Real> lx, ly;
  for (int t : {100, 1000, 10000, 100000}) {
    Real err = 0.0;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const Scenario sc = two_sources(seed, t);
      err += rel_diff(sample_covariance(generate_snapshots(sc, g)), true_covariance(sc, g));
    }
    lx.push_back(std::log10(static_cast<Real>(t)));
    ly.push_back(std::log10(err / 4.0));
  }
  const Real mx = (lx[0] + lx[1] + lx[2] + lx[3]) / 4.0, my = (ly[0] + ly[1] + ly[2] + ly[3]) / 4.0;
  Real sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < 4; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  EXPECT_NEAR(sxy / sxx, -0.5, 0.15);
}

TEST(GenerateSnapshots, RejectsEmpty) {
  Scenario sc;
  sc.snapshot_count = 0;
  EXPECT_THROW(generate_snapshots(sc, ula(4)), Error);
}

std::vector<PatternSample> random_pattern(std::mt19937_64& rng, int count) {
  std::vector<PatternSample> s;
  for (int i = 0; i < count; ++i) {
    s.push_back({-90.0 + 0.1 * i, testing::uniform(rng, -60.0, 0.0)});
  }
  return s;
}

TEST(ControlMetrics, IdenticalPatterns) {
  std::mt19937_64 rng(1);
  const auto p = random_pattern(rng, 1801);
  const auto m = control_metrics(p, p, {10.0, -20.0});
  EXPECT_EQ(m.j, 0.0);
  EXPECT_EQ(m.d_db, (std::vector<Real>{0.0, 0.0}));
}

TEST(ControlMetrics, ShiftAtOneAngle) {
  std::mt19937_64 rng(2);
  const auto p = random_pattern(rng, 1801);
  auto c = p;
  c[1000].level_db += 3.0;
  const auto m = control_metrics(p, c, {p[1000].theta_deg, p[500].theta_deg});
  EXPECT_NEAR(m.d_db[0], 3.0, 1e-12);
  EXPECT_EQ(m.d_db[1], 0.0);
}

TEST(ControlMetrics, JMatchesSeparateAccumulation) {
  std::mt19937_64 rng(3);
  const auto p = random_pattern(rng, 1801);
  const auto c = random_pattern(rng, 1801);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double d = std::pow(10.0L, c[i].level_db / 10.0L) - std::pow(10.0L, p[i].level_db / 10.0L);
    acc += d * d;
  }
  const Real j = static_cast<Real>(std::sqrt(acc / 1801.0L));
  EXPECT_NEAR(control_metrics(p, c, {}).j, j, 1e-12 * j);
}

TEST(ControlMetrics, JInvariantUnderRelabeling) {
  std::mt19937_64 rng(4);
  auto p = random_pattern(rng, 1801);
  auto c = random_pattern(rng, 1801);
  const Real j = control_metrics(p, c, {}).j;
  std::vector<std::size_t> order(p.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<PatternSample> ps, cs;
  for (std::size_t i : order) {
    ps.push_back(p[i]);
    cs.push_back(c[i]);
  }
  EXPECT_NEAR(control_metrics(ps, cs, {}).j, j, 1e-12 * j);
}

TEST(ControlMetrics, GridMismatch) {
  std::mt19937_64 rng(5);
  const auto p = random_pattern(rng, 100);
  auto c = p;
  c[3].theta_deg += 0.05;
  EXPECT_THROW(control_metrics(p, c, {}), Error);
  EXPECT_THROW(control_metrics(p, random_pattern(rng, 99), {}), Error);
  EXPECT_THROW(control_metrics(p, p, {0.05}), Error);
}

}  // namespace
}  // namespace oparc
