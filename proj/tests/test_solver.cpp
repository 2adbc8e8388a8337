#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "scsf/error.hpp"
#include "scsf/solver.hpp"
#include "scsf/synth.hpp"

using namespace scsf;

namespace {

PowerMatrix power_from(const Eigen::MatrixXd& data) {
  PowerMatrix p;
  p.data = data;
  p.mask = BoolMatrix::Constant(data.rows(), data.cols(), true);
  p.delta_t = 1.0;
  return p;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

// Hourly two-year site: small enough for unit tests, long enough for the
// yearly constraint.
PowerMatrix hourly_site(double beta, double cloud_fraction, double noise, std::uint64_t seed = 3) {
  Scenario sc;
  sc.seed = seed;
  sc.beta = beta;
  sc.years = 2.0;
  sc.interval = 3600;
  sc.cloud_fraction = cloud_fraction;
  sc.noise = noise;
  return embed_matrix(generate_site(sc).series);
}

// Independent linear-interpolation percentile of a sorted copy.
double quantile_oracle(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Ratio sum(d[i + 365] - d[i]) / sum(d[i]) over the constrained days.
double self_consistent_rate(const FitResult& r) {
  double num = 0.0, den = 0.0;
  for (auto i : r.constrained_days) {
    num += r.linear_energy(i + kYearLag) - r.linear_energy(i);
    den += r.linear_energy(i);
  }
  return num / den;
}

}  // namespace

TEST_CASE("initialize reproduces an exactly low-rank matrix") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd a = random_matrix(rng, 9, 3) * random_matrix(rng, 3, 20);
  const auto f = initialize(power_from(a), 3);
  CHECK(f.left.rows() == 9);
  CHECK(f.right.cols() == 20);
  CHECK((oracle::naive_product(f.left, f.right) - a).norm() <= 1e-9 * a.norm());
}

TEST_CASE("initialize attains the best rank-k error") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd a = random_matrix(rng, 10, 15);
  for (int k : {1, 2, 4}) {
    const auto f = initialize(power_from(a), k);
    const double err = (a - oracle::naive_product(f.left, f.right)).norm();
    CHECK(err == doctest::Approx(oracle::best_rank_error(a, k)).epsilon(1e-8));
  }
}

TEST_CASE("initialize fills masked entries with the row quantile") {
  std::mt19937_64 rng(7);
  PowerMatrix p = power_from(random_matrix(rng, 4, 7));
  p.mask(0, 2) = p.mask(0, 5) = p.mask(3, 0) = false;
  const auto f = initialize(p, 4, 0.85);  // full rank: reconstruction is the filled matrix
  const Eigen::MatrixXd lr = oracle::naive_product(f.left, f.right);
  for (Eigen::Index i = 0; i < 4; ++i) {
    std::vector<double> seen;
    for (Eigen::Index j = 0; j < 7; ++j)
      if (p.mask(i, j)) seen.push_back(p.data(i, j));
    for (Eigen::Index j = 0; j < 7; ++j) {
      const double expected = p.mask(i, j) ? p.data(i, j) : quantile_oracle(seen, 0.85);
      CHECK(lr(i, j) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
  CHECK(f.left.col(0).sum() >= 0.0);
}

TEST_CASE("initialize rejects a rank above the matrix dimensions") {
  std::mt19937_64 rng(8);
  CHECK_THROWS_AS(initialize(power_from(random_matrix(rng, 3, 5)), 4), Error);
  try {
    initialize(power_from(random_matrix(rng, 3, 5)), 4);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankTooLarge);
  }
}

TEST_CASE("tiny left step matches exhaustive enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::bernoulli_distribution keep(0.3);
  HyperParams hp;
  hp.k = 1;
  hp.mu_left = 0.7;
  hp.mu_right = 0.3;
  for (int trial = 0; trial < 6; ++trial) {
    const Eigen::Index m = 4, n = 6;
    PowerMatrix p;
    p.data.resize(m, n);
    for (Eigen::Index t = 0; t < m; ++t)
      for (Eigen::Index j = 0; j < n; ++j) p.data(t, j) = u(rng);
    // one observation per row guaranteed, at most eight in total
    p.mask = BoolMatrix::Constant(m, n, false);
    int count = 0;
    for (Eigen::Index t = 0; t < m; ++t) {
      p.mask(t, t) = true;
      ++count;
    }
    for (Eigen::Index t = 0; t < m && count < 8; ++t)
      for (Eigen::Index j = 0; j < n && count < 8; ++j)
        if (!p.mask(t, j) && keep(rng)) {
          p.mask(t, j) = true;
          ++count;
        }
    p.delta_t = 1.0;

    const PreparedPower pp = prepare_power(p, {});
    Factorization f;
    f.left = Eigen::MatrixXd::Constant(m, 1, 1.0);
    f.right.resize(1, n);
    for (Eigen::Index j = 0; j < n; ++j) f.right(0, j) = u(rng);
    const DegradationState state{0.0, Eigen::VectorXd::Ones(n)};

    // Dense oracle in the left entries: mu_left * |D2 l|^2 plus the pinball
    // loss of every observed entry; the right-smoothness term is a constant.
    oracle::DenseProblem d;
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(m - 2, m);
    for (Eigen::Index s = 0; s + 2 < m; ++s) {
      d2(s, s) = 1.0;
      d2(s, s + 1) = -2.0;
      d2(s, s + 2) = 1.0;
    }
    d.quad = 2.0 * hp.mu_left * d2.transpose() * d2;
    d.linear = Eigen::VectorXd::Zero(m);
    d.rows = Eigen::MatrixXd::Zero(count, m);
    d.target.resize(count);
    d.weight = Eigen::VectorXd::Ones(count);
    d.tau = hp.tau;
    Eigen::Index row = 0;
    for (Eigen::Index t = 0; t < m; ++t)
      for (Eigen::Index j = 0; j < n; ++j)
        if (p.mask(t, j)) {
          d.rows(row, t) = f.right(0, j);
          d.target(row) = pp.power.data(t, j);
          ++row;
        }
    d.eq.resize(0, m);
    d.eq_rhs.resize(0);
    double right_smooth = 0.0;
    for (Eigen::Index j = 0; j + 2 < n; ++j) {
      const double v = f.right(0, j) - 2.0 * f.right(0, j + 1) + f.right(0, j + 2);
      right_smooth += v * v;
    }
    const double expected = oracle::enumerate_minimum(d) + hp.mu_right * right_smooth;

    const auto step = solve_left_step(pp, f, hp, state, 0.0);
    CHECK(step.record.end_objective == doctest::Approx(expected).epsilon(1e-6));
    CHECK(step.record.descended(1e-6));
  }
}

TEST_CASE("right step recovers the rate when the left factor is the truth") {
  // Exact rank-2 data whose right factor scales by (1 + beta) every 365 days.
  const double beta = -0.01;
  const Eigen::Index m = 8, n = 800;
  Eigen::MatrixXd left(m, 2);
  for (Eigen::Index t = 0; t < m; ++t) {
    const double x = (static_cast<double>(t) + 0.5) / static_cast<double>(m);
    left(t, 0) = 1.0 + 3.0 * x * (1.0 - x);
    left(t, 1) = x;
  }
  Eigen::MatrixXd right(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double phase = 2.0 * 3.141592653589793 * static_cast<double>(i % 365) / 365.0;
    const double scale = std::pow(1.0 + beta, std::floor(static_cast<double>(i) / 365.0));
    right(0, i) = scale * (2.0 + 0.5 * std::cos(phase));
    right(1, i) = scale * (0.5 + 0.2 * std::sin(phase));
  }
  PowerMatrix p = power_from(left * right);
  p.delta_t = 0.25;
  const PreparedPower pp = prepare_power(p, {});
  Factorization f;
  f.left = left / pp.scale;
  f.right = right;
  const Eigen::VectorXd d = linear_daily_energy(f, p.delta_t);
  const DegradationState state{beta, d};
  HyperParams hp;
  hp.k = 2;
  const auto step = solve_right_step(pp, f, hp, state, 0.0);
  CHECK(step.beta == doctest::Approx(beta).epsilon(1e-4));
  CHECK(step.record.descended(1e-6));
}

TEST_CASE("right step with degradation disabled keeps beta at zero") {
  const PowerMatrix p = hourly_site(-0.02, 0.0, 0.0);
  const PreparedPower pp = prepare_power(p, {});
  HyperParams hp;
  hp.fit_degradation = false;
  const Factorization f = initialize(pp.power, hp.k, hp.tau);
  const DegradationState state{0.0, linear_daily_energy(f, p.delta_t)};
  const auto step = solve_right_step(pp, f, hp, state, 0.0);
  CHECK(step.beta == 0.0);
  Factorization g = f;
  g.right = step.factor;
  const Eigen::VectorXd d = linear_daily_energy(g, p.delta_t);
  for (auto i : constrained_days(state.d_prev)) {
    CHECK(std::abs(d(i + kYearLag) - d(i)) <= 1e-6 * (1.0 + std::abs(d(i))));
  }
}

TEST_CASE("short series are rejected, not fitted") {
  Scenario sc;
  sc.years = 700.0 / 365.0;
  sc.interval = 3600;
  const PowerMatrix p = embed_matrix(generate_site(sc).series, 1);
  REQUIRE(p.cols() == 700);
  const auto r = fit(p, HyperParams{});
  CHECK_FALSE(r.accepted());
  REQUIRE(r.reject_reason);
  CHECK(*r.reject_reason == RejectReason::TooShort);
}

TEST_CASE("sparse series are rejected") {
  PowerMatrix p = hourly_site(0.0, 0.0, 0.0);
  SUBCASE("nothing observed") {
    p.mask.setConstant(false);
    const auto r = fit(p, HyperParams{});
    REQUIRE(r.reject_reason);
    CHECK(*r.reject_reason == RejectReason::TooSparse);
  }
  SUBCASE("daytime coverage below 30 percent") {
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (j % 4 != 0) p.mask.col(j).setConstant(false);
    const auto r = fit(p, HyperParams{});
    REQUIRE(r.reject_reason);
    CHECK(*r.reject_reason == RejectReason::TooSparse);
  }
}

TEST_CASE("strictly periodic two-year data has zero degradation") {
  const PowerMatrix p = hourly_site(0.0, 0.0, 0.0);
  HyperParams hp;
  const auto r = fit(p, hp);
  REQUIRE(r.accepted());
  CHECK(std::abs(r.beta) <= hp.beta_tol);
}

TEST_CASE("cloudy fit: descent, convergence bookkeeping, self-consistency, scale and determinism") {
  const PowerMatrix p = hourly_site(-0.01, 0.4, 0.02);
  HyperParams hp;
  const auto r = fit(p, hp);
  REQUIRE(r.accepted());
  CHECK(std::abs(r.beta + 0.01) <= 0.003);

  REQUIRE(r.objective_trace.size() == static_cast<std::size_t>(r.iterations));
  REQUIRE(r.steps.size() == 2 * static_cast<std::size_t>(r.iterations));
  for (const auto& s : r.steps) CHECK(s.descended(1e-6));
  REQUIRE(r.iterations >= 2);
  const auto& last = r.objective_trace.back();
  const auto& prev = r.objective_trace[r.objective_trace.size() - 2];
  CHECK(std::abs(last.beta - prev.beta) < hp.beta_tol);
  CHECK(last.beta == r.beta);

  CHECK(std::abs(self_consistent_rate(r) - r.beta) <= 10.0 * hp.beta_tol);

  CHECK(r.clear_sky.rows() == p.rows());
  const auto night = daytime_rows(p);
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    if (!night[static_cast<std::size_t>(t)]) CHECK(r.clear_sky.row(t).cwiseAbs().maxCoeff() <= 1e-4 * r.clear_sky.maxCoeff());
  }
  CHECK(r.clear_sky.minCoeff() >= 0.0);
  CHECK(r.daily_energy.kwh.size() == p.cols());

  PowerMatrix big = p;
  big.data *= 3.7;
  const auto scaled_fit = fit(big, hp);
  REQUIRE(scaled_fit.accepted());
  // Identical after normalization; only solver-tolerance noise remains. Each
  // fit stops within about beta_tol of its limit, so the two may differ by twice that.
  CHECK(std::abs(scaled_fit.beta - r.beta) <= 2.0 * hp.beta_tol);
  CHECK((scaled_fit.clear_sky - 3.7 * r.clear_sky).cwiseAbs().maxCoeff() <= 1e-3 * 3.7 * r.clear_sky.maxCoeff());

  const auto again = fit(p, hp);
  CHECK(again.beta == r.beta);
  CHECK(again.iterations == r.iterations);
}

TEST_CASE("day weights of zero remove days from the loss") {
  const PowerMatrix p = hourly_site(0.0, 0.0, 0.0);
  const PreparedPower pp = prepare_power(p, Eigen::VectorXd::Zero(p.cols()));
  const Factorization f = initialize(pp.power, 6, 0.85);
  HyperParams hp;
  const DegradationState state{0.0, linear_daily_energy(f, p.delta_t)};
  CHECK(right_subproblem(pp, f, hp, state).pinball_rows.rows() == 0);
  CHECK_THROWS_AS(prepare_power(p, Eigen::VectorXd::Ones(3)), Error);
}
