#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>

#include "scsf/error.hpp"
#include "scsf/fleet.hpp"
#include "scsf/synth.hpp"

using namespace scsf;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

// Independent quartiles: for sorted x of size n, Q1 is the median of
// x[0 .. floor(n/2)) and Q3 the median of x[ceil(n/2) .. n).
double oracle_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::vector<bool> oracle_mask(const std::vector<double>& values) {
  std::vector<double> s = values;
  std::sort(s.begin(), s.end());
  const auto n = s.size();
  const double q1 = oracle_median({s.begin(), s.begin() + static_cast<long>(n / 2)});
  const double q3 = oracle_median({s.begin() + static_cast<long>((n + 1) / 2), s.end()});
  std::vector<bool> mask;
  for (double x : values) mask.push_back(x < q1 - 1.5 * (q3 - q1) || x > q3 + 1.5 * (q3 - q1));
  return mask;
}

SiteRecord accepted(std::string id, double beta) {
  SiteRecord r;
  r.site_id = std::move(id);
  r.beta_percent = beta;
  r.accepted = true;
  r.reason = "accepted";
  return r;
}

std::vector<SiteRecord> records_of(const std::vector<double>& betas) {
  std::vector<SiteRecord> out;
  for (std::size_t i = 0; i < betas.size(); ++i) out.push_back(accepted("s" + std::to_string(100 + i), betas[i]));
  return out;
}

double plain_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

SiteInput synthetic_site(std::string id, double beta, std::uint64_t seed, double years) {
  Scenario sc;
  sc.seed = seed;
  sc.beta = beta;
  sc.years = years;
  sc.interval = 3600;
  return {id, [sc] { return embed_matrix(generate_site(sc).series); }};
}

}  // namespace

TEST_CASE("Tukey fences from the quartiles") {
  // Lower half {-1.2, -0.8}, upper half {-0.4, 0.0}.
  const auto t = tukey_outliers({-0.4, -1.2, 0.0, -0.8});
  CHECK(t.interval.q1 == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(t.interval.q3 == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(t.interval.lo == doctest::Approx(-2.2).epsilon(1e-15));
  CHECK(t.interval.hi == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::none_of(t.outliers.begin(), t.outliers.end(), [](bool b) { return b; }));

  // Odd count: the median itself sits in neither half.
  const auto odd = tukey_outliers({5.0, 1.0, 3.0, 2.0, 4.0});
  CHECK(odd.interval.q1 == 1.5);
  CHECK(odd.interval.q3 == 4.5);
}

TEST_CASE("all-equal values give a degenerate interval and no outliers") {
  const auto t = tukey_outliers({-0.7, -0.7, -0.7, -0.7, -0.7});
  CHECK(t.interval.lo == -0.7);
  CHECK(t.interval.hi == -0.7);
  CHECK(std::count(t.outliers.begin(), t.outliers.end(), true) == 0);
}

TEST_CASE("Tukey mask agrees with an independent implementation and ignores shifts") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(-0.8, 0.6);
  std::cauchy_distribution<double> tail(0.0, 0.3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + trial % 37;
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(i % 5 == 0 ? tail(rng) : g(rng));
    const auto t = tukey_outliers(v);
    CHECK(t.outliers == oracle_mask(v));
    // Shift by an exactly representable constant so the arithmetic is exact.
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += 4.0;
    CHECK(tukey_outliers(shifted).outliers == t.outliers);
  }
}

TEST_CASE("Tukey needs four values") {
  CHECK(code_of([] { tukey_outliers({1.0, 2.0, 3.0}); }) == ErrorCode::TooFewValues);
}

TEST_CASE("summary of identical values") {
  const auto s = summarize(records_of({-1.0, -1.0, -1.0}));
  CHECK(s.median == -1.0);
  CHECK(s.mean == -1.0);
  CHECK(s.std == 0.0);
  CHECK(s.included == 3);
  CHECK_FALSE(s.interval.has_value());
}

TEST_CASE("an extreme value is excluded before the spread is computed") {
  std::vector<double> betas;
  for (int i = 0; i < 20; ++i) betas.push_back(-1.5 + 0.05 * i);
  betas.push_back(12.0);
  auto recs = records_of(betas);
  recs.push_back(SiteRecord{"zz", 0.0, false, "TooShort", 0, 0.0, 0, {}});
  std::vector<bool> outlier;
  const auto s = summarize(recs, &outlier);
  CHECK(s.outliers == 1);
  CHECK(outlier[20]);
  CHECK_FALSE(outlier[21]);
  CHECK(s.total == 22);
  CHECK(s.included == 21);
  CHECK(s.rejected == 1);
  CHECK(s.positive == 1);
  const std::vector<double> kept(betas.begin(), betas.begin() + 20);
  CHECK(s.std == doctest::Approx(plain_std(kept)).epsilon(1e-12));
  CHECK(s.std < plain_std(betas));
  CHECK(s.mean == doctest::Approx(-1.025).epsilon(1e-12));
  CHECK(s.median == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("nothing accepted") {
  std::vector<SiteRecord> recs(2);
  recs[0].reason = recs[1].reason = "TooSparse";
  CHECK(code_of([&] { summarize(recs); }) == ErrorCode::NothingAccepted);
}

TEST_CASE("fleet runs every site and rejects short ones without aborting") {
  CHECK(code_of([] { run_fleet({}, {}); }) == ErrorCode::NoSites);

  const std::vector<SiteInput> sites{synthetic_site("b", -0.01, 8, 2.0), synthetic_site("a", -0.02, 9, 2.0),
                                     synthetic_site("c", -0.01, 10, 1.0)};
  const auto r = run_fleet(sites, {}, 2);
  REQUIRE(r.records.size() == 3);
  CHECK(r.records[0].site_id == "a");
  CHECK(r.records[1].site_id == "b");
  CHECK(r.records[2].site_id == "c");
  CHECK(r.records[0].accepted);
  CHECK(r.records[1].accepted);
  CHECK_FALSE(r.records[2].accepted);
  CHECK(r.records[2].reason == "TooShort");
  CHECK(std::abs(r.records[0].beta_percent + 2.0) <= 0.5);
  CHECK(std::abs(r.records[1].beta_percent + 1.0) <= 0.5);
  CHECK(r.summary.included + r.summary.rejected == r.summary.total);
  CHECK(r.summary.total == 3);
  CHECK(r.summary.median == doctest::Approx(0.5 * (r.records[0].beta_percent + r.records[1].beta_percent)));

  SUBCASE("input order does not matter") {
    const std::vector<SiteInput> reversed{sites[2], sites[1], sites[0]};
    const auto again = run_fleet(reversed, {}, 1);
    CHECK(again.summary.mean == r.summary.mean);
    CHECK(again.summary.std == r.summary.std);
    CHECK(again.summary.median == r.summary.median);
    for (std::size_t i = 0; i < 3; ++i) CHECK(again.records[i].beta_percent == r.records[i].beta_percent);
  }
}

TEST_CASE("single-site fleet summary equals that site") {
  const auto r = run_fleet({synthetic_site("solo", -0.01, 8, 2.0)}, {}, 1);
  REQUIRE(r.records.size() == 1);
  REQUIRE(r.records[0].accepted);
  CHECK(r.summary.mean == r.records[0].beta_percent);
  CHECK(r.summary.median == r.records[0].beta_percent);
  CHECK(r.summary.std == 0.0);
}

TEST_CASE("loader failures become rejected records") {
  const std::vector<SiteInput> sites{{"broken", [] () -> PowerMatrix { throw Error(ErrorCode::UnreadableSource, "gone"); }}};
  const auto r = run_fleet(sites, {}, 1);
  CHECK(r.records[0].reason == "UnreadableSource");
  CHECK(r.summary.rejected == 1);
  CHECK(r.summary.included == 0);
}

TEST_CASE("self comparison lies within its own bounds") {
  FleetResult f;
  f.records = records_of({-1.0, -0.3, 0.2, -2.5});
  std::vector<ExternalEstimate> ext;
  for (const auto& r : f.records) ext.push_back({r.site_id, r.beta_percent, r.beta_percent - 0.5, r.beta_percent + 0.5});
  const auto c = compare_external(f, ext);
  CHECK(c.rows.size() == 4);
  CHECK(c.within_fraction == 1.0);
  for (const auto& row : c.rows) CHECK(row.delta == 0.0);
}

TEST_CASE("disjoint site ids give an empty join") {
  FleetResult f;
  f.records = records_of({-1.0});
  CHECK(code_of([&] { compare_external(f, {{"other", -1.0, -2.0, 0.0}}); }) == ErrorCode::EmptyJoin);
}

TEST_CASE("quadrant counts match a scalar tally") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> truth(-0.8, 0.5), noise(0.0, 0.4), noisier(0.0, 0.9);
  FleetResult f;
  std::vector<ExternalEstimate> ext;
  int nn = 0, pp = 0, np = 0, pn = 0, inside = 0;
  for (int i = 0; i < 60; ++i) {
    const double t = truth(rng);
    const double a = t + noise(rng), b = t + noisier(rng);
    auto rec = accepted("site" + std::to_string(i), a);
    if (i % 7 == 3) rec.accepted = false;
    f.records.push_back(rec);
    if (i % 11 != 5) ext.push_back({rec.site_id, b, b - 0.6, b + 0.6});
    if (!rec.accepted || i % 11 == 5) continue;
    if (a < 0 && b < 0) ++nn;
    if (a >= 0 && b >= 0) ++pp;
    if (a < 0 && b >= 0) ++np;
    if (a >= 0 && b < 0) ++pn;
    if (a >= b - 0.6 && a <= b + 0.6) ++inside;
  }
  const auto c = compare_external(f, ext);
  CHECK(c.quadrants.both_negative == nn);
  CHECK(c.quadrants.both_nonnegative == pp);
  CHECK(c.quadrants.scsf_negative_external_nonnegative == np);
  CHECK(c.quadrants.scsf_nonnegative_external_negative == pn);
  CHECK(c.rows.size() == static_cast<std::size_t>(nn + pp + np + pn));
  CHECK(c.within_fraction == doctest::Approx(static_cast<double>(inside) / c.rows.size()));
}

TEST_CASE("external table parsing") {
  std::istringstream in("rate,site_id,hi,lo\n-0.5, a ,0.1,-1.1\n\n1.5,b,2,1\n");
  const auto t = parse_external_csv(in);
  REQUIRE(t.size() == 2);
  CHECK(t[0].site_id == "a");
  CHECK(t[0].rate == -0.5);
  CHECK(t[0].lo == -1.1);
  CHECK(t[0].hi == 0.1);
  CHECK(t[1].site_id == "b");

  std::istringstream missing("site_id,rate,lo\n");
  CHECK(code_of([&] { parse_external_csv(missing); }) == ErrorCode::AmbiguousSchema);
  std::istringstream bad("site_id,rate,lo,hi\nx,abc,0,1\n");
  CHECK(code_of([&] { parse_external_csv(bad); }) == ErrorCode::NoParseableRows);
}

TEST_CASE("histogram bins are aligned to the width") {
  const auto h = histogram({-1.1, -0.9, -0.8, 0.3, -0.75}, 0.5);
  REQUIRE(h.size() == 4);
  CHECK(h[0].lo == -1.5);
  CHECK(h[0].count == 1);
  CHECK(h[1].lo == -1.0);
  CHECK(h[1].count == 3);
  CHECK(h[2].count == 0);
  CHECK(h[3].lo == 0.0);
  CHECK(h[3].count == 1);
  CHECK(histogram({}, 0.5).empty());
  CHECK(code_of([] { histogram({1.0}, 0.0); }) == ErrorCode::InvalidArgument);
}
