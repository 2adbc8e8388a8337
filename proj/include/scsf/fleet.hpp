#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scsf/ingest.hpp"
#include "scsf/model.hpp"

namespace scsf {

// A site is loaded lazily inside its worker so a batch never holds every
// matrix at once. Loader failures become rejected records.
struct SiteInput {
  std::string site_id;
  std::function<PowerMatrix()> load;
};

SiteInput site_from_matrix(std::string site_id, PowerMatrix p);

struct SiteRecord {
  std::string site_id;
  double beta_percent = 0.0;  // meaningful only when accepted
  bool accepted = false;
  std::string reason;         // "accepted" or the rejection reason
  int iterations = 0;
  double runtime_s = 0.0;
  Eigen::Index clear_days = 0;
  std::optional<double> residual_slope;  // kWh/day
};

struct TukeyInterval {
  double q1 = 0.0;
  double q3 = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct TukeyResult {
  TukeyInterval interval;
  std::vector<bool> outliers;  // aligned with the input values
};

// Quartiles by the median-exclusive method: Q1 and Q3 are the medians of the
// values strictly below and strictly above the median position. Fences are
// 1.5 IQR beyond the quartiles. Throws TooFewValues below 4 values.
TukeyResult tukey_outliers(const std::vector<double>& values);

struct FleetSummary {
  int total = 0;
  int included = 0;  // accepted
  int rejected = 0;
  int outliers = 0;
  int positive = 0;  // accepted sites with beta > 0
  double median = 0.0;
  double mean = 0.0;  // over accepted, non-outlier sites
  double std = 0.0;   // sample standard deviation, same sites; 0 below two
  std::optional<TukeyInterval> interval;  // absent when fewer than 4 accepted
};

struct FleetResult {
  std::vector<SiteRecord> records;  // sorted by site_id
  std::vector<bool> outlier;        // aligned with records
  FleetSummary summary;
};

// Throws NothingAccepted.
FleetSummary summarize(const std::vector<SiteRecord>& records, std::vector<bool>* outlier = nullptr);

// Every site yields a record; a failing site never aborts the batch.
// Throws NoSites. The summary is computed whenever at least one site is
// accepted; otherwise it carries counts only.
FleetResult run_fleet(const std::vector<SiteInput>& sites, const HyperParams& hp, int workers = 1);

struct ExternalEstimate {
  std::string site_id;
  double rate = 0.0;  // %/yr
  double lo = 0.0;
  double hi = 0.0;
};

// CSV with header site_id,rate,lo,hi (any column order).
std::vector<ExternalEstimate> parse_external_csv(std::istream& in);

struct ComparisonRow {
  std::string site_id;
  double scsf = 0.0;
  double external = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double delta = 0.0;  // scsf - external
  bool within = false;
};

// Sign quadrants; zero counts as non-negative.
struct Quadrants {
  int both_negative = 0;
  int both_nonnegative = 0;
  int scsf_negative_external_nonnegative = 0;
  int scsf_nonnegative_external_negative = 0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;  // accepted sites present in both, by site_id
  double within_fraction = 0.0;
  Quadrants quadrants;
};

// Throws EmptyJoin when no accepted site appears in the external table.
Comparison compare_external(const FleetResult& result, const std::vector<ExternalEstimate>& external);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
};

// Bins of `width` aligned to multiples of it, covering min to max.
std::vector<HistogramBin> histogram(const std::vector<double>& values, double width);

}  // namespace scsf
