// Leaderboard agreement statistics: Spearman rho, Kendall tau-b, weighted
// tau, Wilcoxon signed-rank tests and Wilcoxon paired accuracy (WPA), plus
// the subset, cross-set and scatter tables built from them.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nuggetkit/core.hpp"
#include "nuggetkit/evalharness.hpp"

namespace nuggetkit::stats {

/// Average ranks (1-based) with ties sharing the mean of their positions,
/// ranking ascending.
std::vector<double> midranks(std::span<const double> x);

// All three throw ContractError on length mismatch or n < 2, and StatsError
// when either vector is constant.
double spearman_rho(std::span<const double> x, std::span<const double> y);
/// Tau-b, O(n log n).
double kendall_tau(std::span<const double> x, std::span<const double> y);
/// Pair (i, j) weighted w(r_i) + w(r_j), w(r) = 1 / (r + 1), r the 0-based
/// rank of the item in x sorted descending (ties share mid-ranks).
/// Normalized tau-b style by the weighted count of pairs untied in x and y.
double weighted_kendall_tau(std::span<const double> x, std::span<const double> y);

enum class ZeroHandling { kZsplit, kWilcox };
std::string_view to_string(ZeroHandling z);
ZeroHandling parse_zero_handling(std::string_view s);

struct WpaConfig {
  double alpha = 0.05;
  ZeroHandling zero_handling = ZeroHandling::kZsplit;
  int min_topics = 5;
  // Above this many non-zero differences the normal approximation is used.
  int exact_max_n = 25;

  void check() const;
};

enum class WilcoxonOutcome { kASignificant, kBSignificant, kNotSignificant };
std::string_view to_string(WilcoxonOutcome o);

struct WilcoxonResult {
  WilcoxonOutcome outcome = WilcoxonOutcome::kNotSignificant;
  double p_value = 1.0;
  double w_plus = 0.0;  // rank sum of positive differences (a - b)
  int n_nonzero = 0;
  bool exact = true;
};

/// Two-sided signed-rank test on a - b. Throws ContractError on length
/// mismatch; fewer than min_topics pairs is also a contract error.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, const WpaConfig& config);

/// Fraction of run pairs whose test outcome is the same category under both
/// matrices. Only topics present for all four scores of a pair are used;
/// pairs left with fewer than min_topics topics are skipped. Throws
/// StatsError when fewer than two shared runs or no usable pair remain.
double wpa(const ScoreMatrix& reference, const ScoreMatrix& candidate, const WpaConfig& config,
           int* pairs_used = nullptr);

struct CorrelationReport {
  std::string reference_label;
  std::string candidate_label;
  double rho = 0.0;
  double tau = 0.0;
  double weighted_tau = 0.0;
  double wpa = 0.0;
  int n_runs = 0;
  int wpa_pairs = 0;
};

CorrelationReport correlation_report(const eval::Leaderboard& reference, const eval::Leaderboard& candidate,
                                     const WpaConfig& config);

struct SubsetReport {
  CorrelationReport subset;
  CorrelationReport full;
  double d_rho = 0.0, d_tau = 0.0, d_weighted_tau = 0.0;
  double d_wpa = 0.0;
};

/// Statistics on the filtered runs minus the same on all shared runs.
SubsetReport subset_report(const eval::Leaderboard& reference, const eval::Leaderboard& candidate,
                           const std::vector<std::string>& run_filter, const WpaConfig& config);

/// Leaderboard restricted to the given runs (order preserved).
eval::Leaderboard filter_runs(const eval::Leaderboard& lb, const std::vector<std::string>& runs);

struct CrossSetMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rho;
  std::vector<std::vector<double>> tau;
};

CrossSetMatrix cross_set_matrix(std::span<const eval::Leaderboard> leaderboards);

enum class ScatterLevel { kSystem, kTopic };
ScatterLevel parse_scatter_level(std::string_view s);

struct ScatterRow {
  std::string run_id;
  std::optional<std::string> topic_id;
  double x = 0.0;  // candidate
  double y = 0.0;  // reference
};

std::vector<ScatterRow> scatter_data(const eval::Leaderboard& reference, const eval::Leaderboard& candidate,
                                     ScatterLevel level);

// CSV emitters; column orders are documented in FORMATS.md.
std::string correlation_csv(std::span<const CorrelationReport> reports);
std::string subset_csv(const SubsetReport& r);
std::string heatmap_csv(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& m);
std::string scatter_csv(std::span<const ScatterRow> rows, ScatterLevel level);

}  // namespace nuggetkit::stats
