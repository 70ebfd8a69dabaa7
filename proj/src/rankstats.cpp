#include "nuggetkit/rankstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>

#include "nuggetkit/text.hpp"

namespace nuggetkit::stats {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("correlation inputs differ in length");
  if (x.size() < 2) throw ContractError("correlation needs at least two items");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ContractError("correlation inputs must be finite");
}

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

void check_nonconstant(std::span<const double> x, std::span<const double> y) {
  if (constant(x) || constant(y)) throw StatsError("correlation undefined for a constant vector");
}

int sgn(double d) { return (d > 0) - (d < 0); }

// Sum of t(t-1)/2 over runs of equal values in an already sorted range.
template <class It, class Eq>
std::int64_t tied_pairs(It first, It last, Eq eq) {
  std::int64_t total = 0;
  while (first != last) {
    auto run_end = std::next(first);
    while (run_end != last && eq(*first, *run_end)) ++run_end;
    auto t = static_cast<std::int64_t>(std::distance(first, run_end));
    total += t * (t - 1) / 2;
    first = run_end;
  }
  return total;
}

// Merge sort counting strict inversions.
std::int64_t sort_count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = sort_count_inversions(v, buf, lo, mid) + sort_count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace

std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  check_nonconstant(x, y);
  auto rx = midranks(x), ry = midranks(y);
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  check_nonconstant(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const auto n1 = tied_pairs(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const auto n3 = tied_pairs(idx.begin(), idx.end(),
                             [&](std::size_t a, std::size_t b) { return x[a] == x[b] && y[a] == y[b]; });
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const auto swaps = sort_count_inversions(ys, buf, 0, n);
  const auto n2 = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });
  const auto s = n0 - n1 - n2 + n3 - 2 * swaps;
  return std::clamp(static_cast<double>(s) / std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2)),
                    -1.0, 1.0);
}

double weighted_kendall_tau(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  check_nonconstant(x, y);
  const std::size_t n = x.size();
  std::vector<double> neg(n);
  for (std::size_t i = 0; i < n; ++i) neg[i] = -x[i];
  auto r = midranks(neg);
  // Sum over pairs of (w_i + w_j) f(i, j) = sum over items of w_i times
  // sum over partners of f(i, j), for symmetric f.
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / r[i];  // r is 1-based here, so 1 / ((r - 1) + 1)
    int agree = 0, untied_x = 0, untied_y = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      int sx = sgn(x[i] - x[j]), sy = sgn(y[i] - y[j]);
      agree += sx * sy;
      untied_x += sx != 0;
      untied_y += sy != 0;
    }
    num += w * agree;
    dx += w * untied_x;
    dy += w * untied_y;
  }
  return std::clamp(num / std::sqrt(dx * dy), -1.0, 1.0);
}

std::string_view to_string(ZeroHandling z) { return z == ZeroHandling::kZsplit ? "zsplit" : "wilcox"; }

ZeroHandling parse_zero_handling(std::string_view s) {
  if (s == "zsplit") return ZeroHandling::kZsplit;
  if (s == "wilcox") return ZeroHandling::kWilcox;
  throw ContractError("unknown zero handling '" + std::string(s) + "'");
}

void WpaConfig::check() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha must lie in (0, 1)");
  if (min_topics < 1) throw ContractError("min_topics must be >= 1");
  if (exact_max_n < 0 || exact_max_n > 60) throw ContractError("exact_max_n must lie in [0, 60]");
}

std::string_view to_string(WilcoxonOutcome o) {
  switch (o) {
    case WilcoxonOutcome::kASignificant:
      return "a_significant";
    case WilcoxonOutcome::kBSignificant:
      return "b_significant";
    case WilcoxonOutcome::kNotSignificant:
      break;
  }
  return "not_significant";
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, const WpaConfig& config) {
  config.check();
  if (a.size() != b.size()) throw ContractError("wilcoxon: paired samples differ in length");
  if (a.size() < static_cast<std::size_t>(config.min_topics))
    throw ContractError("wilcoxon: fewer pairs than min_topics");

  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    if (config.zero_handling == ZeroHandling::kWilcox && diff == 0.0) continue;
    d.push_back(diff);
  }
  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  auto r = midranks(mag);

  WilcoxonResult res;
  // Doubled ranks are integers, which keeps the exact distribution on a grid.
  std::vector<std::int64_t> doubled;
  std::int64_t t_obs = 0, total = 0;
  double zero_half = 0.0, sum_r2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) {
      zero_half += r[i] / 2.0;
      continue;
    }
    auto dr = static_cast<std::int64_t>(std::llround(2.0 * r[i]));
    doubled.push_back(dr);
    total += dr;
    sum_r2 += r[i] * r[i];
    if (d[i] > 0) t_obs += dr;
  }
  res.n_nonzero = static_cast<int>(doubled.size());
  res.w_plus = static_cast<double>(t_obs) / 2.0 + zero_half;
  if (doubled.empty()) return res;

  if (res.n_nonzero <= config.exact_max_n) {
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    std::int64_t reach = 0;
    for (auto dr : doubled) {
      for (std::int64_t s = reach; s >= 0; --s)
        if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + dr)] += count[static_cast<std::size_t>(s)];
      reach += dr;
    }
    double lower = 0.0, upper = 0.0;
    for (std::int64_t s = 0; s <= total; ++s) {
      if (s <= t_obs) lower += count[static_cast<std::size_t>(s)];
      if (s >= t_obs) upper += count[static_cast<std::size_t>(s)];
    }
    double denom = std::ldexp(1.0, res.n_nonzero);
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / denom);
    res.exact = true;
  } else {
    double w = static_cast<double>(t_obs) / 2.0;
    double mean = static_cast<double>(total) / 4.0;
    double sd = std::sqrt(sum_r2 / 4.0);
    double z = std::max(0.0, (std::abs(w - mean) - 0.5) / sd);
    res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    res.exact = false;
  }
  if (res.p_value < config.alpha) {
    // 2 * t_obs vs total compares W+ with its null expectation.
    if (2 * t_obs > total)
      res.outcome = WilcoxonOutcome::kASignificant;
    else if (2 * t_obs < total)
      res.outcome = WilcoxonOutcome::kBSignificant;
  }
  return res;
}

namespace {

std::map<std::string, std::size_t> index_of(const std::vector<std::string>& v) {
  std::map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < v.size(); ++i) m[v[i]] = i;
  return m;
}

std::vector<std::string> shared(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sb(b.begin(), b.end());
  std::set<std::string> out;
  for (const auto& x : a)
    if (sb.count(x)) out.insert(x);
  return {out.begin(), out.end()};
}

}  // namespace

double wpa(const ScoreMatrix& reference, const ScoreMatrix& candidate, const WpaConfig& config, int* pairs_used) {
  config.check();
  auto runs = shared(reference.run_ids, candidate.run_ids);
  auto topics = shared(reference.topic_ids, candidate.topic_ids);
  if (runs.size() < 2) throw StatsError("WPA needs at least two shared runs");
  if (topics.size() < static_cast<std::size_t>(config.min_topics))
    throw StatsError("WPA needs at least " + std::to_string(config.min_topics) + " shared topics");
  auto rr = index_of(reference.run_ids), rt = index_of(reference.topic_ids);
  auto cr = index_of(candidate.run_ids), ct = index_of(candidate.topic_ids);

  std::size_t agree = 0, used = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      std::vector<double> ra, rb, ca, cb;
      for (const auto& t : topics) {
        const auto& r1 = reference.scores[rr[runs[i]]][rt[t]];
        const auto& r2 = reference.scores[rr[runs[j]]][rt[t]];
        const auto& c1 = candidate.scores[cr[runs[i]]][ct[t]];
        const auto& c2 = candidate.scores[cr[runs[j]]][ct[t]];
        if (!r1 || !r2 || !c1 || !c2) continue;
        ra.push_back(*r1);
        rb.push_back(*r2);
        ca.push_back(*c1);
        cb.push_back(*c2);
      }
      if (ra.size() < static_cast<std::size_t>(config.min_topics)) continue;
      ++used;
      agree += wilcoxon_signed_rank(ra, rb, config).outcome == wilcoxon_signed_rank(ca, cb, config).outcome;
    }
  }
  if (pairs_used) *pairs_used = static_cast<int>(used);
  if (used == 0) throw StatsError("WPA: no run pair shares enough topics");
  return static_cast<double>(agree) / static_cast<double>(used);
}

CorrelationReport correlation_report(const eval::Leaderboard& reference, const eval::Leaderboard& candidate,
                                     const WpaConfig& config) {
  std::vector<std::string> ref_runs, cand_runs;
  for (const auto& r : reference.rows) ref_runs.push_back(r.run_id);
  for (const auto& r : candidate.rows) cand_runs.push_back(r.run_id);
  auto runs = shared(ref_runs, cand_runs);
  if (runs.size() < 2) throw StatsError("leaderboards share fewer than two runs");
  std::vector<double> x, y;
  for (const auto& run : runs) {
    x.push_back(reference.find(run)->macro_recall);
    y.push_back(candidate.find(run)->macro_recall);
  }
  CorrelationReport rep;
  rep.reference_label = reference.label;
  rep.candidate_label = candidate.label;
  rep.n_runs = static_cast<int>(runs.size());
  rep.rho = spearman_rho(x, y);
  rep.tau = kendall_tau(x, y);
  rep.weighted_tau = weighted_kendall_tau(x, y);
  rep.wpa = wpa(reference.to_matrix(), candidate.to_matrix(), config, &rep.wpa_pairs);
  return rep;
}

eval::Leaderboard filter_runs(const eval::Leaderboard& lb, const std::vector<std::string>& runs) {
  std::set<std::string> keep(runs.begin(), runs.end());
  eval::Leaderboard out = lb;
  std::erase_if(out.rows, [&](const eval::LeaderboardRow& r) { return !keep.count(r.run_id); });
  return out;
}

SubsetReport subset_report(const eval::Leaderboard& reference, const eval::Leaderboard& candidate,
                           const std::vector<std::string>& run_filter, const WpaConfig& config) {
  SubsetReport out;
  out.full = correlation_report(reference, candidate, config);
  out.subset = correlation_report(filter_runs(reference, run_filter), filter_runs(candidate, run_filter), config);
  out.d_rho = out.subset.rho - out.full.rho;
  out.d_tau = out.subset.tau - out.full.tau;
  out.d_weighted_tau = out.subset.weighted_tau - out.full.weighted_tau;
  out.d_wpa = out.subset.wpa - out.full.wpa;
  return out;
}

CrossSetMatrix cross_set_matrix(std::span<const eval::Leaderboard> lbs) {
  if (lbs.size() < 2) throw ContractError("cross_set_matrix needs at least two leaderboards");
  CrossSetMatrix m;
  const std::size_t k = lbs.size();
  m.rho.assign(k, std::vector<double>(k, 1.0));
  m.tau.assign(k, std::vector<double>(k, 1.0));
  for (const auto& lb : lbs) m.labels.push_back(lb.label);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<std::string> a, b;
      for (const auto& r : lbs[i].rows) a.push_back(r.run_id);
      for (const auto& r : lbs[j].rows) b.push_back(r.run_id);
      auto runs = shared(a, b);
      if (runs.size() < 2)
        throw StatsError("leaderboards " + lbs[i].label + " and " + lbs[j].label + " share fewer than two runs");
      std::vector<double> x, y;
      for (const auto& run : runs) {
        x.push_back(lbs[i].find(run)->macro_recall);
        y.push_back(lbs[j].find(run)->macro_recall);
      }
      m.rho[i][j] = m.rho[j][i] = spearman_rho(x, y);
      m.tau[i][j] = m.tau[j][i] = kendall_tau(x, y);
    }
  }
  return m;
}

ScatterLevel parse_scatter_level(std::string_view s) {
  if (s == "system") return ScatterLevel::kSystem;
  if (s == "topic") return ScatterLevel::kTopic;
  throw ContractError("unknown scatter level '" + std::string(s) + "'");
}

std::vector<ScatterRow> scatter_data(const eval::Leaderboard& reference, const eval::Leaderboard& candidate,
                                     ScatterLevel level) {
  std::vector<std::string> a, b;
  for (const auto& r : reference.rows) a.push_back(r.run_id);
  for (const auto& r : candidate.rows) b.push_back(r.run_id);
  std::vector<ScatterRow> out;
  for (const auto& run : shared(a, b)) {
    const auto* ref = reference.find(run);
    const auto* cand = candidate.find(run);
    if (level == ScatterLevel::kSystem) {
      out.push_back({run, std::nullopt, cand->macro_recall, ref->macro_recall});
      continue;
    }
    for (const auto& [topic, y] : ref->per_topic) {
      auto it = cand->per_topic.find(topic);
      if (it != cand->per_topic.end()) out.push_back({run, topic, it->second, y});
    }
  }
  return out;
}

std::string correlation_csv(std::span<const CorrelationReport> reports) {
  std::string out = "reference,candidate,n_runs,rho,tau,weighted_tau,wpa,wpa_pairs\n";
  for (const auto& r : reports) {
    out += io::csv_field(r.reference_label) + "," + io::csv_field(r.candidate_label) + "," +
           std::to_string(r.n_runs) + "," + text::format_double(r.rho) + "," + text::format_double(r.tau) + "," +
           text::format_double(r.weighted_tau) + "," + text::format_double(r.wpa) + "," +
           std::to_string(r.wpa_pairs) + "\n";
  }
  return out;
}

std::string subset_csv(const SubsetReport& r) {
  std::string out = "metric,subset,full,delta\n";
  auto row = [&](std::string_view name, double s, double f, double d) {
    out += std::string(name) + "," + text::format_double(s) + "," + text::format_double(f) + "," +
           text::format_double(d) + "\n";
  };
  out += "n_runs," + std::to_string(r.subset.n_runs) + "," + std::to_string(r.full.n_runs) + "," +
         std::to_string(r.subset.n_runs - r.full.n_runs) + "\n";
  row("rho", r.subset.rho, r.full.rho, r.d_rho);
  row("tau", r.subset.tau, r.full.tau, r.d_tau);
  row("weighted_tau", r.subset.weighted_tau, r.full.weighted_tau, r.d_weighted_tau);
  row("wpa", r.subset.wpa, r.full.wpa, r.d_wpa);
  return out;
}

std::string heatmap_csv(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& m) {
  std::string out = "label";
  for (const auto& l : labels) out += "," + io::csv_field(l);
  out += '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += io::csv_field(labels[i]);
    for (double v : m[i]) out += "," + text::format_double(v);
    out += '\n';
  }
  return out;
}

std::string scatter_csv(std::span<const ScatterRow> rows, ScatterLevel level) {
  std::string out = level == ScatterLevel::kSystem ? "run_id,x,y\n" : "run_id,topic_id,x,y\n";
  for (const auto& r : rows) {
    out += io::csv_field(r.run_id) + ",";
    if (level == ScatterLevel::kTopic) out += io::csv_field(r.topic_id.value_or("")) + ",";
    out += text::format_double(r.x) + "," + text::format_double(r.y) + "\n";
  }
  return out;
}

}  // namespace nuggetkit::stats
