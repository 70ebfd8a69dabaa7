// Brute-force reference implementations used to check the library. Each one
// is written the slow, obvious way and shares no code with src/.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "nuggetkit/core.hpp"

namespace oracle {

inline int sgn(double d) { return (d > 0) - (d < 0); }

// Tau-b from explicit concordant / discordant / tie counts.
inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double conc = 0, disc = 0, tx = 0, ty = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      int s = sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
      if (s > 0) ++conc;
      if (s < 0) ++disc;
      if (x[i] == x[j]) ++tx;
      if (y[i] == y[j]) ++ty;
    }
  return (conc - disc) / std::sqrt((pairs - tx) * (pairs - ty));
}

// 0-based descending rank with ties sharing the mean position.
inline double desc_rank0(const std::vector<double>& x, std::size_t i) {
  double above = 0, tied = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == i) continue;
    if (x[j] > x[i]) ++above;
    if (x[j] == x[i]) ++tied;
  }
  return above + tied / 2.0;
}

// Pair (i, j) weighted 1/(r_i + 1) + 1/(r_j + 1), ranks from x descending.
inline double weighted_tau(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double w = 1.0 / (desc_rank0(x, i) + 1.0) + 1.0 / (desc_rank0(x, j) + 1.0);
      int sx = sgn(x[i] - x[j]), sy = sgn(y[i] - y[j]);
      num += w * sx * sy;
      if (sx != 0) dx += w;
      if (sy != 0) dy += w;
    }
  return num / std::sqrt(dx * dy);
}

inline double spearman_by_formula(const std::vector<int>& rx, const std::vector<int>& ry) {
  double n = static_cast<double>(rx.size()), d2 = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

struct SignFlip {
  double p = 1.0;
  int n_nonzero = 0;
  double t_obs = 0;  // positive rank sum over non-zero differences
  double total = 0;
};

// Exact two-sided signed-rank p-value by enumerating every sign assignment
// of the non-zero differences. `drop_zeros` removes zeros before ranking;
// otherwise zeros take part in the ranking and are then set aside.
inline SignFlip wilcoxon_exact(const std::vector<double>& a, const std::vector<double>& b, bool drop_zeros) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(drop_zeros && a[i] - b[i] == 0.0)) d.push_back(a[i] - b[i]);
  std::vector<double> ranks(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double below = 0, tied = 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (j == i) continue;
      if (std::abs(d[j]) < std::abs(d[i])) ++below;
      if (std::abs(d[j]) == std::abs(d[i])) ++tied;
    }
    ranks[i] = 1.0 + below + tied / 2.0;
  }
  std::vector<double> r;
  SignFlip out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) continue;
    r.push_back(ranks[i]);
    out.total += ranks[i];
    if (d[i] > 0) out.t_obs += ranks[i];
  }
  out.n_nonzero = static_cast<int>(r.size());
  if (r.empty()) return out;
  const std::uint64_t m = r.size();
  double lower = 0, upper = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    double s = 0;
    for (std::uint64_t k = 0; k < m; ++k)
      if (mask >> k & 1) s += r[k];
    if (s <= out.t_obs + 1e-9) ++lower;
    if (s >= out.t_obs - 1e-9) ++upper;
  }
  out.p = std::min(1.0, 2.0 * std::min(lower, upper) / std::ldexp(1.0, static_cast<int>(m)));
  return out;
}

// 0 = a wins, 1 = b wins, 2 = not significant.
inline int wilcoxon_category(const std::vector<double>& a, const std::vector<double>& b, double alpha,
                             bool drop_zeros = false) {
  auto r = wilcoxon_exact(a, b, drop_zeros);
  if (!(r.p < alpha)) return 2;
  if (2 * r.t_obs > r.total) return 0;
  if (2 * r.t_obs < r.total) return 1;
  return 2;
}

// Agreement rate of exact-test categories over every pair of shared runs,
// using only topics where all four scores exist.
inline double wpa(const nuggetkit::ScoreMatrix& ref, const nuggetkit::ScoreMatrix& cand, double alpha, int min_topics,
                  bool drop_zeros = false, int* pairs = nullptr) {
  std::vector<std::string> runs;
  for (const auto& r : ref.run_ids)
    if (std::find(cand.run_ids.begin(), cand.run_ids.end(), r) != cand.run_ids.end()) runs.push_back(r);
  std::sort(runs.begin(), runs.end());
  std::set<std::string> topic_set(ref.topic_ids.begin(), ref.topic_ids.end());
  topic_set.insert(cand.topic_ids.begin(), cand.topic_ids.end());
  int used = 0, agree = 0;
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      std::vector<double> ra, rb, ca, cb;
      for (const auto& t : topic_set) {
        auto a1 = ref.at(runs[i], t), b1 = ref.at(runs[j], t), a2 = cand.at(runs[i], t), b2 = cand.at(runs[j], t);
        if (!a1 || !b1 || !a2 || !b2) continue;
        ra.push_back(*a1);
        rb.push_back(*b1);
        ca.push_back(*a2);
        cb.push_back(*b2);
      }
      if (static_cast<int>(ra.size()) < min_topics) continue;
      ++used;
      agree += wilcoxon_category(ra, rb, alpha, drop_zeros) == wilcoxon_category(ca, cb, alpha, drop_zeros);
    }
  if (pairs) *pairs = used;
  return used == 0 ? -1.0 : static_cast<double>(agree) / used;
}

// Components by repeated boolean matrix closure (Floyd-Warshall style).
inline std::vector<std::vector<int>> components_by_closure(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
  for (int i = 0; i < n; ++i) reach[i][i] = true;
  for (auto [a, b] : edges) reach[a][b] = reach[b][a] = true;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;
  std::set<std::vector<int>> groups;
  for (int i = 0; i < n; ++i) {
    std::vector<int> g;
    for (int j = 0; j < n; ++j)
      if (reach[i][j]) g.push_back(j);
    groups.insert(g);
  }
  return {groups.begin(), groups.end()};
}

// Does matching m (proposer -> receiver or -1) admit a blocking pair?
// Preferences are full or partial best-first lists.
inline bool has_blocking_pair(const std::vector<std::vector<int>>& pp, const std::vector<std::vector<int>>& rp,
                              const std::vector<int>& m) {
  auto pos = [](const std::vector<int>& list, int x) {
    auto it = std::find(list.begin(), list.end(), x);
    return it == list.end() ? -1 : static_cast<int>(it - list.begin());
  };
  std::vector<int> holder(rp.size(), -1);
  for (std::size_t p = 0; p < m.size(); ++p)
    if (m[p] >= 0) holder[static_cast<std::size_t>(m[p])] = static_cast<int>(p);
  for (std::size_t p = 0; p < pp.size(); ++p)
    for (int r : pp[p]) {
      int pr = pos(pp[p], r);
      if (m[p] >= 0 && pos(pp[p], m[p]) <= pr) continue;  // p does not prefer r
      int rank_p = pos(rp[static_cast<std::size_t>(r)], static_cast<int>(p));
      if (rank_p < 0) continue;  // r finds p unacceptable
      int h = holder[static_cast<std::size_t>(r)];
      if (h < 0 || rank_p < pos(rp[static_cast<std::size_t>(r)], h)) return true;
    }
  return false;
}

// Every stable matching of a complete n x n instance, by enumerating all
// permutations.
inline std::vector<std::vector<int>> all_stable_matchings(const std::vector<std::vector<int>>& pp,
                                                          const std::vector<std::vector<int>>& rp) {
  std::vector<int> perm(pp.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    if (!has_blocking_pair(pp, rp, perm)) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

// Best training accuracy of any linear classifier over the first two
// features, by a fine grid of directions and every useful threshold.
inline double grid_linear_accuracy(const std::vector<std::pair<double, double>>& pos,
                                   const std::vector<std::pair<double, double>>& neg, int directions = 720) {
  const double pi = std::acos(-1.0);
  const double n = static_cast<double>(pos.size() + neg.size());
  double best = 0;
  for (int k = 0; k < directions; ++k) {
    double th = 2 * pi * k / directions, c = std::cos(th), s = std::sin(th);
    std::vector<std::pair<double, int>> proj;
    for (auto [a, b] : pos) proj.emplace_back(c * a + s * b, 1);
    for (auto [a, b] : neg) proj.emplace_back(c * a + s * b, 0);
    std::sort(proj.begin(), proj.end());
    // Threshold below everything, then between each consecutive pair.
    int correct = static_cast<int>(pos.size());
    best = std::max(best, correct / n);
    for (const auto& [v, label] : proj) {
      correct += label ? -1 : 1;
      best = std::max(best, correct / n);
    }
  }
  return best;
}

}  // namespace oracle
