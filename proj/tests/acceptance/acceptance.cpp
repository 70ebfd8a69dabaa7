// Acceptance runner: one PASS/FAIL line per criterion, each checked against
// its runtime budget. Exit status is non-zero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "nuggetkit/alignment.hpp"
#include "nuggetkit/clusterstage.hpp"
#include "nuggetkit/evalharness.hpp"
#include "nuggetkit/pipeline.hpp"
#include "nuggetkit/rankstats.hpp"
#include "nuggetkit/selectstage.hpp"
#include "nuggetkit/svm.hpp"
#include "support/clikit.hpp"
#include "support/oracles.hpp"
#include "support/roundtrip.hpp"
#include "support/testkit.hpp"

using namespace nuggetkit;
namespace fs = std::filesystem;

namespace {

// Collects failure messages; only the first few are printed.
struct Failures {
  std::vector<std::string> items;
  void expect(bool ok, const std::string& what) {
    if (!ok) items.push_back(what);
  }
  bool empty() const { return items.empty(); }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, int levels) {
  std::uniform_int_distribution<int> d(0, levels);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng) / static_cast<double>(levels);
  return v;
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v[0]; });
}

ScoreMatrix random_matrix(std::mt19937_64& rng, int runs, int topics) {
  ScoreMatrix m;
  m.label = "m";
  std::uniform_real_distribution<double> u(0, 1);
  for (int r = 0; r < runs; ++r) m.run_ids.push_back("run" + std::to_string(r));
  for (int t = 0; t < topics; ++t) m.topic_ids.push_back("T" + std::to_string(t));
  for (int r = 0; r < runs; ++r) {
    std::vector<std::optional<double>> row;
    for (int t = 0; t < topics; ++t) row.push_back(std::clamp(0.1 + 0.6 * r / runs + 0.3 * u(rng), 0.0, 1.0));
    m.scores.push_back(row);
  }
  return m;
}

// ---------------------------------------------------------------- 1
Failures statistics_oracles() {
  Failures f;
  std::mt19937_64 rng(20240601);
  stats::WpaConfig cfg;
  cfg.min_topics = 2;
  int fixtures = 0;
  while (fixtures < 200) {
    std::size_t n = 2 + rng() % 9;
    auto x = random_scores(rng, n, 4), y = random_scores(rng, n, 4);
    if (constant(x) || constant(y)) continue;
    ++fixtures;
    double t = stats::kendall_tau(x, y), want_t = oracle::kendall_tau_b(x, y);
    f.expect(std::abs(t - want_t) <= 1e-12, "kendall_tau " + num(t) + " vs " + num(want_t));
    double w = stats::weighted_kendall_tau(x, y), want_w = oracle::weighted_tau(x, y);
    f.expect(std::abs(w - want_w) <= 1e-12, "weighted_tau " + num(w) + " vs " + num(want_w));
    for (auto zh : {stats::ZeroHandling::kZsplit, stats::ZeroHandling::kWilcox}) {
      cfg.zero_handling = zh;
      bool drop = zh == stats::ZeroHandling::kWilcox;
      auto r = stats::wilcoxon_signed_rank(x, y, cfg);
      auto o = oracle::wilcoxon_exact(x, y, drop);
      f.expect(r.exact, "normal approximation used for n <= 10");
      f.expect(std::abs(r.p_value - o.p) <= 1e-12, "wilcoxon p " + num(r.p_value) + " vs " + num(o.p));
    }
  }
  return f;
}

// ---------------------------------------------------------------- 2
Failures wpa_contract() {
  Failures f;
  std::mt19937_64 rng(77);
  stats::WpaConfig cfg;
  for (int t = 0; t < 50; ++t) {
    auto m = random_matrix(rng, 3 + static_cast<int>(rng() % 6), 5 + static_cast<int>(rng() % 6));
    f.expect(stats::wpa(m, m, cfg) == 1.0, "WPA(M, M) != 1");
    std::uniform_real_distribution<double> s(0.05, 1.0);
    auto scaled = m;
    double k = s(rng);
    for (auto& row : scaled.scores)
      for (auto& v : row) *v *= k;
    f.expect(stats::wpa(m, scaled, cfg) == stats::wpa(m, m, cfg), "scaling by " + num(k) + " changed WPA");
  }
  // Four runs, eight topics. The reference orders A > B > C > D everywhere;
  // the candidate interleaves A with B and ties C with D.
  ScoreMatrix ref{"ref", {"A", "B", "C", "D"}, {}, {}}, cand{"cand", {"A", "B", "C", "D"}, {}, {}};
  for (int t = 0; t < 8; ++t) ref.topic_ids.push_back("T" + std::to_string(t));
  cand.topic_ids = ref.topic_ids;
  for (int r = 0; r < 4; ++r) {
    std::vector<std::optional<double>> rr, cr;
    for (int t = 0; t < 8; ++t) {
      double base = 0.05 + 0.01 * t, c = base + 0.2 * (3 - r);
      rr.push_back(c);
      if (r == 1) c = base + 0.6 + (t % 2 ? 0.05 : -0.05);
      if (r == 3) c = base + 0.2;
      cr.push_back(c);
    }
    ref.scores.push_back(rr);
    cand.scores.push_back(cr);
  }
  int pairs = 0, oracle_pairs = 0;
  double got = stats::wpa(ref, cand, cfg, &pairs);
  f.expect(std::abs(got - 4.0 / 6.0) < 1e-15 && pairs == 6, "fixture WPA " + num(got) + " over " + std::to_string(pairs));
  f.expect(std::abs(oracle::wpa(ref, cand, 0.05, 5, false, &oracle_pairs) - 4.0 / 6.0) < 1e-15 && oracle_pairs == 6,
           "fixture enumeration disagrees");
  return f;
}

// ---------------------------------------------------------------- 3
Failures clustering_equivalence() {
  Failures f;
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 1 + static_cast<int>(rng() % 12);
    int density = 2 + static_cast<int>(rng() % 6);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("n" + std::to_string(10 + i));
    std::vector<std::pair<int, int>> raw;
    std::vector<cluster::ParaphraseEdge> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (static_cast<int>(rng() % density) == 0) {
          raw.emplace_back(i, j);
          edges.push_back({ids[i], ids[j], 1.0, true});
        }
    std::vector<std::vector<std::string>> want;
    for (const auto& g : oracle::components_by_closure(n, raw)) {
      std::vector<std::string> names;
      for (int k : g) names.push_back(ids[k]);
      want.push_back(names);
    }
    std::sort(want.begin(), want.end());
    f.expect(cluster::connected_components(ids, edges) == want, "graph " + std::to_string(trial) + " differs");
  }

  // Threshold sweep over hashing-mock embeddings of overlapping questions.
  const std::vector<std::string> words = {"how", "tall", "is", "the", "statue", "what", "height", "of",
                                          "who", "designed", "it", "when", "was", "built"};
  std::vector<std::string> ids, questions;
  for (int i = 0; i < 40; ++i) {
    std::string q;
    int len = 3 + static_cast<int>(rng() % 4);
    for (int k = 0; k < len; ++k) q += (k ? " " : "") + words[rng() % words.size()];
    ids.push_back("q" + std::to_string(100 + i));
    questions.push_back(q + "?");
  }
  auto emb = testkit::hashing_embedder();
  std::set<std::pair<std::string, std::string>> previous;
  std::size_t previous_clusters = 0;
  bool first = true;
  for (int step = 0; step <= 9; ++step) {
    cluster::ClusterConfig c;
    c.cosine_threshold = 0.5 + 0.05 * step;
    auto edges = cluster::candidate_pairs(ids, questions, *emb, c);
    std::set<std::pair<std::string, std::string>> now;
    for (const auto& e : edges) {
      now.insert({e.nugget_id_a, e.nugget_id_b});
      f.expect(e.cosine > c.cosine_threshold, "edge at or below threshold");
    }
    if (step == 0) f.expect(!edges.empty(), "sweep starts without any edge");
    auto clusters = cluster::connected_components(ids, edges).size();
    if (!first) {
      f.expect(std::includes(previous.begin(), previous.end(), now.begin(), now.end()),
               "edges at " + num(c.cosine_threshold) + " not a subset of the lower threshold");
      f.expect(clusters >= previous_clusters, "cluster count fell as the threshold rose");
    }
    previous = now;
    previous_clusters = clusters;
    first = false;
  }
  return f;
}

// ---------------------------------------------------------------- 4
QualityVector mid_vector() {
  QualityVector q;
  for (std::size_t i = 0; i < kNumCriteria; ++i) {
    const auto& info = criteria_table()[i];
    q.values[i] = info.binary ? 0.0 : (info.min + info.max) / 2;
  }
  return q;
}

// Classes differ in fluency and clarity only; other dims carry small noise.
void blobs(std::mt19937_64& rng, int per_class, double gap, double noise, double jitter,
           std::vector<QualityVector>& pos, std::vector<QualityVector>& neg) {
  std::normal_distribution<double> n01(0, 1);
  for (int k = 0; k < per_class; ++k)
    for (int cls = 0; cls < 2; ++cls) {
      QualityVector q = mid_vector();
      for (std::size_t i = 0; i < kNumCriteria; ++i)
        if (!criteria_table()[i].binary && i != 9 && i != 10) q.values[i] += jitter * n01(rng);
      double s = cls == 0 ? gap : -gap;
      q[Criterion::kFluency] = 3 + s + noise * n01(rng);
      q[Criterion::kClarity] = 3 + s + noise * n01(rng);
      (cls == 0 ? pos : neg).push_back(q);
    }
}

double accuracy(const selection::SvmModel& m, const std::vector<QualityVector>& pos,
                const std::vector<QualityVector>& neg) {
  int ok = 0;
  for (const auto& q : pos) ok += m.decision(q) > 0;
  for (const auto& q : neg) ok += m.decision(q) < 0;
  return static_cast<double>(ok) / static_cast<double>(pos.size() + neg.size());
}

Failures svm_suite() {
  Failures f;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<QualityVector> pos, neg;
    blobs(rng, 25, 1.0, 0.2, 0.01, pos, neg);
    selection::SvmTrainingReport report;
    auto m = selection::train_svm(pos, neg, {}, &report);
    f.expect(report.training_accuracy == 1.0 && accuracy(m, pos, neg) == 1.0, "separable set not fit exactly");

    // Ranking invariance under positive scaling of (w, b).
    std::vector<QANugget> ns;
    std::vector<QualityVector> vs;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      QANugget n;
      n.nugget_id = "n" + std::to_string(100 + i);
      ns.push_back(n);
      vs.push_back(i % 2 ? pos[i] : neg[i]);
    }
    auto base = selection::rank_dogmatiq(ns, vs, m);
    for (double c : {0.01, 0.5, 3.7, 1e3}) {
      auto scaled = m;
      for (auto& w : scaled.weights) w *= c;
      scaled.bias *= c;
      f.expect(selection::rank_dogmatiq(ns, vs, scaled) == base, "scaling by " + num(c) + " changed the ranking");
    }

    // Standardization moments on non-constant dims.
    std::vector<QualityVector> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    auto st = selection::fit_standardizer(all);
    for (std::size_t k = 0; k < kNumCriteria; ++k) {
      double mean = 0, var = 0, n = static_cast<double>(all.size());
      bool flat = std::all_of(all.begin(), all.end(), [&](const QualityVector& q) { return q.values[k] == all[0].values[k]; });
      if (flat) continue;
      for (const auto& q : all) mean += (q.values[k] - st.means[k]) / st.scales[k];
      mean /= n;
      for (const auto& q : all) {
        double z = (q.values[k] - st.means[k]) / st.scales[k];
        var += (z - mean) * (z - mean);
      }
      var /= n;
      f.expect(std::abs(mean) < 1e-9 && std::abs(var - 1.0) < 1e-6, "standardized moments off on dim " + std::to_string(k));
    }
  }

  // 20-point instances with two informative dims against the grid oracle.
  for (std::uint64_t seed = 100; seed < 300; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<QualityVector> pos, neg;
    blobs(rng, 10, 0.75, 0.4, 0.0, pos, neg);
    std::vector<std::pair<double, double>> p2, n2;
    for (const auto& q : pos) p2.emplace_back(q[Criterion::kFluency], q[Criterion::kClarity]);
    for (const auto& q : neg) n2.emplace_back(q[Criterion::kFluency], q[Criterion::kClarity]);
    double best = oracle::grid_linear_accuracy(p2, n2);
    double got = accuracy(selection::train_svm(pos, neg), pos, neg);
    f.expect(got >= best - 0.05, "seed " + std::to_string(seed) + ": " + num(got) + " vs grid " + num(best));
  }
  return f;
}

// ---------------------------------------------------------------- 5
QANugget or_nugget(const std::string& topic, const std::string& id) {
  QANugget n;
  n.nugget_id = id;
  n.topic_id = topic;
  n.question = "Q?";
  n.answers = {{"a", {"d1"}}};
  n.provenance.member_question_texts = {"Q?"};
  n.provenance.grounding_doc_count = 1;
  return n;
}

NuggetBank bank_of(const std::string& topic, std::vector<QANugget> selected) {
  NuggetBank b;
  b.topic_id = topic;
  b.method = SelectionMethod::kCommon;
  b.config_fingerprint = "fp";
  for (std::size_t i = 0; i < selected.size(); ++i) selected[i].provenance.selection_rank = static_cast<int>(i + 1);
  b.selected = selected;
  b.candidates = selected;
  return b;
}

Failures aggregation_and_recall() {
  Failures f;
  using V = std::vector<bool>;
  f.expect(fold_aggregator(Aggregator::kOr, V{true}) && !fold_aggregator(Aggregator::kOr, V{false}), "OR singletons");
  f.expect(fold_aggregator(Aggregator::kAnd, V{true}) && !fold_aggregator(Aggregator::kAnd, V{false}), "AND singletons");
  for (int mask = 0; mask < 4; ++mask) {
    V v = {(mask & 1) != 0, (mask & 2) != 0};
    f.expect(fold_aggregator(Aggregator::kOr, v) == (v[0] || v[1]), "OR table row " + std::to_string(mask));
    f.expect(fold_aggregator(Aggregator::kAnd, v) == (v[0] && v[1]), "AND table row " + std::to_string(mask));
  }
  std::mt19937 rng(5);
  for (int i = 0; i < 1000; ++i) {
    V v(1 + rng() % 8), neg;
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = rng() & 1;
    for (bool b : v) neg.push_back(!b);
    f.expect(fold_aggregator(Aggregator::kOr, v) == !fold_aggregator(Aggregator::kAnd, neg), "De Morgan");
  }

  std::vector<QANugget> twenty;
  for (int i = 0; i < 20; ++i) twenty.push_back(or_nugget("T1", "n" + std::to_string(100 + i)));
  auto b = bank_of("T1", twenty);
  auto with = [&](int addressed) {
    JudgmentSet s;
    for (int i = 0; i < 20; ++i) s.entries[{"run", "T1", b.selected[static_cast<std::size_t>(i)].nugget_id}] = {{}, i < addressed};
    return s;
  };
  f.expect(std::abs(eval::nugget_recall("run", b, with(3)) - 0.15) < 1e-15, "3 of 20 is not 0.15");
  f.expect(eval::nugget_recall("run", b, with(0)) == 0.0, "recall lower bound");
  f.expect(eval::nugget_recall("run", b, with(20)) == 1.0, "recall upper bound");

  // Run r has a report for T1 only: zero-fill counts T2 as 0, skip drops it.
  std::vector<NuggetBank> banks = {bank_of("T1", {or_nugget("T1", "a")}), bank_of("T2", {or_nugget("T2", "b")})};
  std::vector<Report> reports = {{"r", "T1", {{"a", {}}}}, {"s", "T1", {{"none", {}}}}, {"s", "T2", {{"a", {}}}}};
  JudgmentSet js;
  js.entries[{"r", "T1", "a"}] = {{true}, true};
  js.entries[{"s", "T1", "a"}] = {{false}, false};
  js.entries[{"s", "T2", "b"}] = {{true}, true};
  DiagnosticLog log;
  auto zero = eval::build_leaderboard(reports, banks, js, eval::MissingPolicy::kZero, "z", log);
  auto skip = eval::build_leaderboard(reports, banks, js, eval::MissingPolicy::kSkip, "s", log);
  auto row = [](const eval::Leaderboard& lb, const std::string& id) {
    return *std::find_if(lb.rows.begin(), lb.rows.end(), [&](const auto& r) { return r.run_id == id; });
  };
  f.expect(row(zero, "r").per_topic.at("T2") == 0.0 && row(zero, "r").macro_recall == 0.5, "zero-fill");
  f.expect(row(skip, "r").macro_recall == 1.0, "skip policy");
  f.expect(row(zero, "s").macro_recall == 0.5, "run with both topics");
  return f;
}

// ---------------------------------------------------------------- 6
std::vector<std::vector<int>> random_prefs(std::mt19937_64& rng, int n, int m) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (auto& p : out) {
    p.resize(static_cast<std::size_t>(m));
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
  }
  return out;
}

Failures stable_matching() {
  Failures f;
  std::mt19937_64 rng(606);
  for (int t = 0; t < 500; ++t) {
    bool square = t % 2 == 0;
    int n = 1 + static_cast<int>(rng() % 6), m = square ? n : 1 + static_cast<int>(rng() % 6);
    auto pp = random_prefs(rng, n, m), rp = random_prefs(rng, m, n);
    auto match = align::deferred_acceptance(pp, rp);
    f.expect(!oracle::has_blocking_pair(pp, rp, match), "blocking pair in profile " + std::to_string(t));
    std::set<int> used;
    int matched = 0;
    for (int r : match)
      if (r >= 0) {
        ++matched;
        f.expect(used.insert(r).second, "receiver matched twice");
      }
    f.expect(matched == std::min(n, m), "complete lists must match min(n, m) pairs");
    if (square && n <= 4) {
      auto all = oracle::all_stable_matchings(pp, rp);
      f.expect(std::find(all.begin(), all.end(), match) != all.end(), "result not among enumerated stable matchings");
      for (const auto& other : all)
        for (int p = 0; p < n; ++p) {
          auto rank = [&](int r) { return std::find(pp[p].begin(), pp[p].end(), r) - pp[p].begin(); };
          f.expect(rank(match[p]) <= rank(other[p]), "not proposer-optimal");
        }
    }
  }
  return f;
}

// ---------------------------------------------------------------- 7
void run_flow(const clikit::Workspace& ws, const std::string& parallelism, Failures& f) {
  std::vector<std::string> g = {"--parallelism", parallelism};
  auto step = [&](std::vector<std::string> args) {
    auto r = ws.run(args, g);
    f.expect(r.code == 0, "step " + args[0] + " exited " + std::to_string(r.code) + ": " + r.err);
  };
  auto lb = [&](const char* label) { return (ws.out() / "eval" / label / "leaderboard.csv").string(); };
  step({"generate", "--methods", "common,sample"});
  step({"train-svm"});
  step({"generate"});
  step({"evaluate"});
  step({"correlate", "--reference", lb("gold"), "--candidate", lb("dogmatiq"), "--candidate", lb("common"),
        "--candidate", lb("sample")});
}

void audit_tree(const fs::path& banks_dir, int cap, Failures& f) {
  int seen = 0;
  for (const auto& e : fs::recursive_directory_iterator(banks_dir)) {
    if (!e.is_regular_file()) continue;
    for (const auto& bank : pipeline::load_banks(e.path())) {
      ++seen;
      for (const auto& v : audit_bank(bank, cap)) f.expect(false, e.path().filename().string() + ": " + v);
      f.expect(bank.selected.size() <= 20, "bank over the default cap of 20");
    }
  }
  f.expect(seen > 0, "no banks under " + banks_dir.string());
}

// Refined answers come from the merged nugget of the same id, and merging
// conserves both candidate count and grounding documents.
void audit_lineage(const fs::path& out, Failures& f) {
  for (const auto& e : fs::directory_iterator(out / "work")) {
    auto cands = io::read_jsonl<CandidateNugget>(e.path() / "candidates.jsonl");
    auto merged = io::read_jsonl<QANugget>(e.path() / "merged.jsonl");
    std::set<std::string> cand_docs, merged_docs;
    int members = 0;
    for (const auto& c : cands)
      for (const auto& a : c.answers) cand_docs.insert(a.doc_ids.begin(), a.doc_ids.end());
    std::map<std::string, const QANugget*> by_id;
    for (const auto& m : merged) {
      members += m.provenance.cluster_size;
      for (const auto& d : grounding_docs(m.answers)) merged_docs.insert(d);
      by_id[m.nugget_id] = &m;
    }
    auto topic = e.path().filename().string();
    f.expect(members == static_cast<int>(cands.size()), topic + ": cluster sizes do not sum to the candidate count");
    f.expect(cand_docs == merged_docs, topic + ": merging changed the grounding documents");
    for (const auto& b : fs::directory_iterator(out / "banks")) {
      auto path = b.path() / (topic + ".jsonl");
      if (!fs::exists(path)) continue;
      for (const auto& bank : pipeline::load_banks(path))
        for (const auto& n : bank.candidates) {
          auto it = by_id.find(n.nugget_id);
          if (it == by_id.end()) {
            f.expect(false, n.nugget_id + " has no merged ancestor");
            continue;
          }
          for (const auto& a : n.answers)
            f.expect(std::find(it->second->answers.begin(), it->second->answers.end(), a) != it->second->answers.end(),
                     n.nugget_id + " gained an answer during refinement");
        }
    }
  }
}

Failures end_to_end() {
  Failures f;
  auto golden = clikit::tree(clikit::fixture("e2e") / "golden");
  f.expect(!golden.empty(), "golden outputs missing");
  auto cfg = pipeline::load_config(clikit::fixture("e2e") / "config.json");
  for (const auto& [role, p] : cfg.providers)
    f.expect(p.kind == providers::ProviderKind::kMock, "provider " + role + " is not a mock");

  std::vector<std::map<std::string, std::string>> trees;
  for (const char* p : {"1", "4", "1", "4"}) {
    clikit::Workspace ws("e2e");
    run_flow(ws, p, f);
    auto t = clikit::tree(ws.out());
    t.erase("run_manifest.json");
    trees.push_back(t);
    audit_tree(ws.out() / "banks", cfg.cap, f);
    audit_lineage(ws.out(), f);
    auto manifest = ws.manifest();
    for (const auto& [cmd, body] : manifest.at("commands").items())
      if (body.contains("providers"))
        for (const auto& [role, s] : body.at("providers").items())
          f.expect(s.at("failed_requests").get<int>() == 0, cmd + "/" + role + " had failed requests");
  }
  for (std::size_t i = 0; i < trees.size(); ++i) {
    f.expect(trees[i] == trees[0], "run " + std::to_string(i) + " differs from run 0");
    for (const auto& [path, bytes] : golden) {
      auto it = trees[i].find(path);
      f.expect(it != trees[i].end() && it->second == bytes, "golden mismatch: " + path);
    }
    f.expect(trees[i].size() == golden.size(), "output file set differs from golden");
  }
  return f;
}

// ---------------------------------------------------------------- 8
Failures format_conformance() {
  Failures f;
  for (const auto& bad : testkit::roundtrip_failures(8080, 1000)) f.expect(false, "round trip: " + bad);

  ScoreMatrix m{"x", {"r,1", "r2"}, {"T1", "T2"}, {{0.25, std::nullopt}, {0.5, 1.0}}};
  f.expect(io::dump_scores_csv(m) == "run_id,T1,T2,macro\n\"r,1\",0.25,,0.25\nr2,0.5,1,0.75\n", "scores.csv bytes");
  auto lb = eval::leaderboard_from_scores("x", {"T1", "T2"},
                                          {{"b", 0, {{"T1", 0.5}, {"T2", 0.25}}}, {"a", 0, {{"T1", 1.0}}}});
  f.expect(eval::dump_leaderboard_csv(lb) == "run_id,macro,T1,T2\na,1,1,\nb,0.375,0.5,0.25\n", "leaderboard bytes");
  f.expect(eval::parse_leaderboard_csv(eval::dump_leaderboard_csv(lb), "x").rows == lb.rows, "leaderboard parse");

  // The shipped goldens follow the same contracts.
  auto gold_dir = clikit::fixture("e2e") / "golden" / "eval" / "gold";
  auto lb_text = clikit::slurp(gold_dir / "leaderboard.csv"), sc_text = clikit::slurp(gold_dir / "scores.csv");
  f.expect(lb_text.rfind("run_id,macro,T1,T2\n", 0) == 0, "golden leaderboard header");
  f.expect(sc_text.rfind("run_id,T1,T2,macro\n", 0) == 0, "golden scores header");
  f.expect(eval::dump_leaderboard_csv(eval::parse_leaderboard_csv(lb_text, "gold")) == lb_text,
           "golden leaderboard does not re-serialize byte for byte");
  return f;
}

// ---------------------------------------------------------------- 9
// Counts provider_error diagnostics and failed requests of one command.
void check_command(const clikit::Workspace& ws, const std::string& cmd, Failures& f, int& injected) {
  int diagnosed = 0;
  auto path = ws.out() / "diagnostics" / (cmd + ".jsonl");
  if (fs::exists(path))
    io::for_each_line(io::read_file(path), [&](std::string_view line, std::size_t) {
      diagnosed += Json::parse(line).at("code") == "provider_error";
    });
  int failed = 0;
  const auto manifest = ws.manifest();
  for (const auto& [role, s] : manifest.at("commands").at(cmd).at("providers").items())
    failed += s.at("failed_requests").get<int>();
  f.expect(diagnosed == failed, cmd + ": " + std::to_string(diagnosed) + " provider_error diagnostics vs " +
                                    std::to_string(failed) + " failed requests");
  injected += failed;
}

Failures dropped_items() {
  Failures f;
  int injected = 0;
  auto faulty = [](const clikit::Workspace& ws, std::uint64_t seed) {
    auto cfg = Json::parse(clikit::slurp(ws.config()));
    for (const char* role : {"default"}) {
      cfg["providers"][role]["fail_rate"] = 0.1;
      cfg["providers"][role]["fail_seed"] = seed;
      cfg["providers"][role]["max_retries"] = 0;
    }
    clikit::spit(ws.config(), cfg.dump(2));
  };
  for (std::uint64_t seed : {1, 2, 3}) {
    // Each command runs in a fresh output directory so no stage output is reused
    // and every diagnostic belongs to a request made by that command.
    clikit::Workspace train("faults_train");
    faulty(train, seed);
    f.expect(train.run({"generate", "--methods", "common,sample"}).code == 0, "generate (common,sample)");
    check_command(train, "generate", f, injected);
    audit_tree(train.out() / "banks", 5, f);
    f.expect(train.run({"train-svm"}).code == 0, "train-svm");
    check_command(train, "train-svm", f, injected);

    clikit::Workspace full("faults_full");
    faulty(full, seed + 100);
    auto cfg = Json::parse(clikit::slurp(full.config()));
    cfg["paths"]["svm_model"] = (train.out() / "svm_model.json").string();
    clikit::spit(full.config(), cfg.dump(2));
    f.expect(full.run({"generate"}).code == 0, "generate (all methods)");
    check_command(full, "generate", f, injected);
    audit_tree(full.out() / "banks", 5, f);
    f.expect(full.run({"evaluate"}).code == 0, "evaluate");
    check_command(full, "evaluate", f, injected);
  }
  f.expect(injected > 0, "no failures were injected");
  return f;
}

struct Check {
  int id;
  const char* name;
  double budget_s;
  std::function<Failures()> run;
};

}  // namespace

int main() {
  const std::vector<Check> criteria = {
      {1, "statistics oracle suite", 10, statistics_oracles},
      {2, "WPA contract", 5, wpa_contract},
      {3, "clustering equivalence", 5, clustering_equivalence},
      {4, "SVM suite", 30, svm_suite},
      {5, "aggregation and recall semantics", 2, aggregation_and_recall},
      {6, "stable matching", 10, stable_matching},
      {7, "end-to-end mock reproduction", 30, end_to_end},
      {8, "format conformance", 10, format_conformance},
      {9, "determinism under dropped items", 60, dropped_items},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Failures f;
    try {
      f = c.run();
    } catch (const std::exception& e) {
      f.expect(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= c.budget_s) f.expect(false, "runtime " + num(secs) + " s over budget");
    bool ok = f.empty();
    failed += !ok;
    std::printf("criterion %d: %s  %s (%.2f s, budget %.0f s)\n", c.id, ok ? "PASS" : "FAIL", c.name, secs, c.budget_s);
    for (std::size_t i = 0; i < f.items.size() && i < 5; ++i) std::printf("    %s\n", f.items[i].c_str());
    if (f.items.size() > 5) std::printf("    ... %zu more\n", f.items.size() - 5);
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
