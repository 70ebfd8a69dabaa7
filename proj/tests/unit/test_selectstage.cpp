#include <cmath>
#include <random>

#include "doctest.h"
#include "nuggetkit/selectstage.hpp"
#include "support/oracles.hpp"
#include "support/testkit.hpp"

using namespace nuggetkit;
using namespace nuggetkit::selection;
using providers::ChatRequest;
using providers::TemplateId;

namespace {

const Topic kTopic{"T1", "Liberty", "Describe the statue", Persona{"learn", "student", "reader", "plain", "history"}};

QANugget nugget(std::string id, int cluster = 1, int grounding = 1) {
  QANugget n;
  n.nugget_id = std::move(id);
  n.topic_id = "T1";
  n.question = "How tall is it?";
  for (int i = 0; i < grounding; ++i) n.answers.push_back({"answer " + std::to_string(i), {"d" + std::to_string(i)}});
  n.provenance.member_question_texts.assign(static_cast<std::size_t>(cluster), n.question);
  n.provenance.cluster_size = cluster;
  n.provenance.grounding_doc_count = grounding;
  return n;
}

std::vector<std::string> ids(const std::vector<QANugget>& ns) {
  std::vector<std::string> out;
  for (const auto& n : ns) out.push_back(n.nugget_id);
  return out;
}

QualityVector mid_vector() {
  QualityVector q;
  for (std::size_t i = 0; i < kNumCriteria; ++i) {
    const auto& info = criteria_table()[i];
    q.values[i] = info.binary ? 0.0 : (info.min + info.max) / 2;
  }
  return q;
}

// Two Gaussian blobs that differ only in fluency and clarity.
void blobs(std::mt19937_64& rng, int per_class, double gap, double noise, std::vector<QualityVector>& pos,
           std::vector<QualityVector>& neg) {
  std::normal_distribution<double> n01(0, 1);
  for (int k = 0; k < per_class; ++k) {
    for (int cls = 0; cls < 2; ++cls) {
      QualityVector q = mid_vector();
      for (std::size_t i = 0; i < kNumCriteria; ++i)
        if (!criteria_table()[i].binary && i != 9 && i != 10) q.values[i] += 0.01 * n01(rng);
      double s = cls == 0 ? gap : -gap;
      q[Criterion::kFluency] = 3 + s + noise * n01(rng);
      q[Criterion::kClarity] = 3 + s + noise * n01(rng);
      (cls == 0 ? pos : neg).push_back(q);
    }
  }
}

double accuracy(const SvmModel& m, const std::vector<QualityVector>& pos, const std::vector<QualityVector>& neg) {
  int ok = 0;
  for (const auto& q : pos) ok += m.decision(q) > 0;
  for (const auto& q : neg) ok += m.decision(q) < 0;
  return static_cast<double>(ok) / static_cast<double>(pos.size() + neg.size());
}

// Ranking by explicit decision values and a plain comparison sort.
std::vector<std::string> decision_sort(const std::vector<QANugget>& ns, const std::vector<QualityVector>& vs,
                                       const SvmModel& m) {
  std::vector<std::pair<double, std::string>> keyed;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    double d = m.bias;
    for (std::size_t k = 0; k < kNumCriteria; ++k)
      d += m.weights[k] * (vs[i].values[k] - m.feature_means[k]) / m.feature_scales[k];
    keyed.emplace_back(-d, ns[i].nugget_id);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  for (auto& [_, id] : keyed) out.push_back(id);
  return out;
}

SvmModel identity_model() {
  SvmModel m;
  m.feature_means.fill(0.0);
  m.feature_scales.fill(1.0);
  return m;
}

}  // namespace

TEST_SUITE("selectstage") {
  TEST_CASE("text statistics") {
    CHECK(reading_level("Is it big? Yes.") == 4.0);
    double hard = reading_level(
        "Notwithstanding considerable institutional reluctance, administrators subsequently authorized comprehensive "
        "infrastructural rehabilitation throughout metropolitan territories.");
    CHECK(hard == 13.0);
    CHECK(complexity("Short one.") == 1.0);
    CHECK(complexity("Because it rained, the game, which was long, stopped although fans stayed.") > 2.0);
    CHECK(complexity("a, b, c, d, e, f, g, h, i, j, k.") == 6.0);
  }

  TEST_CASE("criteria: prompted values pass through, statistics are local") {
    testkit::Scripted p([](const ChatRequest&, const std::string&) { return "1.0"; });
    DiagnosticLog log;
    auto n = nugget("a");
    auto q = score_criteria(n, kTopic, *p, log);
    CHECK(*p.calls == 17);
    for (std::size_t i = 2; i < kNumCriteria; ++i) CHECK(q.values[i] == 1.0);
    CHECK(q[Criterion::kReadingLevel] == reading_level(criteria_text(n)));
    CHECK(q[Criterion::kComplexity] == complexity(criteria_text(n)));
    CHECK(q.in_range());
  }

  TEST_CASE("criteria: out-of-scale scores are clamped") {
    testkit::Scripted p([](const ChatRequest&, const std::string&) { return "0.5"; });
    DiagnosticLog log;
    auto q = score_criteria(nugget("a"), kTopic, *p, log);
    CHECK(q[Criterion::kFluency] == 1.0);
    CHECK(q[Criterion::kGoalMatch] == 0.5);
  }

  TEST_CASE("criteria: failures fall back to midpoints, vitality to zero") {
    testkit::Scripted p([](const ChatRequest&, const std::string&) { return "no idea"; });
    DiagnosticLog log;
    auto q = score_criteria(nugget("a"), kTopic, *p, log);
    CHECK(q[Criterion::kVitality] == 0.0);
    CHECK(q[Criterion::kFluency] == 3.0);
    CHECK(q[Criterion::kScopeMatch] == 0.5);
    CHECK(log.size() == 17);
  }

  TEST_CASE("common: size, then grounding, then id") {
    std::vector<QANugget> ns = {nugget("c", 3, 2), nugget("b", 3, 4), nugget("a", 5, 1)};
    CHECK(rank_common(ns) == std::vector<std::string>{"a", "b", "c"});
    std::vector<QANugget> flat = {nugget("z"), nugget("m"), nugget("b")};
    CHECK(rank_common(flat) == std::vector<std::string>{"b", "m", "z"});
  }

  TEST_CASE("common: matches a sort oracle and ignores input order") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 50; ++t) {
      std::vector<QANugget> ns;
      for (int i = 0; i < 12; ++i)
        ns.push_back(nugget("n" + std::to_string(rng() % 1000) + "_" + std::to_string(i), 1 + rng() % 3, 1 + rng() % 3));
      auto keyed = ns;
      std::stable_sort(keyed.begin(), keyed.end(), [](const QANugget& a, const QANugget& b) {
        return std::make_tuple(-a.provenance.cluster_size, -a.provenance.grounding_doc_count, a.nugget_id) <
               std::make_tuple(-b.provenance.cluster_size, -b.provenance.grounding_doc_count, b.nugget_id);
      });
      CHECK(rank_common(ns) == ids(keyed));
      std::shuffle(ns.begin(), ns.end(), rng);
      CHECK(rank_common(ns) == ids(keyed));
    }
  }

  TEST_CASE("dogmatiq: single-feature model orders by that feature then id") {
    auto m = identity_model();
    m.weights[static_cast<std::size_t>(Criterion::kVitality)] = 1.0;
    std::vector<QANugget> ns = {nugget("c"), nugget("a"), nugget("b")};
    std::vector<QualityVector> vs(3, mid_vector());
    vs[0][Criterion::kVitality] = 1.0;
    CHECK(rank_dogmatiq(ns, vs, m) == std::vector<std::string>{"c", "a", "b"});
    auto flat = identity_model();
    CHECK(rank_dogmatiq(ns, vs, flat) == std::vector<std::string>{"a", "b", "c"});
  }

  TEST_CASE("dogmatiq: random models match the decision-sort oracle") {
    testkit::Gen g(8);
    for (int t = 0; t < 50; ++t) {
      SvmModel m;
      for (std::size_t k = 0; k < kNumCriteria; ++k) {
        m.weights[k] = g.real(-2, 2);
        m.feature_means[k] = g.real(0, 3);
        m.feature_scales[k] = g.real(0.5, 2);
      }
      m.bias = g.real(-1, 1);
      std::vector<QANugget> ns;
      std::vector<QualityVector> vs;
      for (int i = 0; i < 15; ++i) {
        ns.push_back(nugget("n" + std::to_string(i)));
        vs.push_back(g.quality());
      }
      CHECK(rank_dogmatiq(ns, vs, m) == decision_sort(ns, vs, m));
      auto scaled = m;
      for (auto& w : scaled.weights) w *= 3.7;
      scaled.bias *= 3.7;
      CHECK(rank_dogmatiq(ns, vs, scaled) == rank_dogmatiq(ns, vs, m));
    }
  }

  TEST_CASE("sample: deterministic per seed and a permutation") {
    std::vector<QANugget> ns;
    for (int i = 0; i < 10; ++i) ns.push_back(nugget("n" + std::to_string(i)));
    auto a = rank_sample(ns, 42), b = rank_sample(ns, 42);
    CHECK(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == ids(ns));
    CHECK(rank_sample(ns, 43) != a);
  }

  TEST_CASE("sample: six orderings of three are uniform") {
    std::map<std::vector<std::size_t>, int> counts;
    const int draws = 60000;
    for (int s = 0; s < draws; ++s) ++counts[seeded_permutation(3, static_cast<std::uint64_t>(s))];
    REQUIRE(counts.size() == 6);
    double chi2 = 0, expected = draws / 6.0;
    for (const auto& [perm, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    // Upper 0.001 point of chi-square with 5 degrees of freedom.
    CHECK(chi2 < 20.515);
  }

  TEST_CASE("cap semantics") {
    std::vector<QANugget> small, large;
    for (int i = 0; i < 15; ++i) small.push_back(nugget("s" + std::to_string(100 + i)));
    for (int i = 0; i < 50; ++i) large.push_back(nugget("l" + std::to_string(100 + i), 1 + i % 4));
    SelectionConfig cfg;
    auto b1 = select(small, cfg, nullptr, "fp");
    CHECK(b1.selected.size() == 15);
    auto b2 = select(large, cfg, nullptr, "fp");
    CHECK(b2.selected.size() == 20);
    CHECK(b2.candidates.size() == 50);
    CHECK(audit_bank(b1).empty());
    CHECK(audit_bank(b2).empty());
  }

  TEST_CASE("common and sample differ but both audit cleanly") {
    std::vector<QANugget> ns;
    for (int i = 0; i < 40; ++i) ns.push_back(nugget("n" + std::to_string(100 + i), 1 + i % 5, 1 + i % 3));
    SelectionConfig common{SelectionMethod::kCommon, 20, 0}, sample{SelectionMethod::kSample, 20, 9};
    auto a = select(ns, common, nullptr, "fp"), b = select(ns, sample, nullptr, "fp");
    CHECK(ids(a.selected) != ids(b.selected));
    CHECK(audit_bank(a).empty());
    CHECK(audit_bank(b).empty());
  }

  TEST_CASE("dogmatiq selection requires a model and criteria") {
    SelectionConfig cfg{SelectionMethod::kDogmatiq, 5, 0};
    CHECK_THROWS_AS(select({nugget("a")}, cfg, nullptr, "fp"), ContractError);
    auto m = identity_model();
    CHECK_THROWS_AS(select({nugget("a")}, cfg, &m, "fp"), ContractError);
    SelectionConfig bad{SelectionMethod::kCommon, 0, 0};
    CHECK_THROWS_AS(bad.check(), ContractError);
  }
}

TEST_SUITE("svm") {
  TEST_CASE("separable blobs are fit exactly") {
    std::mt19937_64 rng(1);
    std::vector<QualityVector> pos, neg;
    blobs(rng, 25, 1.0, 0.2, pos, neg);
    SvmTrainingReport report;
    auto m = train_svm(pos, neg, {}, &report);
    CHECK(report.training_accuracy == 1.0);
    CHECK(accuracy(m, pos, neg) == 1.0);
  }

  TEST_CASE("swapping labels negates the decision function") {
    std::mt19937_64 rng(2);
    std::vector<QualityVector> pos, neg;
    blobs(rng, 10, 0.6, 0.5, pos, neg);
    auto m = train_svm(pos, neg), r = train_svm(neg, pos);
    std::vector<QualityVector> probe;
    blobs(rng, 10, 0.3, 1.0, probe, probe);
    for (const auto& q : probe) CHECK(m.decision(q) == doctest::Approx(-r.decision(q)).epsilon(1e-6));
  }

  // Mildly overlapping classes. Under heavy overlap the hinge optimum can sit
  // well below the 0/1 optimum found by exhaustive search, for any hinge solver.
  TEST_CASE("small sets come within 5% of the best linear separator") {
    for (std::uint64_t seed = 10; seed < 60; ++seed) {
      std::mt19937_64 rng(seed);
      std::vector<QualityVector> pos, neg;
      blobs(rng, 10, 0.75, 0.4, pos, neg);
      std::vector<std::pair<double, double>> p2, n2;
      for (const auto& q : pos) p2.emplace_back(q[Criterion::kFluency], q[Criterion::kClarity]);
      for (const auto& q : neg) n2.emplace_back(q[Criterion::kFluency], q[Criterion::kClarity]);
      double best = oracle::grid_linear_accuracy(p2, n2);
      // Only the two informative features are passed to keep the comparison like for like.
      std::vector<QualityVector> pos2 = pos, neg2 = neg;
      for (auto* set : {&pos2, &neg2})
        for (auto& q : *set)
          for (std::size_t i = 0; i < kNumCriteria; ++i)
            if (i != 9 && i != 10) q.values[i] = mid_vector().values[i];
      auto m = train_svm(pos2, neg2);
      CHECK(accuracy(m, pos2, neg2) >= best - 0.05);
    }
  }

  TEST_CASE("standardizer gives zero mean and unit variance") {
    testkit::Gen g(4);
    std::vector<QualityVector> data;
    for (int i = 0; i < 40; ++i) data.push_back(g.quality());
    auto s = fit_standardizer(data);
    for (std::size_t k = 0; k < kNumCriteria; ++k) {
      double mean = 0, var = 0;
      for (const auto& q : data) mean += (q.values[k] - s.means[k]) / s.scales[k];
      mean /= static_cast<double>(data.size());
      for (const auto& q : data) {
        double z = (q.values[k] - s.means[k]) / s.scales[k];
        var += (z - mean) * (z - mean);
      }
      var /= static_cast<double>(data.size());
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }

  TEST_CASE("degenerate training sets are rejected") {
    std::vector<QualityVector> one = {mid_vector()};
    CHECK_THROWS_AS(train_svm(one, {}), ContractError);
    CHECK_THROWS_AS(train_svm(one, one), ContractError);
  }

  TEST_CASE("training is deterministic for a seed") {
    std::mt19937_64 rng(5);
    std::vector<QualityVector> pos, neg;
    blobs(rng, 12, 0.4, 0.8, pos, neg);
    SvmHyperparams h;
    h.seed = 77;
    CHECK(train_svm(pos, neg, h) == train_svm(pos, neg, h));
  }
}

TEST_SUITE("selectstage") {
  TEST_CASE("negative mining drops paraphrases of positives") {
    auto pos = nugget("p1");
    pos.question = "How tall is the statue?";
    auto same = nugget("g1"), other = nugget("g2");
    same.question = "How tall is the statue?";
    other.question = "Who paid for the pedestal?";
    auto emb = testkit::hashing_embedder();
    DiagnosticLog log;
    std::vector<QANugget> positives = {pos}, generated = {same, other};
    auto neg = mine_negatives(positives, generated, *emb, nullptr, {}, log);
    REQUIRE(neg.size() == 1);
    CHECK(neg[0].nugget_id == "g2");

    testkit::Scripted says_no([](const ChatRequest&, const std::string&) { return "NO"; });
    CHECK(mine_negatives(positives, generated, *emb, &*says_no, {}, log).size() == 2);

    MiningConfig tight;
    tight.max_ratio = 1;
    std::vector<QANugget> many;
    for (int i = 0; i < 4; ++i) {
      auto n = nugget("m" + std::to_string(i));
      n.question = "Unrelated question number " + std::to_string(i) + " about canals";
      many.push_back(n);
    }
    CHECK(mine_negatives(positives, many, *emb, nullptr, tight, log).size() == 1);
  }
}
