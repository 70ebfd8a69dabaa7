// Python bindings for the statistics, clustering, matching, SVM and recall
// primitives, plus an in-process entry point to the command line.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nuggetkit/alignment.hpp"
#include "nuggetkit/cli.hpp"
#include "nuggetkit/clusterstage.hpp"
#include "nuggetkit/evalharness.hpp"
#include "nuggetkit/rankstats.hpp"
#include "nuggetkit/svm.hpp"

namespace py = pybind11;
using namespace nuggetkit;

namespace {

QualityVector to_quality(const std::vector<double>& v) {
  if (v.size() != kNumCriteria) throw ContractError("quality vectors have " + std::to_string(kNumCriteria) + " entries");
  QualityVector q;
  std::copy(v.begin(), v.end(), q.values.begin());
  return q;
}

std::vector<QualityVector> to_qualities(const std::vector<std::vector<double>>& rows) {
  std::vector<QualityVector> out;
  for (const auto& r : rows) out.push_back(to_quality(r));
  return out;
}

Aggregator to_aggregator(const std::string& s) {
  if (s == "OR" || s == "or") return Aggregator::kOr;
  if (s == "AND" || s == "and") return Aggregator::kAnd;
  throw ContractError("aggregator must be OR or AND, got " + s);
}

ScoreMatrix to_matrix(const std::string& label, const std::vector<std::string>& runs,
                      const std::vector<std::string>& topics,
                      const std::vector<std::vector<std::optional<double>>>& scores) {
  ScoreMatrix m{label, runs, topics, scores};
  m.check();
  return m;
}

stats::WpaConfig wpa_config(double alpha, int min_topics, const std::string& zero_handling) {
  stats::WpaConfig c;
  c.alpha = alpha;
  c.min_topics = min_topics;
  c.zero_handling = stats::parse_zero_handling(zero_handling);
  c.check();
  return c;
}

// Recall of one run on one topic: each entry is (aggregator, per-answer verdicts).
double recall(const std::vector<std::pair<std::string, std::vector<bool>>>& nuggets) {
  NuggetBank bank;
  bank.topic_id = "T";
  JudgmentSet judgments;
  for (std::size_t i = 0; i < nuggets.size(); ++i) {
    QANugget n;
    n.nugget_id = "n" + std::to_string(i);
    n.topic_id = "T";
    n.aggregator = to_aggregator(nuggets[i].first);
    bank.selected.push_back(n);
    const auto& v = nuggets[i].second;
    judgments.entries[{"run", "T", n.nugget_id}] = {v, fold_aggregator(n.aggregator, v)};
  }
  return eval::nugget_recall("run", bank, judgments);
}

}  // namespace

PYBIND11_MODULE(_nuggetkit, m) {
  m.doc() = "Question-answer nugget banks: statistics, clustering, matching and ranking primitives";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<StatsError>(m, "StatsError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("spearman_rho", [](std::vector<double> x, std::vector<double> y) { return stats::spearman_rho(x, y); });
  m.def("kendall_tau", [](std::vector<double> x, std::vector<double> y) { return stats::kendall_tau(x, y); });
  m.def("weighted_kendall_tau",
        [](std::vector<double> x, std::vector<double> y) { return stats::weighted_kendall_tau(x, y); });
  m.def(
      "wilcoxon",
      [](std::vector<double> a, std::vector<double> b, double alpha, int min_topics, const std::string& zeros) {
        auto r = stats::wilcoxon_signed_rank(a, b, wpa_config(alpha, min_topics, zeros));
        py::dict d;
        d["outcome"] = std::string(stats::to_string(r.outcome));
        d["p_value"] = r.p_value;
        d["w_plus"] = r.w_plus;
        d["n_nonzero"] = r.n_nonzero;
        d["exact"] = r.exact;
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05, py::arg("min_topics") = 5, py::arg("zero_handling") = "zsplit");
  m.def(
      "wpa",
      [](const std::vector<std::string>& runs, const std::vector<std::string>& topics,
         const std::vector<std::vector<std::optional<double>>>& reference,
         const std::vector<std::vector<std::optional<double>>>& candidate, double alpha, int min_topics,
         const std::string& zeros) {
        int pairs = 0;
        double v = stats::wpa(to_matrix("reference", runs, topics, reference), to_matrix("candidate", runs, topics, candidate),
                              wpa_config(alpha, min_topics, zeros), &pairs);
        return py::make_tuple(v, pairs);
      },
      py::arg("runs"), py::arg("topics"), py::arg("reference"), py::arg("candidate"), py::arg("alpha") = 0.05,
      py::arg("min_topics") = 5, py::arg("zero_handling") = "zsplit",
      "Wilcoxon paired accuracy and the number of run pairs it used. Rows are runs, columns topics; None marks a gap.");

  m.def(
      "connected_components",
      [](const std::vector<std::string>& ids, const std::vector<std::pair<std::string, std::string>>& edges) {
        std::vector<cluster::ParaphraseEdge> e;
        for (const auto& [a, b] : edges) e.push_back({std::min(a, b), std::max(a, b), 1.0, true});
        return cluster::connected_components(ids, e);
      },
      py::arg("ids"), py::arg("edges"));

  m.def("deferred_acceptance", &align::deferred_acceptance, py::arg("proposer_prefs"), py::arg("receiver_prefs"));
  m.def(
      "stable_match",
      [](const std::vector<std::string>& gold, const std::vector<std::string>& gen,
         const std::vector<std::vector<double>>& cosine) {
        auto r = align::stable_match(gold, gen, cosine);
        py::list pairs;
        for (const auto& p : r.pairs) pairs.append(py::make_tuple(p.gold_id, p.gen_id, p.cosine));
        return py::make_tuple(pairs, r.unmatched_gold);
      },
      py::arg("gold_ids"), py::arg("gen_ids"), py::arg("cosine"),
      "Gold-proposing stable matching over a gold x generated cosine table.");

  py::class_<selection::SvmModel>(m, "SvmModel")
      .def_property_readonly("weights",
                             [](const selection::SvmModel& s) { return std::vector<double>(s.weights.begin(), s.weights.end()); })
      .def_readonly("bias", &selection::SvmModel::bias)
      .def("decision", [](const selection::SvmModel& s, const std::vector<double>& x) { return s.decision(to_quality(x)); });
  m.def(
      "train_svm",
      [](const std::vector<std::vector<double>>& pos, const std::vector<std::vector<double>>& neg, double c,
         std::uint64_t seed) {
        selection::SvmHyperparams h;
        h.c = c;
        h.seed = seed;
        auto p = to_qualities(pos), n = to_qualities(neg);
        return selection::train_svm(p, n, h);
      },
      py::arg("positives"), py::arg("negatives"), py::arg("c") = 1.0, py::arg("seed") = 0);
  m.attr("NUM_CRITERIA") = kNumCriteria;

  m.def(
      "fold", [](const std::string& aggregator, const std::vector<bool>& verdicts) {
        return fold_aggregator(to_aggregator(aggregator), verdicts);
      },
      py::arg("aggregator"), py::arg("verdicts"));
  m.def("recall", &recall, py::arg("nuggets"), "Fraction of (aggregator, verdicts) nuggets that are addressed.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "nuggetkit");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a nuggetkit command in-process; returns (exit_code, stdout, stderr).");
}
