#include "nuggetkit/cli.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nuggetkit/alignment.hpp"
#include "nuggetkit/pipeline.hpp"
#include "nuggetkit/text.hpp"

namespace nuggetkit {

namespace {

namespace fs = std::filesystem;
using namespace pipeline;

struct Globals {
  std::string config = "nuggetkit.json";
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
  bool dry_run = false;
  std::string output;
};

PipelineConfig load(const Globals& g, bool config_optional = false) {
  PipelineConfig cfg;
  if (config_optional && !fs::exists(g.config)) {
    cfg.paths.output = "out";
  } else {
    cfg = load_config(g.config);
  }
  if (!g.output.empty()) cfg.paths.output = g.output;
  if (g.seed) cfg.seed = *g.seed;
  if (g.parallelism) cfg.parallelism = *g.parallelism;
  if (g.dry_run) cfg.dry_run = true;
  cfg.check();
  return cfg;
}

std::vector<SelectionMethod> parse_methods(const std::string& list) {
  std::vector<SelectionMethod> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!text::trim(item).empty()) out.push_back(parse_selection_method(text::trim(item)));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void print_generate(const GenerateReport& r, const PipelineConfig& cfg, ProviderSet& providers, std::ostream& out) {
  for (const auto& [topic, c] : r.topics) {
    out << topic << ": " << c.status << " documents=" << c.documents_processed << " candidates=" << c.candidates
        << " edges=" << c.verified_edges << "/" << c.edges << " clusters=" << c.clusters << " refined=" << c.refined;
    for (const auto& [m, n] : c.selected) out << " " << m << "=" << n;
    if (!c.reused.empty()) {
      out << " reused=";
      for (std::size_t i = 0; i < c.reused.size(); ++i) out << (i ? "," : "") << c.reused[i];
    }
    if (!c.error.empty()) out << " error=\"" << c.error << "\"";
    out << "\n";
  }
  for (const auto& [code, n] : r.diagnostics.by_code()) out << "diagnostic " << code << ": " << n << "\n";
  if (cfg.dry_run) out << "provider calls (dry run): " << providers.stats_json().dump() << "\n";
}

void write_out(const fs::path& path, const std::string& content, std::ostream& out) {
  io::write_file_atomic(path, content);
  out << "wrote " << path.string() << "\n";
}

std::vector<Report> load_reports(const PipelineConfig& cfg) {
  if (cfg.paths.reports.empty() || !fs::exists(cfg.paths.reports))
    throw ContractError("paths.reports is not set or does not exist");
  return io::read_jsonl<Report>(cfg.paths.reports);
}

std::string label_for(const fs::path& banks, const std::string& label) {
  if (!label.empty()) return label;
  auto p = banks.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return fs::is_directory(p) ? p.filename().string() : p.stem().string();
}

std::vector<align::Item> items_of(const NuggetBank& bank) {
  std::vector<align::Item> out;
  for (const auto& n : bank.selected.empty() ? bank.candidates : bank.selected) out.push_back({n.nugget_id, n.question});
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Question-answer nugget banks for report evaluation", "nuggetkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline configuration (JSON)");
  app.add_option("--seed", g.seed, "Seed for the sample method and SVM training");
  app.add_option("--parallelism", g.parallelism, "Worker threads per level")->check(CLI::PositiveNumber);
  app.add_option("--output", g.output, "Output directory (overrides paths.output)");
  app.add_flag("--dry-run", g.dry_run, "Count provider calls without making them");

  std::function<int()> action;

  auto* validate = app.add_subcommand("validate", "Check the configuration and input collection");
  validate->callback([&] {
    action = [&] {
      auto cfg = load(g);
      for (auto [name, p] : {std::pair{"reports", &cfg.paths.reports}, std::pair{"gold_bank", &cfg.paths.gold_bank},
                             std::pair{"uninformative_pattern_file", &cfg.uninformative_pattern_file}})
        if (!p->empty() && !fs::exists(*p)) throw ContractError(std::string(name) + " does not exist: " + p->string());
      auto topics = io::read_jsonl<Topic>(cfg.paths.topics);
      auto documents = io::read_jsonl<Document>(cfg.paths.documents);
      auto rankings = io::read_jsonl<RetrievalRanking>(cfg.paths.ranking);
      auto report = validate_collection(topics, documents, rankings);
      for (const auto& d : report.diagnostics) out << d.kind << " " << d.subject << ": " << d.detail << "\n";
      out << (report.ok() ? "ok" : "invalid") << ": " << topics.size() << " topics, " << documents.size()
          << " documents, " << rankings.size() << " rankings\n";
      return report.ok() ? kExitOk : kExitConfig;
    };
  });

  std::string methods;
  std::optional<int> top_k, cap;
  std::optional<double> threshold;
  bool skip_verify = false, stage1_only = false;
  std::string pattern_file;
  auto* generate = app.add_subcommand("generate", "Run stages 1, 2A, 2B and 3 for every topic");
  generate->add_option("--methods", methods, "Comma-separated subset of dogmatiq,common,sample");
  generate->add_option("--top-k-docs", top_k)->check(CLI::PositiveNumber);
  generate->add_option("--cosine-threshold", threshold);
  generate->add_flag("--skip-llm-verify", skip_verify, "Accept every pair above the threshold");
  generate->add_option("--uninformative-pattern-file", pattern_file);
  generate->add_option("--cap", cap)->check(CLI::PositiveNumber);
  generate->add_flag("--stage1-only", stage1_only);
  generate->callback([&] {
    action = [&] {
      auto cfg = load(g);
      if (!methods.empty()) cfg.methods = parse_methods(methods);
      if (top_k) cfg.top_k_docs = *top_k;
      if (threshold) cfg.cluster.cosine_threshold = *threshold;
      if (skip_verify) cfg.cluster.verify_with_llm = false;
      if (!pattern_file.empty()) cfg.uninformative_pattern_file = pattern_file;
      if (cap) cfg.cap = *cap;
      cfg.check();
      ProviderSet providers(cfg);
      auto report = cmd_generate(cfg, providers, {stage1_only});
      print_generate(report, cfg, providers, out);
      return report.exit_code;
    };
  });

  std::string method;
  auto* select = app.add_subcommand("select", "Re-run selection from existing refined outputs");
  select->add_option("--method", method, "dogmatiq, common or sample")->required();
  select->add_option("--cap", cap)->check(CLI::PositiveNumber);
  select->callback([&] {
    action = [&] {
      auto cfg = load(g);
      cfg.methods = {parse_selection_method(method)};
      if (cap) cfg.cap = *cap;
      cfg.check();
      ProviderSet providers(cfg);
      auto report = cmd_select(cfg, providers);
      print_generate(report, cfg, providers, out);
      return report.exit_code;
    };
  });

  auto* train = app.add_subcommand("train-svm", "Train the quality-criteria ranker from the gold bank");
  train->callback([&] {
    action = [&] {
      auto cfg = load(g);
      ProviderSet providers(cfg);
      auto r = cmd_train_svm(cfg, providers);
      out << "positives=" << r.positives << " negatives=" << r.negatives << " epochs=" << r.training.epochs
          << " converged=" << (r.training.converged ? "yes" : "no")
          << " training_accuracy=" << fmt(r.training.training_accuracy) << "\n";
      if (!cfg.dry_run) out << "wrote " << cfg.model_path().string() << "\n";
      return kExitOk;
    };
  });

  std::string banks, judgments, format = "native", policy, label, out_path;
  auto add_eval_options = [&](CLI::App* sub, bool with_judgments) {
    sub->add_option("--banks", banks, "Bank file or directory of bank files");
    if (with_judgments) {
      sub->add_option("--judgments", judgments, "Judgments to import instead of judging");
      sub->add_option("--format", format, "native or argue_export");
    }
    sub->add_option("--label", label);
    sub->add_option("--out", out_path);
  };

  auto* judge = app.add_subcommand("judge", "Judge every report against the selected nuggets");
  add_eval_options(judge, false);
  judge->callback([&] {
    action = [&] {
      if (banks.empty()) throw ContractError("judge needs --banks");
      auto cfg = load(g);
      ProviderSet providers(cfg);
      auto bank_set = load_banks(banks);
      auto reports = load_reports(cfg);
      DiagnosticLog log;
      auto& provider = providers.chat("judge");
      auto set = eval::judge_reports(reports, bank_set, provider, provider.identity(), log, cfg.parallelism);
      for (const auto& [code, n] : log.by_code()) out << "diagnostic " << code << ": " << n << "\n";
      if (cfg.dry_run) {
        out << "provider calls (dry run): " << providers.stats_json().dump() << "\n";
        return kExitOk;
      }
      fs::path dest = out_path.empty() ? cfg.paths.output / "eval" / label_for(banks, label) / "judgments.jsonl"
                                       : fs::path(out_path);
      write_out(dest, io::dump_judgments(set), out);
      return kExitOk;
    };
  });

  auto scored = [&](const PipelineConfig& cfg, DiagnosticLog& log) {
    if (banks.empty() || judgments.empty()) throw ContractError("--banks and --judgments are required");
    auto bank_set = load_banks(banks);
    auto reports = load_reports(cfg);
    auto set = eval::import_judgments(fs::path(judgments), eval::parse_judgment_format(format), log,
                                      eval::aggregator_lookup(bank_set));
    return eval::build_leaderboard(reports, bank_set, set, cfg.missing_policy, label_for(banks, label), log);
  };

  auto* score = app.add_subcommand("score", "Per-topic nugget recall from judgments (scores.csv)");
  add_eval_options(score, true);
  score->add_option("--missing-policy", policy, "zero or skip");
  score->callback([&] {
    action = [&] {
      auto cfg = load(g);
      if (!policy.empty()) cfg.missing_policy = eval::parse_missing_policy(policy);
      DiagnosticLog log;
      auto lb = scored(cfg, log);
      fs::path dest = out_path.empty() ? cfg.paths.output / "eval" / lb.label / "scores.csv" : fs::path(out_path);
      write_out(dest, io::dump_scores_csv(lb.to_matrix()), out);
      return kExitOk;
    };
  });

  auto* leaderboard = app.add_subcommand("leaderboard", "Macro-averaged leaderboard from judgments");
  add_eval_options(leaderboard, true);
  leaderboard->add_option("--missing-policy", policy, "zero or skip");
  leaderboard->callback([&] {
    action = [&] {
      auto cfg = load(g);
      if (!policy.empty()) cfg.missing_policy = eval::parse_missing_policy(policy);
      DiagnosticLog log;
      auto lb = scored(cfg, log);
      fs::path dir = out_path.empty() ? cfg.paths.output / "eval" / lb.label : fs::path(out_path);
      write_out(dir / "leaderboard.csv", eval::dump_leaderboard_csv(lb), out);
      write_out(dir / "leaderboard.json", eval::leaderboard_json(lb).dump(2) + "\n", out);
      for (const auto& r : lb.rows) out << r.run_id << " " << fmt(r.macro_recall) << "\n";
      return kExitOk;
    };
  });

  auto* evaluate = app.add_subcommand("evaluate", "Judge (or import), score and build leaderboards");
  add_eval_options(evaluate, true);
  evaluate->add_option("--missing-policy", policy, "zero or skip");
  evaluate->callback([&] {
    action = [&] {
      auto cfg = load(g);
      if (!policy.empty()) cfg.missing_policy = eval::parse_missing_policy(policy);
      EvaluateOptions opts;
      if (!banks.empty()) opts.banks = banks;
      opts.label = label;
      if (!judgments.empty()) opts.judgments = judgments;
      opts.judgment_format = eval::parse_judgment_format(format);
      if (!out_path.empty()) opts.out_dir = out_path;
      ProviderSet providers(cfg);
      auto r = cmd_evaluate(cfg, providers, opts);
      for (const auto& lb : r.leaderboards) {
        out << lb.label << ":";
        for (const auto& row : lb.rows) out << " " << row.run_id << "=" << fmt(row.macro_recall);
        out << "\n";
      }
      for (const auto& [code, n] : r.diagnostics.by_code()) out << "diagnostic " << code << ": " << n << "\n";
      if (cfg.dry_run) out << "provider calls (dry run): " << providers.stats_json().dump() << "\n";
      return r.exit_code;
    };
  });

  // Comparison commands work from leaderboard CSVs; the config only supplies
  // the WPA settings and the output directory.
  std::string reference;
  std::vector<std::string> candidates;
  std::optional<int> min_topics;
  std::optional<double> alpha;
  auto add_wpa = [&](CLI::App* sub) {
    sub->add_option("--min-topics", min_topics)->check(CLI::PositiveNumber);
    sub->add_option("--alpha", alpha);
  };
  auto wpa_of = [&](PipelineConfig& cfg) {
    if (min_topics) cfg.wpa.min_topics = *min_topics;
    if (alpha) cfg.wpa.alpha = *alpha;
    cfg.wpa.check();
    return cfg.wpa;
  };

  auto* correlate = app.add_subcommand("correlate", "rho, tau, weighted tau and WPA against a reference");
  correlate->add_option("--reference", reference)->required();
  correlate->add_option("--candidate", candidates)->required();
  correlate->add_option("--out", out_path);
  add_wpa(correlate);
  correlate->callback([&] {
    action = [&] {
      auto cfg = load(g, true);
      auto wcfg = wpa_of(cfg);
      auto ref = eval::read_leaderboard_csv(reference);
      std::vector<stats::CorrelationReport> reports;
      for (const auto& c : candidates) reports.push_back(stats::correlation_report(ref, eval::read_leaderboard_csv(c), wcfg));
      for (const auto& r : reports)
        out << r.candidate_label << " vs " << r.reference_label << ": n=" << r.n_runs << " rho=" << fmt(r.rho)
            << " tau=" << fmt(r.tau) << " wtau=" << fmt(r.weighted_tau) << " wpa=" << fmt(r.wpa) << "\n";
      fs::path dest = out_path.empty() ? cfg.paths.output / "compare" / "correlation.csv" : fs::path(out_path);
      write_out(dest, stats::correlation_csv(reports), out);
      return kExitOk;
    };
  });

  std::string runs_file;
  auto* subset = app.add_subcommand("subset", "Correlation deltas on a subset of runs");
  subset->add_option("--reference", reference)->required();
  subset->add_option("--candidate", candidates)->required()->expected(1);
  subset->add_option("--runs-file", runs_file, "One run_id per line")->required();
  subset->add_option("--out", out_path);
  add_wpa(subset);
  subset->callback([&] {
    action = [&] {
      auto cfg = load(g, true);
      auto wcfg = wpa_of(cfg);
      std::vector<std::string> runs;
      io::for_each_line(io::read_file(runs_file), [&](std::string_view line, std::size_t) {
        if (line.front() != '#') runs.emplace_back(line);
      });
      auto r = stats::subset_report(eval::read_leaderboard_csv(reference), eval::read_leaderboard_csv(candidates[0]),
                                    runs, wcfg);
      out << "delta rho=" << fmt(r.d_rho) << " tau=" << fmt(r.d_tau) << " wtau=" << fmt(r.d_weighted_tau)
          << " wpa=" << fmt(r.d_wpa) << "\n";
      fs::path dest = out_path.empty() ? cfg.paths.output / "compare" / "subset.csv" : fs::path(out_path);
      write_out(dest, stats::subset_csv(r), out);
      return kExitOk;
    };
  });

  std::vector<std::string> boards;
  std::string out_dir;
  auto* heatmap = app.add_subcommand("heatmap", "Pairwise rho and tau between several leaderboards");
  heatmap->add_option("--leaderboards", boards)->required();
  heatmap->add_option("--out-dir", out_dir);
  heatmap->callback([&] {
    action = [&] {
      auto cfg = load(g, true);
      std::vector<eval::Leaderboard> lbs;
      for (const auto& b : boards) lbs.push_back(eval::read_leaderboard_csv(b));
      auto m = stats::cross_set_matrix(lbs);
      fs::path dir = out_dir.empty() ? cfg.paths.output / "compare" : fs::path(out_dir);
      write_out(dir / "heatmap_rho.csv", stats::heatmap_csv(m.labels, m.rho), out);
      write_out(dir / "heatmap_tau.csv", stats::heatmap_csv(m.labels, m.tau), out);
      return kExitOk;
    };
  });

  std::string level = "system";
  auto* scatter = app.add_subcommand("scatter", "Plot-ready score pairs (candidate x, reference y)");
  scatter->add_option("--reference", reference)->required();
  scatter->add_option("--candidate", candidates)->required()->expected(1);
  scatter->add_option("--level", level, "system or topic");
  scatter->add_option("--out", out_path);
  scatter->callback([&] {
    action = [&] {
      auto cfg = load(g, true);
      auto lvl = stats::parse_scatter_level(level);
      auto rows = stats::scatter_data(eval::read_leaderboard_csv(reference), eval::read_leaderboard_csv(candidates[0]),
                                      lvl);
      fs::path dest = out_path.empty() ? cfg.paths.output / "compare" / ("scatter_" + level + ".csv") : fs::path(out_path);
      write_out(dest, stats::scatter_csv(rows, lvl), out);
      return kExitOk;
    };
  });

  std::string gold, gen;
  double clear = align::kDefaultClearThreshold;
  auto* alignc = app.add_subcommand("align", "Stable matching of a gold bank against a generated bank");
  alignc->add_option("--gold", gold)->required();
  alignc->add_option("--gen", gen)->required();
  alignc->add_option("--threshold", clear, "Provisional-clear similarity");
  alignc->add_option("--out-dir", out_dir);
  alignc->callback([&] {
    action = [&] {
      auto cfg = load(g, true);
      ProviderSet providers(cfg);
      std::map<std::string, NuggetBank> gen_by_topic;
      for (auto& b : load_banks(gen)) gen_by_topic[b.topic_id] = std::move(b);
      auto gold_banks = load_banks(gold);
      std::sort(gold_banks.begin(), gold_banks.end(), [](auto& a, auto& b) { return a.topic_id < b.topic_id; });
      std::string listing, jsonl;
      for (const auto& gb : gold_banks) {
        auto it = gen_by_topic.find(gb.topic_id);
        if (it == gen_by_topic.end()) {
          out << gb.topic_id << ": no generated bank\n";
          continue;
        }
        auto gi = items_of(gb), ni = items_of(it->second);
        auto res = align::stable_match(gi, ni, providers.embed());
        listing += "TOPIC " + gb.topic_id + "\n\n" + align::alignment_report(res.pairs, gi, ni, clear);
        if (!res.unmatched_gold.empty()) {
          listing += "UNMATCHED GOLD (" + std::to_string(res.unmatched_gold.size()) + ")\n";
          for (const auto& id : res.unmatched_gold) listing += "  " + id + "\n";
          listing += "\n";
        }
        for (const auto& p : res.pairs) {
          Json j{{"topic_id", gb.topic_id}};
          j.update(Json(p));
          jsonl += io::dump_line(j) + "\n";
        }
        out << gb.topic_id << ": " << res.pairs.size() << " pairs, " << res.unmatched_gold.size()
            << " unmatched gold\n";
      }
      fs::path dir = out_dir.empty() ? cfg.paths.output / "align" : fs::path(out_dir);
      write_out(dir / "alignment.txt", listing, out);
      write_out(dir / "alignment.jsonl", jsonl, out);
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream help;
    app.exit(e, help, err);
    return kExitConfig;
  }

  try {
    return action ? action() : kExitConfig;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StatsError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartial;
  }
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace nuggetkit
