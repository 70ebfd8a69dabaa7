// End-to-end orchestration behind the command line: configuration, stage
// composition with fingerprint-based reuse, evaluation and comparison runs.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "nuggetkit/clusterstage.hpp"
#include "nuggetkit/core.hpp"
#include "nuggetkit/evalharness.hpp"
#include "nuggetkit/providers.hpp"
#include "nuggetkit/rankstats.hpp"
#include "nuggetkit/selectstage.hpp"
#include "nuggetkit/serialize.hpp"

namespace nuggetkit::pipeline {

namespace fs = std::filesystem;

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

struct Paths {
  fs::path topics;
  fs::path documents;
  fs::path ranking;
  fs::path reports;
  fs::path gold_bank;
  fs::path svm_model;  // empty: <output>/svm_model.json
  fs::path output = "out";
};

/// Provider roles a configuration can assign separately. Missing roles fall
/// back to "default".
inline constexpr std::string_view kProviderRoles[] = {"generate", "embed", "verify", "refine", "criteria", "judge"};

struct PipelineConfig {
  std::map<std::string, providers::ProviderConfig> providers;
  Paths paths;
  int top_k_docs = 50;
  std::size_t max_chunk_chars = 24000;
  int max_pairs = 6;
  cluster::ClusterConfig cluster;
  fs::path uninformative_pattern_file;
  std::vector<SelectionMethod> methods = {SelectionMethod::kDogmatiq, SelectionMethod::kCommon,
                                          SelectionMethod::kSample};
  int cap = kDefaultSelectionCap;
  selection::SvmHyperparams svm;
  selection::MiningConfig mining;
  eval::MissingPolicy missing_policy = eval::MissingPolicy::kZero;
  stats::WpaConfig wpa;
  std::uint64_t seed = 0;
  int parallelism = 1;
  bool dry_run = false;

  const providers::ProviderConfig& provider(std::string_view role) const;
  fs::path model_path() const { return paths.svm_model.empty() ? paths.output / "svm_model.json" : paths.svm_model; }
  /// Throws ContractError on invalid values.
  void check() const;
  /// Canonical JSON form; paths are written as given after resolution.
  Json to_json() const;
  std::string fingerprint() const;
};

/// Parse a JSON configuration. `${NAME}` in any string is replaced by the
/// environment variable NAME (unset is an error). Relative paths resolve
/// against the configuration file's directory.
PipelineConfig load_config(const fs::path& path);
PipelineConfig parse_config(std::string_view content, const fs::path& base_dir);

struct Collection {
  std::vector<Topic> topics;
  std::vector<Document> documents;
  std::vector<RetrievalRanking> rankings;
};

Collection load_collection(const PipelineConfig& cfg);

/// One provider instance per role, created on first use.
class ProviderSet {
 public:
  explicit ProviderSet(const PipelineConfig& cfg) : cfg_(cfg) {}
  providers::ChatProvider& chat(std::string_view role);
  providers::EmbeddingProvider& embed();
  /// Stats per role that has been used.
  Json stats_json() const;
  std::uint64_t failed_requests() const;

 private:
  const PipelineConfig& cfg_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<providers::ChatProvider>> chat_;
  std::unique_ptr<providers::EmbeddingProvider> embed_;
};

struct GenerateOptions {
  bool stage1_only = false;
};

struct TopicCounts {
  std::string status = "ok";
  std::string error;
  int documents_processed = 0;
  int candidates = 0;
  int edges = 0;
  int verified_edges = 0;
  int clusters = 0;
  int refined = 0;
  std::map<std::string, int> selected;
  std::vector<std::string> reused;  // stages served from earlier outputs
};

struct GenerateReport {
  std::map<std::string, TopicCounts> topics;
  DiagnosticLog diagnostics;
  int exit_code = kExitOk;
};

/// Stages 1 -> 2A -> 2B -> 3 for every topic. Writes intermediates under
/// <output>/work/<topic>/, banks under <output>/banks/<method>/<topic>.jsonl
/// and the run manifest. A topic whose stage fails is reported and skipped.
GenerateReport cmd_generate(const PipelineConfig& cfg, ProviderSet& providers, const GenerateOptions& opts);

/// Selection only, from refined (and for dogmatiq, criteria) outputs.
GenerateReport cmd_select(const PipelineConfig& cfg, ProviderSet& providers);

struct TrainReport {
  int positives = 0;
  int negatives = 0;
  selection::SvmTrainingReport training;
  DiagnosticLog diagnostics;
};

/// Gold bank nuggets as positives, mined generated nuggets as negatives.
TrainReport cmd_train_svm(const PipelineConfig& cfg, ProviderSet& providers);

/// A bank file, or every *.jsonl in a directory (sorted by name).
std::vector<NuggetBank> load_banks(const fs::path& path);

struct EvaluateOptions {
  std::optional<fs::path> banks;  // default: every method under <output>/banks plus the gold bank
  std::string label;              // default: the banks directory name
  std::optional<fs::path> judgments;
  eval::JudgmentFormat judgment_format = eval::JudgmentFormat::kNative;
  std::optional<fs::path> out_dir;  // default: <output>/eval/<label>
};

struct EvaluateReport {
  std::vector<eval::Leaderboard> leaderboards;
  DiagnosticLog diagnostics;
  int exit_code = kExitOk;
};

EvaluateReport cmd_evaluate(const PipelineConfig& cfg, ProviderSet& providers, const EvaluateOptions& opts);

/// Append (or replace) one command's section of <output>/run_manifest.json.
void update_manifest(const PipelineConfig& cfg, const std::string& command, Json section);

/// Current UTC time as an ISO 8601 string.
std::string utc_now();

}  // namespace nuggetkit::pipeline
