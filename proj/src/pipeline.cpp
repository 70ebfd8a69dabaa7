#include "nuggetkit/pipeline.hpp"

#include <cstdlib>
#include <ctime>
#include <iostream>
#include <regex>
#include <set>

#include "nuggetkit/genstage.hpp"
#include "nuggetkit/hashing.hpp"
#include "nuggetkit/refinestage.hpp"

namespace nuggetkit::pipeline {

namespace {

// ---------------------------------------------------------------------------
// Config parsing

Json interpolate_env(const Json& j) {
  if (j.is_string()) {
    static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
    const auto& s = j.get_ref<const std::string&>();
    std::string out;
    auto begin = std::sregex_iterator(s.begin(), s.end(), var);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      const char* value = std::getenv(m[1].str().c_str());
      if (!value) throw ContractError("config references unset environment variable " + m[1].str());
      out.append(s, last, static_cast<std::size_t>(m.position(0)) - last);
      out += value;
      last = static_cast<std::size_t>(m.position(0) + m.length(0));
    }
    out.append(s, last);
    return out;
  }
  if (j.is_object()) {
    Json out = Json::object();
    for (auto& [k, v] : j.items()) out[k] = interpolate_env(v);
    return out;
  }
  if (j.is_array()) {
    Json out = Json::array();
    for (const auto& v : j) out.push_back(interpolate_env(v));
    return out;
  }
  return j;
}

// Strict object reader: every key must be consumed, types must match.
class Section {
 public:
  Section(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ContractError(where_ + " must be an object");
  }
  ~Section() = default;

  template <class T>
  bool get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return false;
    try {
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ContractError(where_ + "." + key + " has the wrong type");
    }
    return true;
  }
  bool path(const char* key, fs::path& out, const fs::path& base) {
    std::string s;
    if (!get(key, s)) return false;
    out = resolve(s, base);
    return true;
  }
  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }
  void done() const {
    for (auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ContractError("unknown config key " + where_ + "." + k);
  }
  static fs::path resolve(const std::string& s, const fs::path& base) {
    if (s.empty()) return {};
    fs::path p(s);
    return p.is_absolute() ? p : (base / p).lexically_normal();
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

providers::ProviderConfig parse_provider(const Json& j, const std::string& where, const fs::path& base) {
  providers::ProviderConfig c;
  Section s(j, where);
  std::string kind;
  if (s.get("kind", kind)) {
    try {
      c.kind = providers::parse_provider_kind(kind);
    } catch (const FormatError& e) {
      throw ContractError(where + ": " + e.what());
    }
  }
  s.get("endpoint", c.endpoint);
  s.get("model_name", c.model_name);
  s.get("auth_env_var", c.auth_env_var);
  s.get("rate_limit", c.rate_limit);
  s.get("max_retries", c.max_retries);
  s.get("retry_backoff_ms", c.retry_backoff_ms);
  s.get("timeout_s", c.timeout_s);
  s.get("embedding_dim", c.embedding_dim);
  s.get("fail_rate", c.fail_rate);
  s.get("fail_seed", c.fail_seed);
  fs::path p;
  if (s.path("cache_dir", p, base)) c.cache_dir = p.string();
  if (s.path("mock_canned_path", p, base)) c.mock_canned_path = p.string();
  if (s.path("template_dir", p, base)) c.template_dir = p.string();
  s.done();
  return c;
}

Json provider_json(const providers::ProviderConfig& c) {
  return Json{{"kind", to_string(c.kind)},
              {"endpoint", c.endpoint},
              {"model_name", c.model_name},
              {"auth_env_var", c.auth_env_var},
              {"rate_limit", c.rate_limit},
              {"max_retries", c.max_retries},
              {"retry_backoff_ms", c.retry_backoff_ms},
              {"timeout_s", c.timeout_s},
              {"embedding_dim", c.embedding_dim},
              {"fail_rate", c.fail_rate},
              {"fail_seed", c.fail_seed},
              {"cache_dir", c.cache_dir},
              {"mock_canned_path", c.mock_canned_path},
              {"template_dir", c.template_dir}};
}

// ---------------------------------------------------------------------------
// Stage outputs

Json diagnostic_json(const Diagnostic& d) {
  return Json{{"stage", d.stage}, {"code", d.code}, {"subject", d.subject}, {"message", d.message}};
}

std::string dump_diagnostics(const std::vector<Diagnostic>& items) {
  std::string out;
  for (const auto& d : items) out += io::dump_line(diagnostic_json(d)) + '\n';
  return out;
}

void load_diagnostics(const fs::path& path, DiagnosticLog& log) {
  if (!fs::exists(path)) return;
  io::for_each_line(io::read_file(path), [&](std::string_view line, std::size_t lineno) {
    Json j = io::parse_json_line(line, path.string(), lineno);
    log.add(io::json_string(j, "stage"), io::json_string(j, "code"), io::json_string(j, "subject"),
            io::json_string(j, "message"));
  });
}

// Each stage keeps its outputs plus a `<stage>.fp` stamp written last; the
// outputs are reused only when the stamp matches the current fingerprint.
class StageDir {
 public:
  explicit StageDir(fs::path dir) : dir_(std::move(dir)) {}
  fs::path file(std::string_view name) const { return dir_ / std::string(name); }
  bool fresh(std::string_view stage, const std::string& fp) const {
    auto stamp = stamp_path(stage);
    return fs::exists(stamp) && io::read_file(stamp) == fp;
  }
  void invalidate(std::string_view stage) const {
    fs::create_directories(dir_);
    fs::remove(stamp_path(stage));
  }
  void commit(std::string_view stage, const std::string& fp, const DiagnosticLog& log) const {
    io::write_file_atomic(file(std::string(stage) + ".diagnostics.jsonl"), dump_diagnostics(log.sorted()));
    io::write_file_atomic(stamp_path(stage), fp);
  }
  void reload(std::string_view stage, DiagnosticLog& log) const {
    load_diagnostics(file(std::string(stage) + ".diagnostics.jsonl"), log);
  }

 private:
  fs::path stamp_path(std::string_view stage) const { return dir_ / (std::string(stage) + ".fp"); }
  fs::path dir_;
};

struct CriteriaRow {
  std::string nugget_id;
  QualityVector criteria;
};

void to_json(Json& j, const CriteriaRow& r) { j = Json{{"nugget_id", r.nugget_id}, {"criteria", r.criteria}}; }
void from_json(const Json& j, CriteriaRow& r) {
  r.nugget_id = io::json_string(j, "nugget_id");
  r.criteria = io::json_field(j, "criteria").get<QualityVector>();
}

template <class T>
void write_jsonl(const fs::path& path, const std::vector<T>& items) {
  io::write_file_atomic(path, io::dump_jsonl(std::span<const T>(items)));
}

template <class T>
std::vector<T> read_jsonl_file(const fs::path& path) {
  return io::read_jsonl<T>(path);
}

Json clusters_json(const std::vector<std::vector<std::string>>& clusters) {
  Json out = Json::array();
  for (const auto& c : clusters) out.push_back(c);
  return out;
}

Json stats_json_of(const providers::ProviderStats& s) {
  return Json{{"requests", s.requests},
              {"cache_hits", s.cache_hits},
              {"network_calls", s.network_calls},
              {"failed_requests", s.failed_requests},
              {"dry_run_calls", s.dry_run_calls}};
}

Json diagnostics_summary(const DiagnosticLog& log) {
  Json out = Json::object();
  for (const auto& [code, n] : log.by_code()) out[code] = n;
  return out;
}

std::optional<selection::SvmModel> load_model_if_needed(const PipelineConfig& cfg) {
  bool need = std::find(cfg.methods.begin(), cfg.methods.end(), SelectionMethod::kDogmatiq) != cfg.methods.end();
  if (!need) return std::nullopt;
  if (cfg.model_path().empty() || !fs::exists(cfg.model_path()))
    throw ContractError("the dogmatiq method needs a trained model at '" + cfg.model_path().string() +
                        "'; run train-svm first (or select only common,sample)");
  Json j;
  try {
    j = Json::parse(io::read_file(cfg.model_path()));
    return j.get<selection::SvmModel>();
  } catch (const Json::exception& e) {
    throw ContractError("cannot read SVM model " + cfg.model_path().string() + ": " + e.what());
  }
}

refine::UninformativePattern pattern_of(const PipelineConfig& cfg) {
  if (cfg.uninformative_pattern_file.empty()) return refine::UninformativePattern();
  return refine::UninformativePattern::from_file(cfg.uninformative_pattern_file);
}

// ---------------------------------------------------------------------------
// Per-topic generation

struct TopicInputs {
  const Topic* topic;
  const RetrievalRanking* ranking;
  const std::map<std::string, Document>* documents;
};

struct TopicJob {
  const PipelineConfig& cfg;
  ProviderSet& providers;
  const GenerateOptions& opts;
  bool select_only;
  const refine::UninformativePattern& pattern;
  const selection::SvmModel* model;
};

[[noreturn]] void need_outputs(std::string_view stage) {
  throw StageError("no up-to-date " + std::string(stage) + " outputs; run generate first");
}

std::string stage1_fingerprint(const PipelineConfig& cfg, const TopicInputs& in) {
  Fingerprint fp;
  fp.add("stage", "stage1").add("topic", io::dump_line(Json(*in.topic)));
  int taken = 0;
  for (const auto& e : in.ranking->entries) {
    if (taken++ >= cfg.top_k_docs) break;
    auto it = in.documents->find(e.doc_id);
    if (it == in.documents->end()) {
      fp.add("doc", e.doc_id + ":missing");
    } else {
      fp.add("doc", e.doc_id + ":" + it->second.lang + ":" + sha256_hex(it->second.text));
    }
  }
  fp.add("provider", cfg.provider("generate").identity())
      .add("top_k", static_cast<std::int64_t>(cfg.top_k_docs))
      .add("chunk", static_cast<std::int64_t>(cfg.max_chunk_chars))
      .add("max_pairs", static_cast<std::int64_t>(cfg.max_pairs));
  return fp.hex();
}

std::vector<QANugget> with_criteria(std::vector<QANugget> nuggets, const std::vector<CriteriaRow>& rows) {
  std::map<std::string, QualityVector> by_id;
  for (const auto& r : rows) by_id[r.nugget_id] = r.criteria;
  for (auto& n : nuggets) {
    auto it = by_id.find(n.nugget_id);
    if (it == by_id.end()) throw StageError("no criteria for nugget " + n.nugget_id);
    n.provenance.criteria = it->second;
  }
  return nuggets;
}

void run_topic(const TopicJob& job, const TopicInputs& in, TopicCounts& counts, DiagnosticLog& log) {
  const auto& cfg = job.cfg;
  const auto& topic = *in.topic;
  StageDir dir(cfg.paths.output / "work" / topic.topic_id);

  // Stage 1
  const std::string fp1 = stage1_fingerprint(cfg, in);
  std::vector<gen::DocSummary> summaries;
  std::vector<CandidateNugget> candidates;
  if (dir.fresh("stage1", fp1)) {
    summaries = read_jsonl_file<gen::DocSummary>(dir.file("summaries.jsonl"));
    candidates = read_jsonl_file<CandidateNugget>(dir.file("candidates.jsonl"));
    dir.reload("stage1", log);
    counts.reused.push_back("stage1");
    counts.documents_processed = static_cast<int>(summaries.size());
  } else {
    if (job.select_only) need_outputs("stage1");
    gen::GenConfig gc{cfg.top_k_docs, cfg.max_chunk_chars, cfg.max_pairs, cfg.parallelism};
    DiagnosticLog local;
    auto r = gen::run_stage1(topic, *in.ranking, *in.documents, job.providers.chat("generate"), gc, local);
    summaries = std::move(r.summaries);
    candidates = std::move(r.candidates);
    counts.documents_processed = r.documents_processed;
    log.append(local);
    if (!cfg.dry_run) {
      dir.invalidate("stage1");
      write_jsonl(dir.file("summaries.jsonl"), summaries);
      write_jsonl(dir.file("candidates.jsonl"), candidates);
      dir.commit("stage1", fp1, local);
    }
  }
  counts.candidates = static_cast<int>(candidates.size());
  if (job.opts.stage1_only) return;
  if (candidates.empty()) throw StageError("stage 1 produced no candidate nuggets");

  // Stage 2A
  Fingerprint f2a;
  f2a.add("stage", "stage2a").add("upstream", fp1).add("embed", cfg.provider("embed").identity());
  f2a.add("threshold", cfg.cluster.cosine_threshold).add("verify", std::int64_t{cfg.cluster.verify_with_llm});
  if (cfg.cluster.verify_with_llm) f2a.add("verifier", cfg.provider("verify").identity());
  const std::string fp2a = f2a.hex();
  std::vector<cluster::ParaphraseEdge> edges;
  std::vector<QANugget> merged;
  int clusters = 0;
  if (dir.fresh("stage2a", fp2a)) {
    edges = read_jsonl_file<cluster::ParaphraseEdge>(dir.file("edges.jsonl"));
    merged = read_jsonl_file<QANugget>(dir.file("merged.jsonl"));
    clusters = static_cast<int>(merged.size());
    dir.reload("stage2a", log);
    counts.reused.push_back("stage2a");
  } else {
    if (job.select_only) need_outputs("stage2a");
    auto cc = cfg.cluster;
    cc.parallelism = cfg.parallelism;
    DiagnosticLog local;
    auto* verifier = cc.verify_with_llm ? &job.providers.chat("verify") : nullptr;
    cluster::Stage2aResult r;
    try {
      r = cluster::run_stage2a(candidates, job.providers.embed(), verifier, cc, local);
    } catch (const ProviderError& e) {
      throw StageError(std::string("embedding failed: ") + e.what());
    }
    edges = std::move(r.edges);
    merged = std::move(r.merged);
    clusters = static_cast<int>(r.clusters.size());
    log.append(local);
    if (!cfg.dry_run) {
      dir.invalidate("stage2a");
      write_jsonl(dir.file("edges.jsonl"), edges);
      io::write_file_atomic(dir.file("clusters.json"), clusters_json(r.clusters).dump(2) + "\n");
      write_jsonl(dir.file("merged.jsonl"), merged);
      dir.commit("stage2a", fp2a, local);
    }
  }
  counts.edges = static_cast<int>(edges.size());
  counts.verified_edges =
      static_cast<int>(std::count_if(edges.begin(), edges.end(), [](const auto& e) { return e.verified; }));
  counts.clusters = clusters;

  // Stage 2B
  Fingerprint f2b;
  f2b.add("stage", "stage2b").add("upstream", fp2a).add("refine", cfg.provider("refine").identity());
  f2b.add("pattern", job.pattern.source());
  const std::string fp2b = f2b.hex();
  std::vector<QANugget> refined;
  if (dir.fresh("stage2b", fp2b)) {
    refined = read_jsonl_file<QANugget>(dir.file("refined.jsonl"));
    dir.reload("stage2b", log);
    counts.reused.push_back("stage2b");
  } else {
    if (job.select_only) need_outputs("stage2b");
    DiagnosticLog local;
    refine::RefineConfig rc{job.pattern, cfg.parallelism};
    refined = refine::run_stage2b(merged, topic, job.providers.chat("refine"), rc, local);
    log.append(local);
    if (!cfg.dry_run) {
      dir.invalidate("stage2b");
      write_jsonl(dir.file("refined.jsonl"), refined);
      dir.commit("stage2b", fp2b, local);
    }
  }
  counts.refined = static_cast<int>(refined.size());
  if (refined.empty()) throw StageError("every nugget was culled in refinement");

  // Criteria, only when the SVM ranking needs them.
  std::string fpc;
  std::vector<CriteriaRow> criteria;
  if (job.model) {
    Fingerprint fc;
    fc.add("stage", "criteria").add("upstream", fp2b).add("criteria", cfg.provider("criteria").identity());
    fc.add("statistics", selection::kTextStatisticsId);
    fpc = fc.hex();
    if (dir.fresh("criteria", fpc)) {
      criteria = read_jsonl_file<CriteriaRow>(dir.file("criteria.jsonl"));
      dir.reload("criteria", log);
      counts.reused.push_back("criteria");
    } else {
      if (job.select_only) need_outputs("criteria");
      DiagnosticLog local;
      criteria.resize(refined.size());
      auto& provider = job.providers.chat("criteria");
      parallel_for(refined.size(), cfg.parallelism, [&](std::size_t i) {
        criteria[i] = {refined[i].nugget_id, selection::score_criteria(refined[i], topic, provider, local, 1)};
      });
      log.append(local);
      if (!cfg.dry_run) {
        dir.invalidate("criteria");
        write_jsonl(dir.file("criteria.jsonl"), criteria);
        dir.commit("criteria", fpc, local);
      }
    }
  }

  // Stage 3
  if (cfg.dry_run) return;
  for (auto method : cfg.methods) {
    selection::SelectionConfig sc{method, cfg.cap, cfg.seed};
    Fingerprint fb;
    fb.add("stage", "select").add("method", to_string(method)).add("cap", static_cast<std::int64_t>(cfg.cap));
    std::vector<QANugget> pool = refined;
    if (method == SelectionMethod::kDogmatiq) {
      fb.add("upstream", fpc).add("model", job.model->training_fingerprint);
      pool = with_criteria(std::move(pool), criteria);
    } else {
      fb.add("upstream", fp2b);
      if (method == SelectionMethod::kSample) fb.add("seed", std::to_string(cfg.seed));
    }
    auto bank = selection::select(std::move(pool), sc, job.model, fb.hex());
    bank.topic_id = topic.topic_id;
    auto problems = audit_bank(bank, cfg.cap);
    if (!problems.empty()) throw StageError("bank audit failed: " + problems.front());
    std::vector<NuggetBank> one{bank};
    io::write_file_atomic(cfg.paths.output / "banks" / std::string(to_string(method)) / (topic.topic_id + ".jsonl"),
                          io::dump_banks(one));
    counts.selected[std::string(to_string(method))] = static_cast<int>(bank.selected.size());
  }
}

Json counts_json(const TopicCounts& c) {
  Json j{{"status", c.status}};
  if (!c.error.empty()) j["error"] = c.error;
  j["documents_processed"] = c.documents_processed;
  j["candidates"] = c.candidates;
  j["edges"] = c.edges;
  j["verified_edges"] = c.verified_edges;
  j["clusters"] = c.clusters;
  j["refined"] = c.refined;
  j["selected"] = c.selected;
  j["reused"] = c.reused;
  return j;
}

GenerateReport generate_impl(const PipelineConfig& cfg, ProviderSet& providers, const GenerateOptions& opts,
                             bool select_only, const std::string& command) {
  cfg.check();
  const std::string started = utc_now();
  auto collection = load_collection(cfg);
  auto model = opts.stage1_only ? std::nullopt : load_model_if_needed(cfg);
  auto pattern = pattern_of(cfg);

  std::map<std::string, Document> documents;
  for (const auto& d : collection.documents) documents.emplace(d.doc_id, d);
  std::map<std::string, const RetrievalRanking*> rankings;
  for (const auto& r : collection.rankings) rankings.emplace(r.topic_id, &r);

  std::vector<const Topic*> topics;
  for (const auto& t : collection.topics) topics.push_back(&t);
  std::sort(topics.begin(), topics.end(), [](auto* a, auto* b) { return a->topic_id < b->topic_id; });

  TopicJob job{cfg, providers, opts, select_only, pattern, model ? &*model : nullptr};
  std::vector<TopicCounts> counts(topics.size());
  std::vector<DiagnosticLog> logs(topics.size());
  parallel_for(topics.size(), cfg.parallelism, [&](std::size_t i) {
    auto& c = counts[i];
    try {
      auto it = rankings.find(topics[i]->topic_id);
      if (it == rankings.end()) throw StageError("no retrieval ranking for topic");
      run_topic(job, {topics[i], it->second, &documents}, c, logs[i]);
    } catch (const std::exception& e) {
      c.status = "failed";
      c.error = e.what();
      logs[i].add("topic", "topic_failed", topics[i]->topic_id, e.what());
    }
  });

  GenerateReport report;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    report.topics[topics[i]->topic_id] = counts[i];
    report.diagnostics.append(logs[i]);
    if (counts[i].status != "ok" && !cfg.dry_run) report.exit_code = kExitPartial;
  }
  if (cfg.dry_run) return report;

  Json topics_json = Json::object();
  for (const auto& [id, c] : report.topics) topics_json[id] = counts_json(c);
  fs::create_directories(cfg.paths.output / "diagnostics");
  io::write_file_atomic(cfg.paths.output / "diagnostics" / (command + ".jsonl"),
                        dump_diagnostics(report.diagnostics.sorted()));
  update_manifest(cfg, command,
                  Json{{"started", started},
                       {"finished", utc_now()},
                       {"config_fingerprint", cfg.fingerprint()},
                       {"exit_code", report.exit_code},
                       {"topics", topics_json},
                       {"diagnostics", diagnostics_summary(report.diagnostics)},
                       {"providers", providers.stats_json()}});
  return report;
}

}  // namespace

// ---------------------------------------------------------------------------

const providers::ProviderConfig& PipelineConfig::provider(std::string_view role) const {
  auto it = providers.find(std::string(role));
  if (it != providers.end()) return it->second;
  it = providers.find("default");
  if (it != providers.end()) return it->second;
  static const providers::ProviderConfig fallback{};
  return fallback;
}

void PipelineConfig::check() const {
  gen::GenConfig{top_k_docs, max_chunk_chars, max_pairs, parallelism}.check();
  cluster.check();
  if (cap < 1) throw ContractError("selection cap must be >= 1");
  if (methods.empty()) throw ContractError("at least one selection method is required");
  svm.check();
  wpa.check();
  if (parallelism < 1) throw ContractError("parallelism must be >= 1");
  if (!(mining.prefilter_cosine > 0 && mining.prefilter_cosine <= 1))
    throw ContractError("mining prefilter_cosine must be in (0,1]");
  if (mining.max_ratio < 1) throw ContractError("mining max_ratio must be >= 1");
  for (const auto& [role, p] : providers) {
    if (role != "default" &&
        std::find(std::begin(kProviderRoles), std::end(kProviderRoles), role) == std::end(kProviderRoles))
      throw ContractError("unknown provider role '" + role + "'");
    p.check();
  }
}

Json PipelineConfig::to_json() const {
  Json provs = Json::object();
  for (const auto& [role, p] : providers) provs[role] = provider_json(p);
  Json ms = Json::array();
  for (auto m : methods) ms.push_back(to_string(m));
  return Json{
      {"providers", provs},
      {"paths",
       {{"topics", paths.topics.string()},
        {"documents", paths.documents.string()},
        {"ranking", paths.ranking.string()},
        {"reports", paths.reports.string()},
        {"gold_bank", paths.gold_bank.string()},
        {"svm_model", model_path().string()},
        {"output", paths.output.string()}}},
      {"top_k_docs", top_k_docs},
      {"max_chunk_chars", max_chunk_chars},
      {"max_pairs", max_pairs},
      {"cluster", {{"cosine_threshold", cluster.cosine_threshold}, {"verify_with_llm", cluster.verify_with_llm}}},
      {"refine", {{"uninformative_pattern_file", uninformative_pattern_file.string()}}},
      {"selection", {{"methods", ms}, {"cap", cap}}},
      {"svm", {{"c", svm.c}, {"max_epochs", svm.max_epochs}, {"tolerance", svm.tolerance}}},
      {"mining", {{"prefilter_cosine", mining.prefilter_cosine}, {"max_ratio", mining.max_ratio}}},
      {"evaluation", {{"missing_policy", eval::to_string(missing_policy)}}},
      {"wpa",
       {{"alpha", wpa.alpha},
        {"zero_handling", stats::to_string(wpa.zero_handling)},
        {"min_topics", wpa.min_topics},
        {"exact_max_n", wpa.exact_max_n}}},
      {"seed", seed}};
}

std::string PipelineConfig::fingerprint() const { return sha256_hex(to_json().dump()); }

PipelineConfig parse_config(std::string_view content, const fs::path& base_dir) {
  Json raw;
  try {
    raw = Json::parse(content);
  } catch (const Json::exception& e) {
    throw ContractError(std::string("config is not valid JSON: ") + e.what());
  }
  Json j = interpolate_env(raw);
  PipelineConfig cfg;
  Section top(j, "config");

  if (const Json* p = top.child("providers")) {
    Section ps(*p, "providers");
    for (auto& [role, v] : p->items()) {
      ps.child(role.c_str());
      cfg.providers[role] = parse_provider(v, "providers." + role, base_dir);
    }
    ps.done();
  }
  if (const Json* p = top.child("paths")) {
    Section s(*p, "paths");
    s.path("topics", cfg.paths.topics, base_dir);
    s.path("documents", cfg.paths.documents, base_dir);
    s.path("ranking", cfg.paths.ranking, base_dir);
    s.path("reports", cfg.paths.reports, base_dir);
    s.path("gold_bank", cfg.paths.gold_bank, base_dir);
    s.path("svm_model", cfg.paths.svm_model, base_dir);
    if (!s.path("output", cfg.paths.output, base_dir)) cfg.paths.output = Section::resolve("out", base_dir);
    s.done();
  } else {
    cfg.paths.output = Section::resolve("out", base_dir);
  }

  top.get("top_k_docs", cfg.top_k_docs);
  top.get("max_chunk_chars", cfg.max_chunk_chars);
  top.get("max_pairs", cfg.max_pairs);
  top.get("seed", cfg.seed);
  top.get("parallelism", cfg.parallelism);
  top.get("dry_run", cfg.dry_run);
  if (const Json* p = top.child("cluster")) {
    Section s(*p, "cluster");
    s.get("cosine_threshold", cfg.cluster.cosine_threshold);
    s.get("verify_with_llm", cfg.cluster.verify_with_llm);
    s.done();
  }
  if (const Json* p = top.child("refine")) {
    Section s(*p, "refine");
    s.path("uninformative_pattern_file", cfg.uninformative_pattern_file, base_dir);
    s.done();
  }
  if (const Json* p = top.child("selection")) {
    Section s(*p, "selection");
    std::vector<std::string> methods;
    if (s.get("methods", methods)) {
      cfg.methods.clear();
      for (const auto& m : methods) {
        try {
          cfg.methods.push_back(parse_selection_method(m));
        } catch (const std::exception& e) {
          throw ContractError(std::string("selection.methods: ") + e.what());
        }
      }
    }
    s.get("cap", cfg.cap);
    s.done();
  }
  if (const Json* p = top.child("svm")) {
    Section s(*p, "svm");
    s.get("c", cfg.svm.c);
    s.get("max_epochs", cfg.svm.max_epochs);
    s.get("tolerance", cfg.svm.tolerance);
    s.done();
  }
  if (const Json* p = top.child("mining")) {
    Section s(*p, "mining");
    s.get("prefilter_cosine", cfg.mining.prefilter_cosine);
    s.get("max_ratio", cfg.mining.max_ratio);
    s.done();
  }
  if (const Json* p = top.child("evaluation")) {
    Section s(*p, "evaluation");
    std::string policy;
    if (s.get("missing_policy", policy)) cfg.missing_policy = eval::parse_missing_policy(policy);
    s.done();
  }
  if (const Json* p = top.child("wpa")) {
    Section s(*p, "wpa");
    s.get("alpha", cfg.wpa.alpha);
    std::string zh;
    if (s.get("zero_handling", zh)) cfg.wpa.zero_handling = stats::parse_zero_handling(zh);
    s.get("min_topics", cfg.wpa.min_topics);
    s.get("exact_max_n", cfg.wpa.exact_max_n);
    s.done();
  }
  top.done();
  cfg.check();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::string content;
  try {
    content = io::read_file(path);
  } catch (const std::exception& e) {
    throw ContractError("cannot read config " + path.string() + ": " + e.what());
  }
  auto base = fs::absolute(path).parent_path();
  return parse_config(content, base);
}

Collection load_collection(const PipelineConfig& cfg) {
  for (auto [name, p] : {std::pair{"topics", &cfg.paths.topics}, std::pair{"documents", &cfg.paths.documents},
                         std::pair{"ranking", &cfg.paths.ranking}}) {
    if (p->empty()) throw ContractError(std::string("paths.") + name + " is not set");
    if (!fs::exists(*p)) throw ContractError(std::string("paths.") + name + " does not exist: " + p->string());
  }
  Collection c;
  c.topics = io::read_jsonl<Topic>(cfg.paths.topics);
  c.documents = io::read_jsonl<Document>(cfg.paths.documents);
  c.rankings = io::read_jsonl<RetrievalRanking>(cfg.paths.ranking);
  auto report = validate_collection(c.topics, c.documents, c.rankings);
  if (!report.ok()) {
    const auto& d = report.diagnostics.front();
    throw ContractError("collection failed validation (" + std::to_string(report.diagnostics.size()) +
                        " problems; first: " + d.kind + " " + d.subject + ": " + d.detail + ")");
  }
  return c;
}

// ---------------------------------------------------------------------------

providers::ChatProvider& ProviderSet::chat(std::string_view role) {
  std::lock_guard lock(mu_);
  auto& slot = chat_[std::string(role)];
  if (!slot) {
    auto pc = cfg_.provider(role);
    pc.dry_run = cfg_.dry_run;
    slot = providers::make_chat_provider(pc);
  }
  return *slot;
}

providers::EmbeddingProvider& ProviderSet::embed() {
  std::lock_guard lock(mu_);
  if (!embed_) {
    auto pc = cfg_.provider("embed");
    pc.dry_run = cfg_.dry_run;
    embed_ = providers::make_embedding_provider(pc);
  }
  return *embed_;
}

Json ProviderSet::stats_json() const {
  std::lock_guard lock(mu_);
  Json out = Json::object();
  for (const auto& [role, p] : chat_) out[role] = stats_json_of(p->stats());
  if (embed_) out["embed"] = stats_json_of(embed_->stats());
  return out;
}

std::uint64_t ProviderSet::failed_requests() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& [role, p] : chat_) n += p->stats().failed_requests;
  if (embed_) n += embed_->stats().failed_requests;
  return n;
}

// ---------------------------------------------------------------------------

GenerateReport cmd_generate(const PipelineConfig& cfg, ProviderSet& providers, const GenerateOptions& opts) {
  return generate_impl(cfg, providers, opts, false, "generate");
}

GenerateReport cmd_select(const PipelineConfig& cfg, ProviderSet& providers) {
  return generate_impl(cfg, providers, {}, true, "select");
}

TrainReport cmd_train_svm(const PipelineConfig& cfg, ProviderSet& providers) {
  cfg.check();
  const std::string started = utc_now();
  if (cfg.paths.gold_bank.empty()) throw ContractError("train-svm needs paths.gold_bank");
  auto collection = load_collection(cfg);
  std::map<std::string, const Topic*> topics;
  for (const auto& t : collection.topics) topics[t.topic_id] = &t;
  auto gold = load_banks(cfg.paths.gold_bank);

  TrainReport report;
  std::vector<QualityVector> pos, neg;
  auto& scorer = providers.chat("criteria");
  auto* verifier = cfg.cluster.verify_with_llm ? &providers.chat("verify") : nullptr;
  selection::MiningConfig mc = cfg.mining;
  mc.parallelism = cfg.parallelism;

  std::sort(gold.begin(), gold.end(), [](const auto& a, const auto& b) { return a.topic_id < b.topic_id; });
  for (const auto& bank : gold) {
    auto t = topics.find(bank.topic_id);
    if (t == topics.end()) throw ContractError("gold bank topic " + bank.topic_id + " is not in the collection");
    const auto& positives = bank.selected.empty() ? bank.candidates : bank.selected;
    auto refined_path = cfg.paths.output / "work" / bank.topic_id / "refined.jsonl";
    if (!fs::exists(refined_path))
      throw ContractError("no generated nuggets for topic " + bank.topic_id + "; run generate first");
    auto generated = io::read_jsonl<QANugget>(refined_path);
    auto negatives = selection::mine_negatives(positives, generated, providers.embed(), verifier, mc,
                                               report.diagnostics);

    std::vector<QualityVector> pv(positives.size()), nv(negatives.size());
    parallel_for(positives.size(), cfg.parallelism, [&](std::size_t i) {
      pv[i] = selection::score_criteria(positives[i], *t->second, scorer, report.diagnostics, 1);
    });
    parallel_for(negatives.size(), cfg.parallelism, [&](std::size_t i) {
      nv[i] = selection::score_criteria(negatives[i], *t->second, scorer, report.diagnostics, 1);
    });
    pos.insert(pos.end(), pv.begin(), pv.end());
    neg.insert(neg.end(), nv.begin(), nv.end());
  }
  report.positives = static_cast<int>(pos.size());
  report.negatives = static_cast<int>(neg.size());
  if (cfg.dry_run) return report;
  if (pos.empty() || neg.empty())
    throw ContractError("train-svm needs at least one positive and one negative example (got " +
                        std::to_string(pos.size()) + " and " + std::to_string(neg.size()) + ")");

  auto hp = cfg.svm;
  hp.seed = cfg.seed;
  auto model = selection::train_svm(pos, neg, hp, &report.training);
  fs::create_directories(cfg.model_path().parent_path());
  io::write_file_atomic(cfg.model_path(), Json(model).dump(2) + "\n");
  fs::create_directories(cfg.paths.output / "diagnostics");
  io::write_file_atomic(cfg.paths.output / "diagnostics" / "train-svm.jsonl",
                        dump_diagnostics(report.diagnostics.sorted()));
  update_manifest(cfg, "train-svm",
                  Json{{"started", started},
                       {"finished", utc_now()},
                       {"config_fingerprint", cfg.fingerprint()},
                       {"positives", report.positives},
                       {"negatives", report.negatives},
                       {"epochs", report.training.epochs},
                       {"converged", report.training.converged},
                       {"training_accuracy", report.training.training_accuracy},
                       {"model_fingerprint", model.training_fingerprint},
                       {"diagnostics", diagnostics_summary(report.diagnostics)},
                       {"providers", providers.stats_json()}});
  return report;
}

std::vector<NuggetBank> load_banks(const fs::path& path) {
  if (!fs::exists(path)) throw ContractError("bank path does not exist: " + path.string());
  if (!fs::is_directory(path)) return io::read_banks(path);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<NuggetBank> out;
  for (const auto& f : files) {
    auto banks = io::read_banks(f);
    out.insert(out.end(), banks.begin(), banks.end());
  }
  return out;
}

EvaluateReport cmd_evaluate(const PipelineConfig& cfg, ProviderSet& providers, const EvaluateOptions& opts) {
  cfg.check();
  const std::string started = utc_now();
  if (cfg.paths.reports.empty() || !fs::exists(cfg.paths.reports))
    throw ContractError("paths.reports is not set or does not exist");
  auto reports = io::read_jsonl<Report>(cfg.paths.reports);

  std::vector<std::pair<std::string, fs::path>> sets;
  if (opts.banks) {
    auto label = opts.label;
    if (label.empty()) label = fs::is_directory(*opts.banks) ? opts.banks->lexically_normal().filename().string()
                                                             : opts.banks->stem().string();
    if (label.empty()) label = opts.banks->parent_path().filename().string();
    sets.emplace_back(label, *opts.banks);
  } else {
    auto root = cfg.paths.output / "banks";
    if (fs::exists(root)) {
      std::vector<fs::path> dirs;
      for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path());
      std::sort(dirs.begin(), dirs.end());
      for (const auto& d : dirs) sets.emplace_back(d.filename().string(), d);
    }
    if (!cfg.paths.gold_bank.empty()) sets.emplace_back("gold", cfg.paths.gold_bank);
    if (sets.empty()) throw ContractError("no banks to evaluate; run generate first or pass --banks");
  }
  if (opts.out_dir && sets.size() > 1) throw ContractError("--out needs a single bank set (pass --banks)");

  EvaluateReport report;
  Json sections = Json::object();
  for (const auto& [label, path] : sets) {
    DiagnosticLog log;
    try {
      auto banks = load_banks(path);
      JudgmentSet judgments;
      if (opts.judgments) {
        judgments = eval::import_judgments(*opts.judgments, opts.judgment_format, log, eval::aggregator_lookup(banks));
      } else {
        auto& judge = providers.chat("judge");
        judgments = eval::judge_reports(reports, banks, judge, judge.identity(), log, cfg.parallelism);
      }
      auto lb = eval::build_leaderboard(reports, banks, judgments, cfg.missing_policy, label, log);
      if (!cfg.dry_run) {
        auto out = opts.out_dir.value_or(cfg.paths.output / "eval" / label);
        fs::create_directories(out);
        io::write_file_atomic(out / "judgments.jsonl", io::dump_judgments(judgments));
        io::write_file_atomic(out / "scores.csv", io::dump_scores_csv(lb.to_matrix()));
        io::write_file_atomic(out / "leaderboard.csv", eval::dump_leaderboard_csv(lb));
        io::write_file_atomic(out / "leaderboard.json", eval::leaderboard_json(lb).dump(2) + "\n");
      }
      sections[label] = Json{{"runs", lb.rows.size()},
                             {"topics", lb.topic_ids.size()},
                             {"judged_with", lb.judged_with},
                             {"diagnostics", diagnostics_summary(log)}};
      report.leaderboards.push_back(std::move(lb));
    } catch (const ContractError&) {
      throw;
    } catch (const std::exception& e) {
      log.add("evaluate", "bank_set_failed", label, e.what());
      sections[label] = Json{{"status", "failed"}, {"error", e.what()}};
      report.exit_code = kExitPartial;
    }
    report.diagnostics.append(log);
  }
  if (cfg.dry_run) return report;
  fs::create_directories(cfg.paths.output / "diagnostics");
  io::write_file_atomic(cfg.paths.output / "diagnostics" / "evaluate.jsonl",
                        dump_diagnostics(report.diagnostics.sorted()));
  update_manifest(cfg, "evaluate",
                  Json{{"started", started},
                       {"finished", utc_now()},
                       {"config_fingerprint", cfg.fingerprint()},
                       {"exit_code", report.exit_code},
                       {"bank_sets", sections},
                       {"diagnostics", diagnostics_summary(report.diagnostics)},
                       {"providers", providers.stats_json()}});
  return report;
}

void update_manifest(const PipelineConfig& cfg, const std::string& command, Json section) {
  auto path = cfg.paths.output / "run_manifest.json";
  Json manifest = Json::object();
  if (fs::exists(path)) {
    try {
      manifest = Json::parse(io::read_file(path));
    } catch (const Json::exception&) {
      manifest = Json::object();  // a damaged manifest is rebuilt, never fatal
    }
  }
  if (!manifest.contains("commands") || !manifest["commands"].is_object()) manifest["commands"] = Json::object();
  manifest["commands"][command] = std::move(section);
  fs::create_directories(cfg.paths.output);
  io::write_file_atomic(path, manifest.dump(2) + "\n");
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace nuggetkit::pipeline
