// Chat-completion and embedding providers.
//
// A provider pairs a backend (HTTP endpoint or offline mock) with the shared
// machinery every LLM step needs: prompt rendering from versioned templates,
// a content-addressed response cache, a token-bucket rate limiter and a retry
// budget. Backends only move bytes; everything observable lives here.
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "nuggetkit/core.hpp"
#include "nuggetkit/errors.hpp"

namespace nuggetkit::providers {

// ---------------------------------------------------------------------------
// Templates

enum class TemplateId : std::uint8_t {
  kSummarize,
  kGenerateQa,
  kVerifyParaphrase,
  kCanonicalQuestion,
  kValidateAnswers,
  kAssignAggregator,
  kJudgeNugget,
  // One per prompted quality criterion, in criteria_table() order starting
  // at vitality.
  kCriterionFirst,
};

inline constexpr std::size_t kNumTemplates = static_cast<std::size_t>(TemplateId::kCriterionFirst) + 17;

TemplateId criterion_template(Criterion c);
std::optional<Criterion> template_criterion(TemplateId id);
std::string template_name(TemplateId id);
std::optional<TemplateId> template_by_name(std::string_view name);
/// Every template id, in declaration order.
std::vector<TemplateId> all_templates();

/// Prompt texts with `{{name}}` placeholders. The builtin set can be
/// overridden file-by-file from a directory holding `<template_name>.txt`.
class TemplateSet {
 public:
  static const TemplateSet& builtin();
  static TemplateSet with_overrides(const std::filesystem::path& dir);

  const std::string& text(TemplateId id) const;
  const std::string& version() const { return version_; }
  std::vector<std::string> placeholders(TemplateId id) const;

 private:
  std::vector<std::string> texts_;
  std::string version_;
};

struct ChatRequest {
  TemplateId template_id = TemplateId::kSummarize;
  std::map<std::string, std::string> variables;
  int max_output_tokens = 1024;
  double temperature = 0.0;
  /// Appended after the rendered template on a parse retry.
  std::string reminder;
};

/// Substitute every placeholder. Throws ContractError if one is unbound.
std::string render_prompt(const TemplateSet& templates, const ChatRequest& request);

// ---------------------------------------------------------------------------
// Configuration

enum class ProviderKind { kHttpChat, kHttpEmbed, kMock };

std::string_view to_string(ProviderKind k);
ProviderKind parse_provider_kind(std::string_view s);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kMock;
  std::string endpoint;
  std::string model_name = "mock";
  std::string auth_env_var;
  double rate_limit = 600.0;  // requests per minute
  int max_retries = 2;
  std::string cache_dir;      // empty: in-memory cache only

  // Transport knobs.
  int retry_backoff_ms = 500;
  int timeout_s = 120;

  // Mock-only knobs.
  std::string mock_canned_path;  // JSON object {prompt_sha256: response}
  int embedding_dim = 256;
  double fail_rate = 0.0;        // injected transient failures
  std::uint64_t fail_seed = 0;

  bool dry_run = false;
  std::string template_dir;

  /// Throws ContractError when a field is out of range.
  void check() const;
  /// Stable description used in stage fingerprints.
  std::string identity() const;
};

// ---------------------------------------------------------------------------
// Shared machinery

class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {});
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& value);
  std::filesystem::path file_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<std::string, std::string> memory_;
};

class TokenBucket {
 public:
  explicit TokenBucket(double per_minute);
  void acquire();

 private:
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

struct ProviderStats {
  std::uint64_t requests = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t network_calls = 0;   // backend attempts, including failed ones
  std::uint64_t failed_requests = 0; // requests that exhausted retries
  std::uint64_t dry_run_calls = 0;
};

// ---------------------------------------------------------------------------
// Chat

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Any exception is treated as transient and retried.
  virtual std::string complete(const std::string& prompt, const ChatRequest& request) = 0;
};

class ChatProvider {
 public:
  ChatProvider(ProviderConfig config, std::unique_ptr<ChatBackend> backend);
  ChatProvider(ProviderConfig config, std::unique_ptr<ChatBackend> backend, TemplateSet templates);

  /// Raw model text for a request; served from cache when possible.
  std::string chat(const ChatRequest& request);
  std::string cache_key(const std::string& prompt, const ChatRequest& request) const;

  ProviderStats stats() const;
  const ProviderConfig& config() const { return config_; }
  const TemplateSet& templates() const { return templates_; }
  std::string identity() const;

 private:
  ProviderConfig config_;
  std::unique_ptr<ChatBackend> backend_;
  TemplateSet templates_;
  ResponseCache cache_;
  TokenBucket limiter_;
  std::atomic<std::uint64_t> requests_{0}, cache_hits_{0}, network_calls_{0}, failed_{0}, dry_run_{0};
};

/// Canned responses keyed by the SHA-256 of the rendered prompt, falling back
/// to a responder function. Pure and thread-safe.
class MockChatBackend : public ChatBackend {
 public:
  using Responder = std::function<std::optional<std::string>(const ChatRequest&, const std::string& prompt)>;

  MockChatBackend(std::map<std::string, std::string> canned, Responder responder);
  std::string complete(const std::string& prompt, const ChatRequest& request) override;

 private:
  std::map<std::string, std::string> canned_;
  Responder responder_;
};

/// Deterministic rule-based stand-in for an instruction-following model.
/// Drives the offline fixtures; see FORMATS.md for the rules.
std::optional<std::string> heuristic_mock_response(const ChatRequest& request, const std::string& prompt);

/// Fails a deterministic fraction of prompts (by hash), every attempt.
class FaultInjectingBackend : public ChatBackend {
 public:
  FaultInjectingBackend(std::unique_ptr<ChatBackend> inner, double rate, std::uint64_t seed);
  std::string complete(const std::string& prompt, const ChatRequest& request) override;
  bool would_fail(const std::string& prompt) const;

 private:
  std::unique_ptr<ChatBackend> inner_;
  double rate_;
  std::uint64_t seed_;
};

/// OpenAI-compatible chat completion endpoint.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(ProviderConfig config);
  std::string complete(const std::string& prompt, const ChatRequest& request) override;

 private:
  ProviderConfig config_;
};

std::unique_ptr<ChatProvider> make_chat_provider(const ProviderConfig& config);

// ---------------------------------------------------------------------------
// Embeddings

using Vector = std::vector<double>;

class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;
  virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
};

class EmbeddingProvider {
 public:
  EmbeddingProvider(ProviderConfig config, std::unique_ptr<EmbedBackend> backend);

  /// One L2-normalized vector per text. Throws ProviderError on backend
  /// failure after retries or on inconsistent dimensions.
  std::vector<Vector> embed(const std::vector<std::string>& texts);

  ProviderStats stats() const;
  const ProviderConfig& config() const { return config_; }
  std::string identity() const { return config_.identity(); }

 private:
  ProviderConfig config_;
  std::unique_ptr<EmbedBackend> backend_;
  ResponseCache cache_;
  TokenBucket limiter_;
  std::optional<std::size_t> dim_;
  std::mutex dim_mu_;
  std::atomic<std::uint64_t> requests_{0}, cache_hits_{0}, network_calls_{0}, failed_{0}, dry_run_{0};
};

/// Feature-hashing bag-of-words embedder; identical word multisets give
/// identical vectors.
class HashingEmbedBackend : public EmbedBackend {
 public:
  explicit HashingEmbedBackend(int dim);
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;
  Vector embed_one(std::string_view text) const;

 private:
  int dim_;
};

/// Fixed text -> vector table; unknown texts fall back to hashing.
class TableEmbedBackend : public EmbedBackend {
 public:
  TableEmbedBackend(std::map<std::string, Vector> table, int fallback_dim);
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;

 private:
  std::map<std::string, Vector> table_;
  HashingEmbedBackend fallback_;
};

class HttpEmbedBackend : public EmbedBackend {
 public:
  explicit HttpEmbedBackend(ProviderConfig config);
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;

 private:
  ProviderConfig config_;
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const ProviderConfig& config);

double dot(const Vector& a, const Vector& b);
/// Cosine of two unit vectors, clamped to [-1, 1].
double unit_cosine(const Vector& a, const Vector& b);

// ---------------------------------------------------------------------------
// Structured output parsing

struct QaPair {
  std::string question;
  std::string answer;
  bool operator==(const QaPair&) const = default;
};

struct CriterionScore {
  double value;
  bool clamped;
};

using Parsed = std::variant<std::string, std::vector<QaPair>, bool, std::vector<int>, Aggregator, CriterionScore>;

/// Extract a template's declared fields from raw model text. Throws
/// ParseError (carrying the raw text) when they are absent.
Parsed parse_structured(TemplateId id, std::string_view raw);

std::string parse_text(std::string_view raw);
std::vector<QaPair> parse_qa_pairs(std::string_view raw);
bool parse_yes_no(std::string_view raw);
/// 1-based answer indices to drop; `count` bounds them.
std::vector<int> parse_removals(std::string_view raw, std::optional<int> count = std::nullopt);
Aggregator parse_aggregator_verdict(std::string_view raw);
CriterionScore parse_criterion(Criterion c, std::string_view raw);

/// Output-format reminder appended on the single parse retry.
std::string format_reminder(TemplateId id);

/// chat + parse, retrying once with a format reminder when parsing fails.
/// Propagates ProviderError, and ParseError from the second attempt.
template <class Parse>
auto chat_parsed(ChatProvider& provider, ChatRequest request, Parse&& parse)
    -> decltype(parse(std::string_view{})) {
  std::string raw = provider.chat(request);
  try {
    return parse(std::string_view(raw));
  } catch (const ParseError&) {
    request.reminder = format_reminder(request.template_id);
    std::string retry = provider.chat(request);
    return parse(std::string_view(retry));
  }
}

}  // namespace nuggetkit::providers
