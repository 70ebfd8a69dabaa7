#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "nuggetkit/providers.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include "nuggetkit/hashing.hpp"
#include "nuggetkit/serialize.hpp"
#include "nuggetkit/text.hpp"

namespace nuggetkit::providers {

std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::kHttpChat: return "http_chat";
    case ProviderKind::kHttpEmbed: return "http_embed";
    case ProviderKind::kMock: return "mock";
  }
  return "mock";
}

ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "http_chat") return ProviderKind::kHttpChat;
  if (s == "http_embed") return ProviderKind::kHttpEmbed;
  if (s == "mock") return ProviderKind::kMock;
  throw FormatError("unknown provider kind '" + std::string(s) + "'");
}

void ProviderConfig::check() const {
  if (!(rate_limit > 0)) throw ContractError("provider rate_limit must be > 0");
  if (max_retries < 0) throw ContractError("provider max_retries must be >= 0");
  if (retry_backoff_ms < 0) throw ContractError("provider retry_backoff_ms must be >= 0");
  if (!(fail_rate >= 0.0 && fail_rate <= 1.0)) throw ContractError("provider fail_rate must be in [0,1]");
  if (kind != ProviderKind::kMock && endpoint.empty()) throw ContractError("http provider needs an endpoint");
  if (embedding_dim < 1) throw ContractError("embedding_dim must be >= 1");
}

std::string ProviderConfig::identity() const {
  Fingerprint fp;
  fp.add("kind", to_string(kind)).add("endpoint", endpoint).add("model", model_name);
  if (kind == ProviderKind::kMock) {
    fp.add("canned", mock_canned_path.empty() ? std::string() : sha256_hex(io::read_file(mock_canned_path)));
    fp.add("dim", static_cast<std::int64_t>(embedding_dim));
    fp.add("fail_rate", fail_rate).add("fail_seed", static_cast<std::int64_t>(fail_seed));
  }
  if (!template_dir.empty()) fp.add("templates", TemplateSet::with_overrides(template_dir).version());
  else fp.add("templates", TemplateSet::builtin().version());
  return std::string(to_string(kind)) + ":" + model_name + ":" + fp.hex().substr(0, 16);
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::file_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / key;
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  {
    std::shared_lock lock(mu_);
    auto it = memory_.find(key);
    if (it != memory_.end()) return it->second;
  }
  if (dir_.empty()) return std::nullopt;
  auto path = file_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  std::string value = io::read_file(path);
  std::unique_lock lock(mu_);
  memory_.emplace(key, value);
  return value;
}

void ResponseCache::put(const std::string& key, const std::string& value) {
  {
    std::unique_lock lock(mu_);
    memory_[key] = value;
  }
  if (!dir_.empty()) io::write_file_atomic(file_for(key), value);
}

TokenBucket::TokenBucket(double per_minute)
    : rate_per_sec_(per_minute / 60.0),
      capacity_(std::max(1.0, per_minute / 60.0)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  std::unique_lock lock(mu_);
  while (true) {
    auto now = std::chrono::steady_clock::now();
    double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_sec_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    double wait = (1.0 - tokens_) / rate_per_sec_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

// ---------------------------------------------------------------------------

namespace {

TemplateSet templates_for(const ProviderConfig& config) {
  return config.template_dir.empty() ? TemplateSet::builtin() : TemplateSet::with_overrides(config.template_dir);
}

void backoff(const ProviderConfig& config, int attempt) {
  if (config.retry_backoff_ms <= 0) return;
  auto ms = static_cast<long>(config.retry_backoff_ms) << std::min(attempt - 1, 6);
  std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

}  // namespace

ChatProvider::ChatProvider(ProviderConfig config, std::unique_ptr<ChatBackend> backend)
    : ChatProvider(config, std::move(backend), templates_for(config)) {}

ChatProvider::ChatProvider(ProviderConfig config, std::unique_ptr<ChatBackend> backend, TemplateSet templates)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      templates_(std::move(templates)),
      cache_(config_.cache_dir.empty() ? std::filesystem::path() : std::filesystem::path(config_.cache_dir)),
      limiter_(config_.rate_limit) {
  config_.check();
}

std::string ChatProvider::cache_key(const std::string& prompt, const ChatRequest& request) const {
  Fingerprint fp;
  fp.add("model", config_.model_name)
      .add("prompt", prompt)
      .add("temperature", request.temperature)
      .add("max_tokens", static_cast<std::int64_t>(request.max_output_tokens));
  return fp.hex();
}

std::string ChatProvider::chat(const ChatRequest& request) {
  if (request.temperature < 0) throw ContractError("temperature must be >= 0");
  ++requests_;
  std::string prompt = render_prompt(templates_, request);
  std::string key = cache_key(prompt, request);
  if (auto hit = cache_.get(key)) {
    ++cache_hits_;
    return *hit;
  }
  if (config_.dry_run) {
    ++dry_run_;
    throw ProviderError("dry run: " + template_name(request.template_id) + " not sent", 0);
  }
  const int attempts = config_.max_retries + 1;
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    limiter_.acquire();
    ++network_calls_;
    try {
      std::string out = backend_->complete(prompt, request);
      cache_.put(key, out);
      return out;
    } catch (const ContractError&) {
      throw;
    } catch (const std::exception& e) {
      last_error = e.what();
    }
    if (attempt < attempts) backoff(config_, attempt);
  }
  ++failed_;
  throw ProviderError(template_name(request.template_id) + " failed after " + std::to_string(attempts) +
                          " attempts: " + last_error,
                      attempts);
}

ProviderStats ChatProvider::stats() const {
  return {requests_.load(), cache_hits_.load(), network_calls_.load(), failed_.load(), dry_run_.load()};
}

std::string ChatProvider::identity() const {
  return config_.identity() + "/" + templates_.version();
}

MockChatBackend::MockChatBackend(std::map<std::string, std::string> canned, Responder responder)
    : canned_(std::move(canned)), responder_(std::move(responder)) {}

std::string MockChatBackend::complete(const std::string& prompt, const ChatRequest& request) {
  if (!canned_.empty()) {
    auto it = canned_.find(sha256_hex(prompt));
    if (it != canned_.end()) return it->second;
  }
  if (responder_)
    if (auto r = responder_(request, prompt)) return *r;
  throw std::runtime_error("mock: no response for " + template_name(request.template_id));
}

FaultInjectingBackend::FaultInjectingBackend(std::unique_ptr<ChatBackend> inner, double rate, std::uint64_t seed)
    : inner_(std::move(inner)), rate_(rate), seed_(seed) {}

bool FaultInjectingBackend::would_fail(const std::string& prompt) const {
  if (rate_ <= 0) return false;
  std::uint64_t h = stable_hash64(std::to_string(seed_) + "\n" + prompt);
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < rate_;
}

std::string FaultInjectingBackend::complete(const std::string& prompt, const ChatRequest& request) {
  if (would_fail(prompt)) throw std::runtime_error("injected failure");
  return inner_->complete(prompt, request);
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ContractError("bad endpoint URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

Json post_json(const ProviderConfig& config, const Json& body) {
  Url url = split_url(config.endpoint);
  httplib::Client client(url.origin);
  client.set_connection_timeout(std::min(config.timeout_s, 10), 0);
  client.set_read_timeout(config.timeout_s, 0);
  client.set_write_timeout(config.timeout_s, 0);
  httplib::Headers headers;
  if (!config.auth_env_var.empty()) {
    const char* token = std::getenv(config.auth_env_var.c_str());
    if (!token) throw std::runtime_error("auth variable " + config.auth_env_var + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) throw std::runtime_error("HTTP request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw std::runtime_error("HTTP status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  try {
    return Json::parse(res->body);
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("malformed response body: ") + e.what());
  }
}

}  // namespace

HttpChatBackend::HttpChatBackend(ProviderConfig config) : config_(std::move(config)) {}

std::string HttpChatBackend::complete(const std::string& prompt, const ChatRequest& request) {
  Json body{{"model", config_.model_name},
            {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens}};
  Json res = post_json(config_, body);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("unexpected chat response shape: ") + e.what());
  }
}

HttpEmbedBackend::HttpEmbedBackend(ProviderConfig config) : config_(std::move(config)) {}

std::vector<Vector> HttpEmbedBackend::embed(const std::vector<std::string>& texts) {
  Json body{{"model", config_.model_name}, {"input", texts}};
  Json res = post_json(config_, body);
  std::vector<Vector> out;
  try {
    const auto& data = res.at("data");
    for (const auto& item : data) out.push_back(item.at("embedding").get<Vector>());
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("unexpected embedding response shape: ") + e.what());
  }
  if (out.size() != texts.size()) throw std::runtime_error("embedding count mismatch");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::map<std::string, std::string> load_canned(const std::string& path) {
  std::map<std::string, std::string> out;
  if (path.empty()) return out;
  Json j = Json::parse(io::read_file(path));
  for (auto& [k, v] : j.items()) out.emplace(k, v.get<std::string>());
  return out;
}

}  // namespace

std::unique_ptr<ChatProvider> make_chat_provider(const ProviderConfig& config) {
  config.check();
  std::unique_ptr<ChatBackend> backend;
  switch (config.kind) {
    case ProviderKind::kMock:
      backend = std::make_unique<MockChatBackend>(load_canned(config.mock_canned_path), heuristic_mock_response);
      break;
    case ProviderKind::kHttpChat:
      backend = std::make_unique<HttpChatBackend>(config);
      break;
    case ProviderKind::kHttpEmbed:
      throw ContractError("http_embed provider cannot serve chat requests");
  }
  if (config.fail_rate > 0)
    backend = std::make_unique<FaultInjectingBackend>(std::move(backend), config.fail_rate, config.fail_seed);
  return std::make_unique<ChatProvider>(config, std::move(backend));
}

// ---------------------------------------------------------------------------
// Embeddings

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ContractError("dot: dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double unit_cosine(const Vector& a, const Vector& b) { return std::clamp(dot(a, b), -1.0, 1.0); }

EmbeddingProvider::EmbeddingProvider(ProviderConfig config, std::unique_ptr<EmbedBackend> backend)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      cache_(config_.cache_dir.empty() ? std::filesystem::path() : std::filesystem::path(config_.cache_dir)),
      limiter_(config_.rate_limit) {
  config_.check();
}

namespace {

std::string encode_vector(const Vector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += text::format_double(v[i]);
  }
  return out;
}

Vector decode_vector(const std::string& s) {
  Vector v;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    double x = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (res.ec != std::errc()) throw FormatError("corrupt cached embedding");
    v.push_back(x);
  }
  return v;
}

}  // namespace

std::vector<Vector> EmbeddingProvider::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractError("embed: empty batch");
  for (const auto& t : texts)
    if (text::trim(t).empty()) throw ContractError("embed: empty text");
  requests_ += texts.size();

  std::vector<Vector> out(texts.size());
  std::vector<std::size_t> missing;
  std::vector<std::string> keys(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys[i] = Fingerprint().add("model", config_.model_name).add("embed", texts[i]).hex();
    if (auto hit = cache_.get(keys[i])) {
      ++cache_hits_;
      out[i] = decode_vector(*hit);
    } else {
      missing.push_back(i);
    }
  }
  if (!missing.empty()) {
    if (config_.dry_run) {
      dry_run_ += missing.size();
      throw ProviderError("dry run: embedding batch not sent", 0);
    }
    std::vector<std::string> batch;
    for (auto i : missing) batch.push_back(texts[i]);
    const int attempts = config_.max_retries + 1;
    std::vector<Vector> got;
    std::string last_error;
    bool ok = false;
    for (int attempt = 1; attempt <= attempts && !ok; ++attempt) {
      limiter_.acquire();
      ++network_calls_;
      try {
        got = backend_->embed(batch);
        if (got.size() != batch.size()) throw std::runtime_error("embedding count mismatch");
        ok = true;
      } catch (const std::exception& e) {
        last_error = e.what();
        if (attempt < attempts) backoff(config_, attempt);
      }
    }
    if (!ok) {
      ++failed_;
      throw ProviderError("embedding failed after " + std::to_string(attempts) + " attempts: " + last_error, attempts);
    }
    for (std::size_t k = 0; k < missing.size(); ++k) {
      Vector v = std::move(got[k]);
      double norm = std::sqrt(dot(v, v));
      if (!(norm > 0) || !std::isfinite(norm)) throw ProviderError("embedding: zero or non-finite vector", 1);
      for (auto& x : v) x /= norm;
      cache_.put(keys[missing[k]], encode_vector(v));
      out[missing[k]] = std::move(v);
    }
  }

  std::lock_guard lock(dim_mu_);
  for (const auto& v : out) {
    if (!dim_) dim_ = v.size();
    if (v.size() != *dim_)
      throw ProviderError("embedding dimension " + std::to_string(v.size()) + " differs from " + std::to_string(*dim_),
                          1);
  }
  return out;
}

ProviderStats EmbeddingProvider::stats() const {
  return {requests_.load(), cache_hits_.load(), network_calls_.load(), failed_.load(), dry_run_.load()};
}

HashingEmbedBackend::HashingEmbedBackend(int dim) : dim_(dim) {
  if (dim < 1) throw ContractError("hashing embedder needs dim >= 1");
}

Vector HashingEmbedBackend::embed_one(std::string_view s) const {
  Vector v(static_cast<std::size_t>(dim_), 0.0);
  for (const auto& w : text::words(s)) {
    std::uint64_t h = stable_hash64(w);
    double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % static_cast<std::uint64_t>(dim_)] += sign;
  }
  // Texts with no word characters still need a non-zero vector.
  bool zero = std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  if (zero) v[stable_hash64(s) % static_cast<std::uint64_t>(dim_)] = 1.0;
  return v;
}

std::vector<Vector> HashingEmbedBackend::embed(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

TableEmbedBackend::TableEmbedBackend(std::map<std::string, Vector> table, int fallback_dim)
    : table_(std::move(table)), fallback_(fallback_dim) {}

std::vector<Vector> TableEmbedBackend::embed(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  for (const auto& t : texts) {
    auto it = table_.find(t);
    out.push_back(it != table_.end() ? it->second : fallback_.embed_one(t));
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const ProviderConfig& config) {
  config.check();
  switch (config.kind) {
    case ProviderKind::kMock:
      return std::make_unique<EmbeddingProvider>(config, std::make_unique<HashingEmbedBackend>(config.embedding_dim));
    case ProviderKind::kHttpEmbed:
      return std::make_unique<EmbeddingProvider>(config, std::make_unique<HttpEmbedBackend>(config));
    case ProviderKind::kHttpChat:
      break;
  }
  throw ContractError("http_chat provider cannot serve embedding requests");
}

}  // namespace nuggetkit::providers
