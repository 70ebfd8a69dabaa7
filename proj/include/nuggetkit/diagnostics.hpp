// Item-level diagnostics collected while a stage keeps going past failures,
// and the bounded parallel loop the stages share.
#pragma once

#include <algorithm>
#include <atomic>
#include <compare>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nuggetkit {

struct Diagnostic {
  std::string stage;    // stage1, stage2a, stage2b, criteria, select, judge, import
  std::string code;     // provider_error, parse_error, truncated, no_pairs, fallback, ...
  std::string subject;  // id of the item concerned
  std::string message;

  auto operator<=>(const Diagnostic&) const = default;
};

/// Thread-safe append-only log. Output is sorted, so concurrent stages
/// produce the same listing whatever the interleaving.
class DiagnosticLog {
 public:
  DiagnosticLog() = default;
  DiagnosticLog(const DiagnosticLog& other) : items_(other.sorted()) {}
  DiagnosticLog& operator=(const DiagnosticLog& other) {
    if (this != &other) {
      auto copy = other.sorted();
      std::lock_guard lock(mu_);
      items_ = std::move(copy);
    }
    return *this;
  }

  void add(std::string stage, std::string code, std::string subject, std::string message) {
    std::lock_guard lock(mu_);
    items_.push_back({std::move(stage), std::move(code), std::move(subject), std::move(message)});
  }
  void append(const DiagnosticLog& other) {
    auto copy = other.sorted();
    std::lock_guard lock(mu_);
    items_.insert(items_.end(), copy.begin(), copy.end());
  }
  std::vector<Diagnostic> sorted() const {
    std::lock_guard lock(mu_);
    auto out = items_;
    std::sort(out.begin(), out.end());
    return out;
  }
  std::size_t count(std::string_view code) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(items_.begin(), items_.end(), [&](const Diagnostic& d) { return d.code == code; }));
  }
  std::map<std::string, std::size_t> by_code() const {
    std::lock_guard lock(mu_);
    std::map<std::string, std::size_t> out;
    for (const auto& d : items_) ++out[d.code];
    return out;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<Diagnostic> items_;
};

/// Run fn(i) for i in [0, n) on up to `parallelism` threads. Callers write
/// results into per-index slots, so output order never depends on
/// scheduling. The exception of the lowest failing index is rethrown.
inline void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, parallelism)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace nuggetkit
