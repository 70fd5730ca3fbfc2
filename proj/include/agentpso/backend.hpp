// SPDX-License-Identifier: Apache-2.0
//
// Model-completion backends. `HttpBackend` speaks the chat-completions wire
// shape; `MockBackend` is a pure function of the rendered prompt that makes
// whole optimization runs exactly predictable offline.

#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agentpso/core.hpp"
#include "agentpso/prompts.hpp"

namespace agentpso {

struct ModelRequest {
  std::string system_text;
  std::string user_text;
  Purpose purpose = Purpose::kSolve;
  int max_output_words = 0;
  int agent_id = 0;
  int iteration = 0;
};

struct ModelResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;

  /// Never returns an empty text; failures throw BackendError.
  virtual ModelResponse complete(const ModelRequest& request) = 0;
};

/// Caps the number of outstanding calls.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int max_in_flight);

  void acquire();
  void release();

  class Slot {
   public:
    explicit Slot(ConcurrencyLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
    ~Slot() { limiter_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    ConcurrencyLimiter& limiter_;
  };

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

// --- mock token world ------------------------------------------------------

/// Tokens of the form T<digits> standing alone (bounded by non-alphanumerics).
std::set<std::string> extract_tokens(std::string_view text);

/// Tokens sorted by numeric suffix and joined by single spaces.
std::string join_tokens(const std::set<std::string>& tokens);

struct MockAnswer {
  std::string reasoning;
  std::string answer;
};

/// For questions "MOCK:<token>:<a>+<b>": reasoning lists the skill's tokens
/// after "USED"; the answer is a+b when the skill holds the question's token
/// and "0" otherwise. Throws BackendError on any other question shape.
MockAnswer mock_world_answer(std::string_view skill_text, std::string_view question);

class MockBackend final : public Backend {
 public:
  ModelResponse complete(const ModelRequest& request) override;
};

// --- HTTP ----------------------------------------------------------------

class HttpBackend final : public Backend {
 public:
  HttpBackend(BackendSpec spec, int max_parallel_calls);

  ModelResponse complete(const ModelRequest& request) override;

  /// The JSON body sent for a request.
  std::string request_body(const ModelRequest& request) const;

 private:
  BackendSpec spec_;
  std::string scheme_host_port_;
  std::string path_;
  ConcurrencyLimiter limiter_;
};

/// Splits "http(s)://host[:port][/path]" into ("http(s)://host[:port]", "/path").
std::pair<std::string, std::string> split_endpoint(std::string_view url);

/// Builds the backend for a spec. Throws BackendError when an http spec's
/// credential variable is unset.
std::unique_ptr<Backend> make_backend(const BackendSpec& spec, int max_parallel_calls);

}  // namespace agentpso
