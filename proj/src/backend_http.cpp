// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "agentpso/backend.hpp"

namespace agentpso {

namespace {

using json = nlohmann::json;

constexpr std::size_t kExcerptBytes = 200;

std::string excerpt(std::string_view body) {
  if (body.size() <= kExcerptBytes) return std::string(body);
  return std::string(body.substr(0, kExcerptBytes)) + "...";
}

std::string read_credential(const BackendSpec& spec) {
  const char* value = std::getenv(spec.credential_env_var.c_str());
  if (value == nullptr || *value == '\0') {
    throw BackendError("credential environment variable " + spec.credential_env_var +
                       " is not set");
  }
  return value;
}

}  // namespace

ConcurrencyLimiter::ConcurrencyLimiter(int max_in_flight) : available_(std::max(1, max_in_flight)) {}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return available_ > 0; });
  --available_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    ++available_;
  }
  cv_.notify_one();
}

std::pair<std::string, std::string> split_endpoint(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw BackendError("endpoint_url must start with http:// or https://");
  }
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw BackendError("unsupported endpoint scheme \"" + std::string(scheme) + "\"");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

HttpBackend::HttpBackend(BackendSpec spec, int max_parallel_calls)
    : spec_(std::move(spec)), limiter_(max_parallel_calls) {
  std::tie(scheme_host_port_, path_) = split_endpoint(spec_.endpoint_url);
}

std::string HttpBackend::request_body(const ModelRequest& request) const {
  nlohmann::ordered_json body;
  body["model"] = spec_.model_name;
  body["messages"] = nlohmann::ordered_json::array({
      {{"role", "system"}, {"content", request.system_text}},
      {{"role", "user"}, {"content", request.user_text}},
  });
  if (spec_.temperature) body["temperature"] = *spec_.temperature;
  return body.dump();
}

ModelResponse HttpBackend::complete(const ModelRequest& request) {
  const std::string credential = read_credential(spec_);
  const std::string body = request_body(request);
  const httplib::Headers headers = {{"Authorization", "Bearer " + credential}};
  const auto started = std::chrono::steady_clock::now();
  const int attempts = spec_.max_retries + 1;

  std::string last_failure;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      auto delay = std::chrono::milliseconds(static_cast<long long>(spec_.backoff_ms) << (attempt - 2));
      spdlog::warn("{} call for agent {} failed ({}); retrying in {} ms", to_string(request.purpose),
                   request.agent_id, last_failure, delay.count());
      std::this_thread::sleep_for(delay);
    }

    httplib::Result result{nullptr, httplib::Error::Unknown};
    {
      ConcurrencyLimiter::Slot slot(limiter_);
      httplib::Client client(scheme_host_port_);
      auto timeout = std::chrono::milliseconds(spec_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      result = client.Post(path_, headers, body, "application/json");
    }

    if (!result) {
      last_failure = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    const auto& response = result.value();
    if (response.status >= 500) {
      last_failure = "HTTP " + std::to_string(response.status) + ": " + excerpt(response.body);
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      throw BackendError("HTTP " + std::to_string(response.status) + ": " + excerpt(response.body));
    }

    std::string text;
    try {
      auto doc = json::parse(response.body);
      text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw BackendError("malformed completion response: " + excerpt(response.body));
    }
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw BackendError("empty completion text");
    }
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    return ModelResponse{std::move(text), latency, attempt};
  }
  throw BackendError(last_failure + " (gave up after " + std::to_string(attempts) + " attempts)");
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec, int max_parallel_calls) {
  if (spec.kind == BackendKind::kMock) return std::make_unique<MockBackend>();
  if (spec.endpoint_url.empty() || spec.model_name.empty()) {
    throw BackendError("http backend requires endpoint_url and model_name");
  }
  read_credential(spec);
  return std::make_unique<HttpBackend>(spec, max_parallel_calls);
}

}  // namespace agentpso
