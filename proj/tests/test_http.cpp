// SPDX-License-Identifier: Apache-2.0
//
// HttpBackend against an in-process server speaking the chat-completions
// wire shape.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "agentpso/backend.hpp"
#include "agentpso/runner.hpp"
#include "support.hpp"

namespace agentpso {
namespace {

using nlohmann::json;

constexpr const char* kKeyVar = "AGENTPSO_TEST_API_KEY";
constexpr const char* kSentinelKey = "sk-SENTINEL-7f3a9c2e-do-not-leak";

std::string completion(const std::string& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}
      .dump();
}

class FakeServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FakeServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      {
        std::lock_guard lock(mutex_);
        bodies_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int hits() const { return hits_; }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::vector<std::string> auth() {
    std::lock_guard lock(mutex_);
    return auth_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
  std::mutex mutex_;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

class HttpBackendTest : public ::testing::Test {
 protected:
  void SetUp() override { ::setenv(kKeyVar, kSentinelKey, 1); }
  void TearDown() override { ::unsetenv(kKeyVar); }

  BackendSpec spec(const std::string& url) {
    BackendSpec s;
    s.kind = BackendKind::kHttp;
    s.endpoint_url = url;
    s.model_name = "test-model";
    s.credential_env_var = kKeyVar;
    s.timeout_ms = 5000;
    s.max_retries = 3;
    s.backoff_ms = 1;
    return s;
  }

  static ModelRequest request(const std::string& user) {
    ModelRequest r;
    r.user_text = user;
    r.purpose = Purpose::kReflect;
    return r;
  }
};

TEST_F(HttpBackendTest, WireShapeAndBearerToken) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("ADD T2"), "application/json");
  });
  auto s = spec(server.url());
  s.temperature = 0.25;
  HttpBackend backend(s, 2);
  auto out = backend.complete(request("hello user"));
  EXPECT_EQ(out.text, "ADD T2");
  EXPECT_EQ(out.attempt_count, 1);

  auto body = json::parse(server.bodies().at(0));
  EXPECT_EQ(body["model"], "test-model");
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], "");
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["messages"][1]["content"], "hello user");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.25);
  EXPECT_EQ(server.auth().at(0), std::string("Bearer ") + kSentinelKey);
}

TEST_F(HttpBackendTest, NoSamplingOverridesByDefault) {
  HttpBackend backend(spec("http://127.0.0.1:9/v1/chat/completions"), 1);
  auto body = json::parse(backend.request_body(request("x")));
  EXPECT_FALSE(body.contains("temperature"));
}

TEST_F(HttpBackendTest, RetriesServerErrors) {
  std::atomic<int> calls{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ < 2) {
      res.status = 503;
      res.set_content("overloaded", "text/plain");
      return;
    }
    res.set_content(completion("fine"), "application/json");
  });
  HttpBackend backend(spec(server.url()), 1);
  auto out = backend.complete(request("x"));
  EXPECT_EQ(out.text, "fine");
  EXPECT_EQ(out.attempt_count, 3);
  EXPECT_EQ(server.hits(), 3);
}

TEST_F(HttpBackendTest, GivesUpAfterMaxRetries) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  auto s = spec(server.url());
  s.max_retries = 2;
  HttpBackend backend(s, 1);
  EXPECT_THROW(backend.complete(request("x")), BackendError);
  EXPECT_EQ(server.hits(), 3);
}

TEST_F(HttpBackendTest, ClientErrorIsNotRetriedAndCarriesExcerpt) {
  const std::string long_body = "bad request: " + std::string(500, 'z');
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content(long_body, "text/plain");
  });
  HttpBackend backend(spec(server.url()), 1);
  try {
    backend.complete(request("x"));
    FAIL();
  } catch (const BackendError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("400"), std::string::npos);
    EXPECT_NE(msg.find("bad request"), std::string::npos);
    EXPECT_LT(msg.size(), 300u);
  }
  EXPECT_EQ(server.hits(), 1);
}

TEST_F(HttpBackendTest, EmptyOrMalformedContentIsAnError) {
  FakeServer empty([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("   "), "application/json");
  });
  HttpBackend a(spec(empty.url()), 1);
  EXPECT_THROW(a.complete(request("x")), BackendError);
  EXPECT_EQ(empty.hits(), 1);

  FakeServer malformed([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  HttpBackend b(spec(malformed.url()), 1);
  EXPECT_THROW(b.complete(request("x")), BackendError);
  EXPECT_EQ(malformed.hits(), 1);
}

TEST_F(HttpBackendTest, UnreachableEndpoint) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto s = spec("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
  s.max_retries = 2;
  s.timeout_ms = 500;
  HttpBackend backend(s, 1);
  try {
    backend.complete(request("x"));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos) << e.what();
  }
}

TEST_F(HttpBackendTest, MissingCredential) {
  ::unsetenv(kKeyVar);
  EXPECT_THROW(make_backend(spec("http://127.0.0.1:9/x"), 1), BackendError);
  HttpBackend backend(spec("http://127.0.0.1:9/x"), 1);
  EXPECT_THROW(backend.complete(request("x")), BackendError);
}

TEST_F(HttpBackendTest, ConcurrencyIsCapped) {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --in_flight;
    res.set_content(completion("ok"), "application/json");
  });
  HttpBackend backend(spec(server.url()), 2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { backend.complete(request("x")); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(server.hits(), 6);
  EXPECT_LE(peak.load(), 2);
}

// The server answers every prompt with the token-world mock, so a whole run
// goes over the wire. Nothing written or logged may contain the key.
Purpose infer_purpose(const std::string& prompt) {
  if (prompt.find("Return exactly one JSON object") != std::string::npos) return Purpose::kSolve;
  if (prompt.find("Return only the update direction") != std::string::npos) return Purpose::kReflect;
  if (prompt.find("Return only the updated skill") != std::string::npos) return Purpose::kSkillUpdate;
  return Purpose::kVelocity;
}

TEST_F(HttpBackendTest, CredentialNeverReachesFilesOrLogs) {
  MockBackend mock;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    ModelRequest r;
    r.user_text = body["messages"][1]["content"].get<std::string>();
    r.purpose = infer_purpose(r.user_text);
    res.set_content(completion(mock.complete(r).text), "application/json");
  });

  std::ostringstream log_capture;
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(log_capture);
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(std::make_shared<spdlog::logger>("capture", sink));
  spdlog::set_level(spdlog::level::trace);

  testing::TempDir dir;
  auto config = testing::mock_config(dir.path());
  config.num_iterations = 2;
  config.backend = spec(server.url());
  config.run_dir = (dir / "run").string();
  auto result = run_optimization(config);
  EXPECT_EQ(result.state.iteration, 2);

  auto skills = export_skills(dir / "skills", result.state, "run");
  std::vector<Skill> population;
  for (const auto& a : result.state.agents) population.push_back(a.personal_best);
  auto backend = make_backend(config.backend, 4);
  auto pools = load_pools(config);
  auto eval = evaluate_population(*backend, config, population, pools.test);
  EvaluationResult row{"AgentPSO", "mock", "test", eval.metrics, 200, {}};
  row.metadata["backend"] = backend_spec_to_json(config.backend);
  emit_report(dir / "report", {row});

  // Provoke a failure path that logs.
  auto failing = spec("http://127.0.0.1:9/v1/chat/completions");
  failing.max_retries = 1;
  HttpBackend dead(failing, 1);
  EXPECT_THROW(dead.complete(request("x")), BackendError);

  spdlog::set_default_logger(previous);

  int scanned = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (!entry.is_regular_file()) continue;
    ++scanned;
    EXPECT_EQ(testing::read_file(entry.path()).find(kSentinelKey), std::string::npos)
        << entry.path();
  }
  EXPECT_GT(scanned, 5);
  EXPECT_FALSE(log_capture.str().empty());
  EXPECT_EQ(log_capture.str().find(kSentinelKey), std::string::npos);
  for (const auto& a : server.auth()) EXPECT_EQ(a, std::string("Bearer ") + kSentinelKey);
}

}  // namespace
}  // namespace agentpso
