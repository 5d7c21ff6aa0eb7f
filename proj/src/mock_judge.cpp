#include "factrl/mock_judge.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace factrl {

MockJudgeScript MockJudgeScript::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MockJudgeScript s;
  s.mode = j.value("mode", s.mode);
  if (s.mode != "fixed" && s.mode != "fail_then_succeed" && s.mode != "malformed") {
    throw std::invalid_argument("unknown mock judge mode: " + s.mode);
  }
  s.consistent = j.value("consistent", s.consistent);
  s.rationale = j.value("rationale", s.rationale);
  s.fail_count = j.value("fail_count", s.fail_count);
  s.fail_status = j.value("fail_status", s.fail_status);
  s.latency_ms = j.value("latency_ms", s.latency_ms);
  return s;
}

MockJudgeScript MockJudgeScript::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mock judge script: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

struct MockJudgeServer::Impl {
  MockJudgeScript script;
  httplib::Server server;
  std::thread worker;
  int bound_port = 0;
  std::atomic<int> hits{0};
  mutable std::mutex body_mu;
  std::string last_body;

  explicit Impl(MockJudgeScript s) : script(std::move(s)) {
    server.Post("/v1/judge", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = hits.fetch_add(1) + 1;
      {
        std::lock_guard<std::mutex> lock(body_mu);
        last_body = req.body;
      }
      if (script.latency_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(script.latency_ms));
      }
      if (script.mode == "fail_then_succeed" && n <= script.fail_count) {
        res.status = script.fail_status;
        res.set_content("scripted failure", "text/plain");
        return;
      }
      if (script.mode == "malformed") {
        res.status = 200;
        res.set_content("this is not a verdict", "text/plain");
        return;
      }
      nlohmann::ordered_json body;
      body["consistent"] = script.consistent;
      body["rationale"] = script.rationale;
      res.status = 200;
      res.set_content(body.dump(), "application/json");
    });
  }
};

MockJudgeServer::MockJudgeServer(MockJudgeScript script)
    : impl_(new Impl(std::move(script))) {}

MockJudgeServer::~MockJudgeServer() { stop(); }

int MockJudgeServer::start(int port) {
  if (port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port("127.0.0.1");
    if (impl_->bound_port <= 0) throw std::runtime_error("mock judge failed to bind");
  } else {
    if (!impl_->server.bind_to_port("127.0.0.1", port)) {
      throw std::runtime_error("mock judge failed to bind port " + std::to_string(port));
    }
    impl_->bound_port = port;
  }
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void MockJudgeServer::stop() {
  if (impl_->worker.joinable()) {
    impl_->server.stop();
    impl_->worker.join();
  }
}

int MockJudgeServer::port() const { return impl_->bound_port; }

int MockJudgeServer::request_count() const { return impl_->hits.load(); }

std::string MockJudgeServer::last_request_body() const {
  std::lock_guard<std::mutex> lock(impl_->body_mu);
  return impl_->last_body;
}

}  // namespace factrl
