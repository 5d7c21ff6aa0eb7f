#pragma once

#include <memory>
#include <string>

namespace factrl {

// Scripted behavior for the bundled judge server. Modes:
//   fixed             always 200 with the configured verdict
//   fail_then_succeed fail_count leading responses use fail_status, then 200
//   malformed         200 with a body that is not a verdict
struct MockJudgeScript {
  std::string mode = "fixed";
  bool consistent = true;
  std::string rationale = "scripted verdict";
  int fail_count = 0;
  int fail_status = 500;
  int latency_ms = 0;

  static MockJudgeScript from_json(const std::string& text);
  static MockJudgeScript from_json_file(const std::string& path);
};

class MockJudgeServer {
 public:
  explicit MockJudgeServer(MockJudgeScript script);
  ~MockJudgeServer();
  MockJudgeServer(const MockJudgeServer&) = delete;
  MockJudgeServer& operator=(const MockJudgeServer&) = delete;

  // Binds 127.0.0.1 (port 0 picks a free port), serves on a background
  // thread, returns the bound port once the server accepts connections.
  int start(int port = 0);
  void stop();

  int port() const;
  int request_count() const;
  std::string last_request_body() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace factrl
