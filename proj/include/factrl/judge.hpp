#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace factrl {

struct JudgeExemplar {
  std::string reasoning;
  std::string answer;
  bool consistent = false;
};

struct JudgeRequest {
  std::string id;
  std::string question;
  std::string reasoning;
  std::string answer;
  std::vector<JudgeExemplar> exemplars;
};

enum class VerdictSource { remote, local_rule, fallback_after_failure };

const char* to_string(VerdictSource source);

struct JudgeVerdict {
  bool consistent = false;
  std::string rationale;
  VerdictSource source = VerdictSource::local_rule;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeVerdict judge(const JudgeRequest& req) = 0;
};

// Deterministic offline judge. Reasoning polarity comes from fixed lexicons;
// the verdict is consistent iff the polarity is determinate and matches the
// binarized answer. Exemplars are ignored.
JudgeVerdict judge_local_rule(const JudgeRequest& req);

class LocalRuleJudge final : public Judge {
 public:
  JudgeVerdict judge(const JudgeRequest& req) override { return judge_local_rule(req); }
};

// Raised when the endpoint cannot be reached (or keeps failing) and fallback
// is disabled. last_status is the final HTTP status, 0 for pure transport
// failures such as refused connections or timeouts.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, int last_status)
      : std::runtime_error(what), last_status_(last_status) {}
  int last_status() const { return last_status_; }

 private:
  int last_status_;
};

// Raised when the endpoint answered 200 but the body is not a valid verdict.
// Never falls back: a reachable-but-broken judge is a deployment bug.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RemoteJudgeConfig {
  std::string endpoint;  // scheme://host:port[/prefix]
  std::string api_key;   // sent as a bearer token when non-empty
  int timeout_ms = 2000;
  int retries = 3;  // additional attempts after the first
  int backoff_base_ms = 200;
  double backoff_factor = 2.0;
  double backoff_jitter = 0.2;  // +/- fraction of the delay
  bool fallback_after_failure = false;
  int max_in_flight = 4;
  uint64_t jitter_seed = 0;

  // Reads JUDGE_URL, JUDGE_API_KEY, JUDGE_TIMEOUT_MS.
  static RemoteJudgeConfig from_env();
};

class JudgeClient final : public Judge {
 public:
  explicit JudgeClient(RemoteJudgeConfig cfg);
  ~JudgeClient() override;
  JudgeClient(const JudgeClient&) = delete;
  JudgeClient& operator=(const JudgeClient&) = delete;

  // POSTs {endpoint}/v1/judge. Retries timeouts, connection failures and 5xx
  // with exponential backoff; 4xx is final. After exhaustion either throws
  // TransportError or, with fallback_after_failure, delegates to the local
  // rule judge (source=fallback_after_failure).
  JudgeVerdict judge(const JudgeRequest& req) override;

  int attempts_of_last_call() const;
  const RemoteJudgeConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class VerdictCache {
 public:
  std::optional<JudgeVerdict> find(const JudgeRequest& req) const;
  void put(const JudgeRequest& req, const JudgeVerdict& verdict);
  size_t size() const;

 private:
  static std::string key_of(const JudgeRequest& req);
  mutable std::mutex mu_;
  std::unordered_map<std::string, JudgeVerdict> map_;
};

// Memoizes verdicts for the life of a run, keyed by (question, reasoning,
// answer). Sound because both judges are deterministic for a fixed request.
class CachingJudge final : public Judge {
 public:
  explicit CachingJudge(Judge& inner) : inner_(inner) {}
  JudgeVerdict judge(const JudgeRequest& req) override;
  size_t cache_hits() const { return hits_.load(); }
  size_t cache_size() const { return cache_.size(); }

 private:
  Judge& inner_;
  VerdictCache cache_;
  std::atomic<size_t> hits_{0};
};

}  // namespace factrl
