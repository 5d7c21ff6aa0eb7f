#include "factrl/judge.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include "factrl/completion.hpp"
#include "factrl/rng.hpp"
#include "factrl/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace factrl {

namespace {

constexpr std::array<std::string_view, 4> kAffirmative = {
    "shows", "presence of", "consistent with", "positive for"};
constexpr std::array<std::string_view, 5> kNegative = {
    "no evidence", "absence of", "unremarkable", "negative for", "not"};

template <size_t N>
bool any_phrase(std::string_view hay, const std::array<std::string_view, N>& lexicon) {
  for (const auto phrase : lexicon) {
    if (text::contains_phrase(hay, phrase)) return true;
  }
  return false;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

}  // namespace

const char* to_string(VerdictSource source) {
  switch (source) {
    case VerdictSource::remote: return "remote";
    case VerdictSource::local_rule: return "local_rule";
    case VerdictSource::fallback_after_failure: return "fallback_after_failure";
  }
  return "unknown";
}

JudgeVerdict judge_local_rule(const JudgeRequest& req) {
  const bool affirmative = any_phrase(req.reasoning, kAffirmative);
  const bool negative = any_phrase(req.reasoning, kNegative);

  std::optional<int> polarity;
  if (affirmative && !negative) polarity = 1;
  if (negative && !affirmative) polarity = 0;

  JudgeVerdict v;
  v.source = VerdictSource::local_rule;
  if (!polarity) {
    v.consistent = false;
    v.rationale = "reasoning polarity indeterminate";
    return v;
  }
  const BinarizedAnswer bin = binarize(req.answer);
  if (!bin.value) {
    v.consistent = false;
    v.rationale = "answer not binarizable";
    return v;
  }
  v.consistent = (*polarity == *bin.value);
  v.rationale = v.consistent ? "reasoning polarity matches answer"
                             : "reasoning polarity contradicts answer";
  return v;
}

RemoteJudgeConfig RemoteJudgeConfig::from_env() {
  RemoteJudgeConfig cfg;
  cfg.endpoint = env_or("JUDGE_URL", "");
  cfg.api_key = env_or("JUDGE_API_KEY", "");
  const std::string timeout = env_or("JUDGE_TIMEOUT_MS", "");
  if (!timeout.empty()) cfg.timeout_ms = std::stoi(timeout);
  return cfg;
}

struct JudgeClient::Impl {
  RemoteJudgeConfig cfg;
  std::string host;  // scheme://host:port
  std::string path_prefix;
  std::counting_semaphore<1 << 20> slots;
  std::atomic<int> last_attempts{0};
  std::mutex jitter_mu;
  rng::Stream jitter;

  explicit Impl(RemoteJudgeConfig c)
      : cfg(std::move(c)),
        slots(std::max(1, cfg.max_in_flight)),
        jitter(rng::derive(cfg.jitter_seed, "judge_backoff")) {
    if (cfg.endpoint.empty()) {
      throw std::invalid_argument("remote judge requires an endpoint (set JUDGE_URL)");
    }
    // Split an optional path prefix off the base URL; httplib wants
    // scheme://host:port only.
    const size_t scheme = cfg.endpoint.find("://");
    const size_t slash =
        cfg.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash == std::string::npos) {
      host = cfg.endpoint;
    } else {
      host = cfg.endpoint.substr(0, slash);
      path_prefix = cfg.endpoint.substr(slash);
      while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
    }
  }

  int backoff_ms(int retry_index) {
    double delay = cfg.backoff_base_ms * std::pow(cfg.backoff_factor, retry_index);
    double mult = 1.0;
    if (cfg.backoff_jitter > 0.0) {
      std::lock_guard<std::mutex> lock(jitter_mu);
      mult = 1.0 - cfg.backoff_jitter + 2.0 * cfg.backoff_jitter * jitter.uniform01();
    }
    return static_cast<int>(std::lround(delay * mult));
  }
};

JudgeClient::JudgeClient(RemoteJudgeConfig cfg) : impl_(new Impl(std::move(cfg))) {}

JudgeClient::~JudgeClient() = default;

int JudgeClient::attempts_of_last_call() const { return impl_->last_attempts.load(); }

const RemoteJudgeConfig& JudgeClient::config() const { return impl_->cfg; }

JudgeVerdict JudgeClient::judge(const JudgeRequest& req) {
  nlohmann::ordered_json body;
  body["id"] = req.id;
  body["question"] = req.question;
  body["reasoning"] = req.reasoning;
  body["answer"] = req.answer;
  auto exemplars = nlohmann::ordered_json::array();
  for (const auto& ex : req.exemplars) {
    exemplars.push_back({{"reasoning", ex.reasoning},
                         {"answer", ex.answer},
                         {"consistent", ex.consistent}});
  }
  body["exemplars"] = std::move(exemplars);
  const std::string payload = body.dump();

  const auto& cfg = impl_->cfg;
  impl_->slots.acquire();
  struct Release {
    Impl* impl;
    ~Release() { impl->slots.release(); }
  } release{impl_.get()};

  int attempts = 0;
  int last_status = 0;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    ++attempts;
    impl_->last_attempts.store(attempts);

    httplib::Client cli(impl_->host);
    cli.set_connection_timeout(0, cfg.timeout_ms * 1000);
    cli.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    cli.set_write_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!cfg.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + cfg.api_key);
    }
    auto res = cli.Post(impl_->path_prefix + "/v1/judge", headers, payload,
                        "application/json");

    if (res) {
      last_status = res->status;
      if (res->status == 200) {
        nlohmann::json parsed;
        try {
          parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
          throw ProtocolError("judge response is not valid JSON");
        }
        if (!parsed.is_object() || !parsed.contains("consistent") ||
            !parsed.at("consistent").is_boolean()) {
          throw ProtocolError("judge response lacks a boolean consistent field");
        }
        JudgeVerdict v;
        v.consistent = parsed.at("consistent").get<bool>();
        v.rationale = parsed.value("rationale", std::string());
        v.source = VerdictSource::remote;
        return v;
      }
      if (res->status >= 500) {
        last_error = "server status " + std::to_string(res->status);
      } else {
        // 4xx means the request itself is wrong; retrying or falling back
        // would hide a configuration bug.
        throw TransportError(
            "judge endpoint rejected request with status " + std::to_string(res->status),
            res->status);
      }
    } else {
      last_status = 0;
      last_error = httplib::to_string(res.error());
    }

    if (attempt < cfg.retries) {
      std::this_thread::sleep_for(std::chrono::milliseconds(impl_->backoff_ms(attempt)));
    }
  }

  if (cfg.fallback_after_failure) {
    JudgeVerdict v = judge_local_rule(req);
    v.source = VerdictSource::fallback_after_failure;
    return v;
  }
  throw TransportError("judge unreachable after " + std::to_string(attempts) +
                           " attempts: " + last_error,
                       last_status);
}

std::string VerdictCache::key_of(const JudgeRequest& req) {
  std::string key;
  key.reserve(req.question.size() + req.reasoning.size() + req.answer.size() + 2);
  key += req.question;
  key += '\x1f';
  key += req.reasoning;
  key += '\x1f';
  key += req.answer;
  return key;
}

std::optional<JudgeVerdict> VerdictCache::find(const JudgeRequest& req) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = map_.find(key_of(req));
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void VerdictCache::put(const JudgeRequest& req, const JudgeVerdict& verdict) {
  std::lock_guard<std::mutex> lock(mu_);
  map_.emplace(key_of(req), verdict);
}

size_t VerdictCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

JudgeVerdict CachingJudge::judge(const JudgeRequest& req) {
  if (auto hit = cache_.find(req)) {
    hits_.fetch_add(1);
    return *hit;
  }
  JudgeVerdict v = inner_.judge(req);
  cache_.put(req, v);
  return v;
}

}  // namespace factrl
