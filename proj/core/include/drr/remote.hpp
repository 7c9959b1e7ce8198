#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "drr/critic.hpp"
#include "drr/reasoner.hpp"

namespace drr {

// Retry schedule for transport errors and HTTP 429/5xx. Other statuses fail
// immediately. Delay before retry k (1-based) is initial_delay * factor^(k-1).
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_delay{1000};
  double backoff_factor = 2.0;

  std::chrono::milliseconds delay_before_retry(int k) const;
};

bool is_retryable_status(int status) noexcept;

// Counting gate on in-flight requests.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(std::size_t max_in_flight);

  class Permit {
   public:
    explicit Permit(ConcurrencyLimiter& owner);
    ~Permit();
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    ConcurrencyLimiter& owner_;
  };

  std::size_t max_in_flight() const noexcept { return max_; }
  std::size_t peak_in_flight() const;

 private:
  void acquire();
  void release();

  std::size_t max_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

struct RemoteChatConfig {
  std::string url;  // e.g. http://host:8000/v1/chat/completions
  std::string model;
  // Sent as "Authorization: Bearer <key>" when non-empty.
  std::string api_key;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::chrono::seconds timeout{120};

  // Copies DRR_API_KEY from the environment into api_key when set.
  RemoteChatConfig& with_env_api_key();
};

// Chat-completion client: POST {model, messages, temperature, top_p,
// max_tokens, seed?} and read choices[0].message.content.
class RemoteChatReasoner final : public Reasoner {
 public:
  explicit RemoteChatReasoner(RemoteChatConfig config);

  std::string generate(const GenerationRequest& request) override;

  static std::string request_body(const RemoteChatConfig& config, const GenerationRequest& request);
  // Throws RemoteError(200, body) when the reply has no message content.
  static std::string content_from_response(const std::string& body);

  const ConcurrencyLimiter& limiter() const noexcept { return limiter_; }

 private:
  RemoteChatConfig config_;
  ConcurrencyLimiter limiter_;
};

struct RemoteCriticConfig {
  std::string url;  // base URL; requests go to <url>/assess
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::chrono::seconds timeout{60};
};

// Client for the critic service: POST /assess {"input"} ->
// {"p_accept", "verdict", "model_version"}.
class RemoteCritic final : public Critic {
 public:
  explicit RemoteCritic(RemoteCriticConfig config);

  CriticScore assess(std::string_view input_text, const TurnSideband* sideband = nullptr) const override;

  // Parses a service reply. Uses the optional "threshold" field when present;
  // otherwise picks 0.5, or the nearest threshold consistent with the
  // reported verdict. p_accept and verdict are always taken verbatim.
  static CriticScore score_from_response(const std::string& body);

  // GET /healthz; returns the reported model_version.
  std::string health() const;

 private:
  RemoteCriticConfig config_;
  mutable ConcurrencyLimiter limiter_;
};

}  // namespace drr
