#include "drr/remote.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "drr/errors.hpp"

namespace drr {

std::chrono::milliseconds RetryPolicy::delay_before_retry(int k) const {
  const double scale = std::pow(backoff_factor, std::max(k - 1, 0));
  return std::chrono::milliseconds(static_cast<long long>(static_cast<double>(initial_delay.count()) * scale));
}

bool is_retryable_status(int status) noexcept { return status == 0 || status == 429 || status >= 500; }

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t max_in_flight) : max_(std::max<std::size_t>(max_in_flight, 1)) {}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < max_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::size_t ConcurrencyLimiter::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

ConcurrencyLimiter::Permit::Permit(ConcurrencyLimiter& owner) : owner_(owner) { owner_.acquire(); }
ConcurrencyLimiter::Permit::~Permit() { owner_.release(); }

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string join_path(std::string base, std::string_view leaf) {
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + std::string(leaf);
}

// Issues `call` until it yields a 2xx or a non-retryable status, sleeping per
// the policy between attempts.
template <typename Call>
std::string with_retries(const RetryPolicy& policy, Call&& call) {
  for (int attempt = 0;; ++attempt) {
    httplib::Result res = call();
    int status = 0;
    std::string body;
    if (res) {
      status = res->status;
      body = res->body;
      if (status >= 200 && status < 300) return body;
    } else {
      body = httplib::to_string(res.error());
    }
    if (!is_retryable_status(status) || attempt >= policy.max_retries) throw RemoteError(status, body);
    std::this_thread::sleep_for(policy.delay_before_retry(attempt + 1));
  }
}

httplib::Client make_client(const std::string& origin, std::chrono::seconds timeout) {
  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(), 0);
  client.set_read_timeout(timeout.count(), 0);
  client.set_write_timeout(timeout.count(), 0);
  return client;
}

}  // namespace

RemoteChatConfig& RemoteChatConfig::with_env_api_key() {
  if (const char* key = std::getenv("DRR_API_KEY"); key != nullptr && *key != '\0') api_key = key;
  return *this;
}

RemoteChatReasoner::RemoteChatReasoner(RemoteChatConfig config)
    : config_(std::move(config)), limiter_(config_.max_in_flight) {
  split_url(config_.url);
}

std::string RemoteChatReasoner::request_body(const RemoteChatConfig& config, const GenerationRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  nlohmann::json body{{"model", config.model},
                      {"messages", std::move(messages)},
                      {"temperature", request.params.temperature},
                      {"top_p", request.params.top_p},
                      {"max_tokens", request.params.max_new_tokens}};
  if (request.params.seed) body["seed"] = *request.params.seed;
  return body.dump();
}

std::string RemoteChatReasoner::content_from_response(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw RemoteError(200, "response lacks choices[0].message.content: " + body);
  }
}

std::string RemoteChatReasoner::generate(const GenerationRequest& request) {
  if (request.messages.empty()) throw std::invalid_argument("generate needs at least one message");
  const Endpoint ep = split_url(config_.url);
  const std::string body = request_body(config_, request);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  ConcurrencyLimiter::Permit permit(limiter_);
  auto client = make_client(ep.origin, config_.timeout);
  const std::string reply =
      with_retries(config_.retry, [&] { return client.Post(ep.path, headers, body, "application/json"); });
  return content_from_response(reply);
}

RemoteCritic::RemoteCritic(RemoteCriticConfig config) : config_(std::move(config)), limiter_(config_.max_in_flight) {
  split_url(config_.url);
}

CriticScore RemoteCritic::score_from_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw RemoteError(200, "critic reply is not JSON: " + body);
  }
  if (!j.contains("p_accept") || !j["p_accept"].is_number() || !j.contains("verdict") || !j["verdict"].is_string()) {
    throw RemoteError(200, "critic reply lacks p_accept/verdict: " + body);
  }
  const double p = j["p_accept"].get<double>();
  const std::string v = j["verdict"].get<std::string>();
  if (!(p >= 0.0 && p <= 1.0) || (v != "accept" && v != "reject")) {
    throw RemoteError(200, "critic reply out of contract: " + body);
  }
  const Verdict verdict = v == "accept" ? Verdict::Accept : Verdict::Reject;

  double threshold = 0.5;
  if (auto it = j.find("threshold"); it != j.end() && it->is_number()) {
    threshold = it->get<double>();
  } else if (verdict == Verdict::Accept && p < threshold) {
    threshold = p;
  } else if (verdict == Verdict::Reject && p >= threshold) {
    threshold = std::nextafter(p, 2.0);
  }
  CriticScore score{p, verdict, threshold};
  if ((p >= threshold) != (verdict == Verdict::Accept) || !(threshold > 0.0 && threshold <= 1.0)) {
    throw RemoteError(200, "critic verdict inconsistent with its threshold: " + body);
  }
  return score;
}

CriticScore RemoteCritic::assess(std::string_view input_text, const TurnSideband*) const {
  if (input_text.empty()) throw std::invalid_argument("critic input must be non-empty");
  const Endpoint ep = split_url(join_path(config_.url, "/assess"));
  const std::string body = nlohmann::json{{"input", std::string(input_text)}}.dump();
  ConcurrencyLimiter::Permit permit(limiter_);
  auto client = make_client(ep.origin, config_.timeout);
  const std::string reply =
      with_retries(config_.retry, [&] { return client.Post(ep.path, body, "application/json"); });
  return score_from_response(reply);
}

std::string RemoteCritic::health() const {
  const Endpoint ep = split_url(join_path(config_.url, "/healthz"));
  auto client = make_client(ep.origin, config_.timeout);
  const std::string reply = with_retries(config_.retry, [&] { return client.Get(ep.path); });
  try {
    const auto j = nlohmann::json::parse(reply);
    if (j.at("status").get<std::string>() != "ok") throw RemoteError(200, reply);
    return j.value("model_version", std::string());
  } catch (const nlohmann::json::exception&) {
    throw RemoteError(200, "bad health reply: " + reply);
  }
}

}  // namespace drr
