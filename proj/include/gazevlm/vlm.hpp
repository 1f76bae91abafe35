#pragma once

#include "gazevlm/prompt.hpp"
#include "gazevlm/util.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazevlm::vlm {

struct GenerationParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;
  std::optional<std::int64_t> seed;
};

struct VlmRequest {
  std::string request_id;  // content hash, see make_request
  prompt::PromptBundle bundle;
  std::string model_id;
  GenerationParams generation;
};

struct VlmResponse {
  std::string request_id;
  std::string text;
  std::int64_t latency_ms = 0;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> output_tokens;
  std::string backend_tag;
};

struct RetryPolicy {
  int max_attempts = 3;
  int base_backoff_ms = 500;
  double jitter = 0.25;
};

struct BackendConfig {
  std::string endpoint_url;
  std::string auth_env_var = "GAZEVLM_API_KEY";
  int max_in_flight = 4;
  int rate_limit_per_min = 60;
  RetryPolicy retry;
  int timeout_ms = 120'000;
  std::string adapter = "generic";
};

struct AuthMissing : std::runtime_error {
  explicit AuthMissing(const std::string& var)
      : std::runtime_error("credential environment variable not set: " + var) {}
};

struct Transport : std::runtime_error {
  explicit Transport(const std::string& detail)
      : std::runtime_error("transport failure: " + detail) {}
};

struct ReplayMiss : std::runtime_error {
  std::string request_id;
  explicit ReplayMiss(const std::string& id)
      : std::runtime_error("no cached response for request " + id), request_id(id) {}
};

struct CacheConflict : std::runtime_error {
  std::string request_id;
  explicit CacheConflict(const std::string& id)
      : std::runtime_error("conflicting payload for cached request " + id), request_id(id) {}
};

// Hashes bundle text, media content checksums, model id, and generation
// params; relocating a media file does not change the id.
VlmRequest make_request(const prompt::PromptBundle& bundle, const std::string& model_id,
                        const GenerationParams& params,
                        const std::function<std::string(const std::string&)>& media_checksum);

// Default media_checksum: sha256 of file contents.
VlmRequest make_request(const prompt::PromptBundle& bundle, const std::string& model_id,
                        const GenerationParams& params = {});

class Backend {
 public:
  virtual ~Backend() = default;
  virtual VlmResponse classify(const VlmRequest& request) = 0;
  virtual std::string tag() const = 0;
};

// Scripted test double: answers from a per-segment rule.
class MockBackend : public Backend {
 public:
  using Script = std::function<std::string(const VlmRequest&)>;
  explicit MockBackend(Script script) : script_(std::move(script)) {}

  // Convenience: classify by a per-segment statistic against a threshold
  // (e.g. on-content gaze fraction), emitting a schema-conformant block.
  static MockBackend from_statistic(std::map<std::string, double> stat_by_segment,
                                    double threshold);

  // Fixed label per segment id; unknown segments get free text with no label.
  static MockBackend from_labels(std::map<std::string, seg::AttentionLabel> labels);

  VlmResponse classify(const VlmRequest& request) override;
  std::string tag() const override { return "mock"; }

 private:
  Script script_;
};

// Append-only JSON-lines store of (request summary, response) pairs.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path path);

  void record(const VlmRequest& request, const VlmResponse& response);
  std::optional<VlmResponse> lookup(const std::string& request_id) const;
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, VlmResponse> entries_;
};

class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(std::shared_ptr<ResponseCache> cache) : cache_(std::move(cache)) {}
  VlmResponse classify(const VlmRequest& request) override;
  std::string tag() const override { return "replay"; }

 private:
  std::shared_ptr<ResponseCache> cache_;
};

// Injectable clock so limiter tests run on virtual time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
  virtual void sleep_ms(std::int64_t ms) = 0;
};

std::shared_ptr<Clock> system_clock();

// Sliding-window limiter: at most `per_minute` admissions in any 60 s window.
class RateLimiter {
 public:
  RateLimiter(int per_minute, std::shared_ptr<Clock> clock, bool blocking = true);

  // Blocks until admission (blocking mode) or throws RateLimitExceeded.
  void acquire();

 private:
  int per_minute_;
  bool blocking_;
  std::shared_ptr<Clock> clock_;
  std::mutex mutex_;
  std::vector<std::int64_t> admissions_ms_;
};

struct RateLimitExceeded : std::runtime_error {
  RateLimitExceeded() : std::runtime_error("rate limit exceeded") {}
};

// Generic multimodal HTTP backend; media is inlined base64 in a JSON body.
class HttpBackend : public Backend {
 public:
  HttpBackend(BackendConfig config, std::shared_ptr<Clock> clock = system_clock(),
              std::uint64_t jitter_seed = 0);
  VlmResponse classify(const VlmRequest& request) override;
  std::string tag() const override { return "http:" + config_.adapter; }

  // Wire-format builders, exposed for testing without a live endpoint.
  std::string build_body(const VlmRequest& request) const;
  static std::string extract_text(const std::string& response_body,
                                  const std::string& adapter);

 private:
  BackendConfig config_;
  std::shared_ptr<Clock> clock_;
  std::unique_ptr<RateLimiter> limiter_;
  std::mutex jitter_mutex_;
  util::Rng jitter_rng_;
};

struct BatchResult {
  std::optional<VlmResponse> response;
  std::string error;  // empty on success
  bool ok() const { return response.has_value(); }
};

using ProgressSink = std::function<void(std::size_t done, std::size_t total)>;

// Resolves every request; results come back in input order. Per-request
// failures are captured, never aborting the batch.
std::vector<BatchResult> run_batch(const std::vector<VlmRequest>& requests,
                                   Backend& backend, int max_in_flight,
                                   const ProgressSink& progress = {});

}  // namespace gazevlm::vlm
