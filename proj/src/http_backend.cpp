#include "gazevlm/vlm.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>

namespace gazevlm::vlm {

using nlohmann::json;

namespace {

std::string base64_encode(const std::string& in) {
  static const char* table =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < in.size()) {
    const unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                       (static_cast<unsigned char>(in[i + 1]) << 8) |
                       static_cast<unsigned char>(in[i + 2]);
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(table[(v >> 6) & 63]);
    out.push_back(table[v & 63]);
    i += 3;
  }
  if (i + 1 == in.size()) {
    const unsigned v = static_cast<unsigned char>(in[i]) << 16;
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == in.size()) {
    const unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                       (static_cast<unsigned char>(in[i + 1]) << 8);
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(table[(v >> 6) & 63]);
    out += "=";
  }
  return out;
}

// Splits "http://host:port/path" into (scheme://host:port, /path).
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start =
      url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config, std::shared_ptr<Clock> clock,
                         std::uint64_t jitter_seed)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      limiter_(std::make_unique<RateLimiter>(config_.rate_limit_per_min, clock_)),
      jitter_rng_(jitter_seed) {}

std::string HttpBackend::build_body(const VlmRequest& request) const {
  json body;
  body["model"] = request.model_id;
  body["temperature"] = request.generation.temperature;
  body["max_output_tokens"] = request.generation.max_output_tokens;
  if (request.generation.seed) body["seed"] = *request.generation.seed;
  body["system"] = request.bundle.system_text;

  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.bundle.user_text}});
  for (const auto& media_path : request.bundle.media) {
    content.push_back({{"type", "video"},
                       {"name", std::filesystem::path(media_path).filename().string()},
                       {"data_b64", base64_encode(util::read_file(media_path))}});
  }
  body["messages"] = json::array({{{"role", "user"}, {"content", content}}});
  return body.dump();
}

std::string HttpBackend::extract_text(const std::string& response_body,
                                      const std::string& adapter) {
  const json j = json::parse(response_body);
  if (adapter == "openai")
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  // generic: {"text": "..."} with optional token counts
  return j.at("text").get<std::string>();
}

VlmResponse HttpBackend::classify(const VlmRequest& request) {
  const char* key = std::getenv(config_.auth_env_var.c_str());
  if (key == nullptr || *key == '\0') throw AuthMissing(config_.auth_env_var);

  const auto [origin, path] = split_url(config_.endpoint_url);
  const std::string body = build_body(request);

  std::string last_error;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    limiter_->acquire();

    httplib::Client client(origin);
    client.set_connection_timeout(0, config_.timeout_ms * 1000LL);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

    const auto t0 = clock_->now_ms();
    auto res = client.Post(path, headers, body, "application/json");
    const auto t1 = clock_->now_ms();

    if (res && res->status == 200) {
      VlmResponse out;
      out.request_id = request.request_id;
      out.text = extract_text(res->body, config_.adapter);
      out.latency_ms = t1 - t0;
      out.backend_tag = tag();
      try {
        const json j = json::parse(res->body);
        if (j.contains("prompt_tokens")) out.prompt_tokens = j["prompt_tokens"].get<std::int64_t>();
        if (j.contains("output_tokens")) out.output_tokens = j["output_tokens"].get<std::int64_t>();
      } catch (...) {
      }
      return out;
    }

    if (res && !retryable_status(res->status))
      throw Transport("HTTP " + std::to_string(res->status) + ": " +
                      res->body.substr(0, 300));
    last_error = res ? "HTTP " + std::to_string(res->status)
                     : "connection error (" + httplib::to_string(res.error()) + ")";

    if (attempt < config_.retry.max_attempts) {
      double jitter_factor;
      {
        std::lock_guard lock(jitter_mutex_);
        jitter_factor = 1.0 + config_.retry.jitter * jitter_rng_.unit_double();
      }
      const auto backoff = static_cast<std::int64_t>(
          config_.retry.base_backoff_ms * std::pow(2.0, attempt - 1) * jitter_factor);
      clock_->sleep_ms(backoff);
    }
  }
  throw Transport(last_error + " after " + std::to_string(config_.retry.max_attempts) +
                  " attempts");
}

}  // namespace gazevlm::vlm
