#include "gazevlm/vlm.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace gazevlm::vlm {

using nlohmann::json;

namespace {

std::string default_media_checksum(const std::string& path) {
  return util::sha256_file_hex(path);
}

}  // namespace

VlmRequest make_request(const prompt::PromptBundle& bundle, const std::string& model_id,
                        const GenerationParams& params,
                        const std::function<std::string(const std::string&)>& media_checksum) {
  json canon;
  canon["system_text"] = bundle.system_text;
  canon["user_text"] = bundle.user_text;
  canon["schema_hint"] = bundle.response_schema_hint;
  canon["strategy"] = bundle.strategy.name();
  canon["segment"] = bundle.target_segment_id;
  if (bundle.blind_mapping)
    canon["blind_a"] = static_cast<int>(bundle.blind_mapping->class_a);
  json media = json::array();
  for (const auto& m : bundle.media) media.push_back(media_checksum(m));
  canon["media"] = media;
  canon["model_id"] = model_id;
  canon["temperature"] = params.temperature;
  canon["max_output_tokens"] = params.max_output_tokens;
  if (params.seed) canon["seed"] = *params.seed;

  VlmRequest req;
  req.request_id = util::sha256_hex(canon.dump());
  req.bundle = bundle;
  req.model_id = model_id;
  req.generation = params;
  return req;
}

VlmRequest make_request(const prompt::PromptBundle& bundle, const std::string& model_id,
                        const GenerationParams& params) {
  return make_request(bundle, model_id, params, default_media_checksum);
}

MockBackend MockBackend::from_statistic(std::map<std::string, double> stat_by_segment,
                                        double threshold) {
  return MockBackend([stats = std::move(stat_by_segment), threshold](const VlmRequest& req) {
    const auto it = stats.find(req.bundle.target_segment_id);
    const double v = it != stats.end() ? it->second : 0.0;
    const bool attentive = v >= threshold;
    std::string label = attentive ? "Attentive" : "Inattentive";
    if (req.bundle.blind_mapping) {
      const auto cls = attentive ? seg::AttentionLabel::attentive
                                 : seg::AttentionLabel::inattentive;
      label = (cls == req.bundle.blind_mapping->class_a) ? "Class A" : "Class B";
    }
    std::string text = "CLASSIFICATION: " + label + "\n";
    if (req.bundle.strategy.variant == prompt::Strategy::heuristic_cot)
      text += "ALIGNMENT: " + std::to_string(static_cast<int>(std::lround(v * 100))) + "\n";
    text += "JUSTIFICATION: scripted response from gaze statistic " +
            std::to_string(v) + "\n";
    text += "EVIDENCE:\n- on-content gaze fraction " + std::to_string(v) + "\n";
    return text;
  });
}

MockBackend MockBackend::from_labels(std::map<std::string, seg::AttentionLabel> labels) {
  return MockBackend([labels = std::move(labels)](const VlmRequest& req) -> std::string {
    const auto it = labels.find(req.bundle.target_segment_id);
    if (it == labels.end()) return "no determination possible";
    const bool attentive = it->second == seg::AttentionLabel::attentive;
    std::string label = attentive ? "Attentive" : "Inattentive";
    if (req.bundle.blind_mapping)
      label = (it->second == req.bundle.blind_mapping->class_a) ? "Class A" : "Class B";
    return "CLASSIFICATION: " + label + "\nJUSTIFICATION: scripted\nEVIDENCE:\n- scripted\n";
  });
}

VlmResponse MockBackend::classify(const VlmRequest& request) {
  VlmResponse resp;
  resp.request_id = request.request_id;
  resp.text = script_(request);
  resp.latency_ms = 0;
  resp.backend_tag = tag();
  return resp;
}

namespace {

json response_to_json(const VlmResponse& r) {
  json j;
  j["request_id"] = r.request_id;
  j["text"] = r.text;
  j["latency_ms"] = r.latency_ms;
  if (r.prompt_tokens) j["prompt_tokens"] = *r.prompt_tokens;
  if (r.output_tokens) j["output_tokens"] = *r.output_tokens;
  j["backend_tag"] = r.backend_tag;
  return j;
}

VlmResponse response_from_json(const json& j) {
  VlmResponse r;
  r.request_id = j.at("request_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.latency_ms = j.value("latency_ms", 0);
  if (j.contains("prompt_tokens")) r.prompt_tokens = j["prompt_tokens"].get<std::int64_t>();
  if (j.contains("output_tokens")) r.output_tokens = j["output_tokens"].get<std::int64_t>();
  r.backend_tag = j.value("backend_tag", "");
  return r;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    VlmResponse r = response_from_json(j.at("response"));
    entries_[r.request_id] = std::move(r);
  }
}

void ResponseCache::record(const VlmRequest& request, const VlmResponse& response) {
  if (request.request_id != response.request_id)
    throw CacheConflict(request.request_id);

  std::lock_guard lock(mutex_);
  const auto it = entries_.find(request.request_id);
  if (it != entries_.end()) {
    if (it->second.text != response.text) throw CacheConflict(request.request_id);
    return;  // idempotent
  }

  json j;
  j["request_id"] = request.request_id;
  j["request"] = {{"strategy", request.bundle.strategy.name()},
                  {"segment_id", request.bundle.target_segment_id},
                  {"model_id", request.model_id}};
  j["response"] = response_to_json(response);

  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to cache: " + path_.string());
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("cache write failed: " + path_.string());

  entries_[request.request_id] = response;
}

std::optional<VlmResponse> ResponseCache::lookup(const std::string& request_id) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(request_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

VlmResponse ReplayBackend::classify(const VlmRequest& request) {
  auto hit = cache_->lookup(request.request_id);
  if (!hit) throw ReplayMiss(request.request_id);
  hit->backend_tag = tag();
  return *hit;
}

namespace {

class SystemClock : public Clock {
 public:
  std::int64_t now_ms() override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }
  void sleep_ms(std::int64_t ms) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }
};

}  // namespace

std::shared_ptr<Clock> system_clock() { return std::make_shared<SystemClock>(); }

RateLimiter::RateLimiter(int per_minute, std::shared_ptr<Clock> clock, bool blocking)
    : per_minute_(per_minute), blocking_(blocking), clock_(std::move(clock)) {}

void RateLimiter::acquire() {
  for (;;) {
    std::int64_t wait_ms = 0;
    {
      std::lock_guard lock(mutex_);
      const std::int64_t now = clock_->now_ms();
      std::erase_if(admissions_ms_, [&](std::int64_t t) { return now - t >= 60'000; });
      if (static_cast<int>(admissions_ms_.size()) < per_minute_) {
        admissions_ms_.push_back(now);
        return;
      }
      if (!blocking_) throw RateLimitExceeded();
      wait_ms = admissions_ms_.front() + 60'000 - now;
    }
    clock_->sleep_ms(std::max<std::int64_t>(wait_ms, 1));
  }
}

std::vector<BatchResult> run_batch(const std::vector<VlmRequest>& requests,
                                   Backend& backend, int max_in_flight,
                                   const ProgressSink& progress) {
  const std::size_t n = requests.size();
  std::vector<BatchResult> results(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i].response = backend.classify(requests[i]);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
      const std::size_t d = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, n);
      }
    }
  };

  const int workers = std::max(1, std::min<int>(max_in_flight, static_cast<int>(n)));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return results;
}

}  // namespace gazevlm::vlm
