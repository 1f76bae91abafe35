#pragma once

#include "gazevlm/metrics.hpp"
#include "gazevlm/overlay.hpp"
#include "gazevlm/vlm.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazevlm::pipeline {

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct FrameSourceConfig {
  enum class Type { synthetic, png_dir } type = Type::synthetic;
  std::filesystem::path png_dir;
  std::uint64_t synthetic_seed = 0;
};

struct StrategyConfig {
  prompt::StrategyKind kind;
  std::uint64_t seed = 0;
};

struct BackendChoice {
  enum class Type { mock, replay, http } type = Type::mock;
  // mock: classify by on-content gaze fraction against a threshold
  double mock_threshold = 0.6;
  std::filesystem::path cache_file;  // replay source / http recording target
  vlm::BackendConfig http;
};

struct EvalOptions {
  bool baselines = true;
  int simulate_trials = 0;  // 0 = analytic rows only
  seg::AttentionLabel fallback_class = seg::AttentionLabel::attentive;
  bool exclude_same_participant = true;
};

struct ExperimentConfig {
  std::filesystem::path gaze_dir;
  std::filesystem::path probe_file;
  FrameSourceConfig frames;
  std::filesystem::path out_dir;

  gaze::VideoMeta video;
  gaze::ResamplePolicy resample;
  overlay::OverlayStyle style;
  std::vector<StrategyConfig> strategies;
  BackendChoice backend;
  std::string model_id = "vlm-default";
  std::optional<std::string> encoder_cmd_template;
  std::optional<std::filesystem::path> prompt_template_dir;
  EvalOptions eval;
  std::uint64_t seed = 0;
  int workers = 0;

  std::string config_hash;  // sha256 of the raw config text
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);
void validate(const ExperimentConfig& cfg);

// Deterministic synthetic lecture frames for fixtures and tests.
overlay::FrameBuffer synthetic_frame(int width, int height, std::int64_t frame_index,
                                     std::uint64_t seed);

overlay::FrameSource make_frame_source(const ExperimentConfig& cfg);

struct StageStatus {
  std::string name;
  bool completed = false;
  std::string output_checksum;  // sha256 over stage output files
  std::string error;
};

struct RunManifest {
  std::string config_hash;
  std::string toolkit_version;
  std::vector<StageStatus> stages;
  std::int64_t segment_count = 0;
  std::string started_at;
  std::string finished_at;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

// Parses all gaze logs and probes and cuts labeled segments. Deterministic.
std::vector<seg::Segment> ingest(const ExperimentConfig& cfg);

struct IngestOutput {
  std::int64_t segment_count = 0;
  seg::ClassDistribution distribution;
};
IngestOutput cmd_ingest(const ExperimentConfig& cfg);

struct RenderOutput {
  int rendered = 0;
  int skipped = 0;
  std::vector<std::string> clip_dirs;
};
RenderOutput cmd_render(const ExperimentConfig& cfg,
                        const std::vector<std::string>& segment_filter = {},
                        bool dry_run = false, bool force = false);

struct ClassifyOutput {
  int succeeded = 0;
  int failed = 0;
  std::filesystem::path predictions_file;
};
ClassifyOutput cmd_classify(const ExperimentConfig& cfg, const StrategyConfig& strategy);

struct EvaluateOutput {
  std::filesystem::path report_json;
  std::filesystem::path report_text;
  std::vector<metrics::MethodRow> rows;
};
EvaluateOutput cmd_evaluate(const ExperimentConfig& cfg);

RunManifest cmd_run(const ExperimentConfig& cfg);

// Per-segment on-content gaze fraction, feeds the scripted mock backend.
std::map<std::string, double> gaze_statistics(const std::vector<seg::Segment>& segments);

std::filesystem::path predictions_path(const ExperimentConfig& cfg,
                                       const prompt::StrategyKind& kind);

}  // namespace gazevlm::pipeline
