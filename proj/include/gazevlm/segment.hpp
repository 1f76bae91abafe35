#pragma once

#include "gazevlm/gaze.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazevlm::seg {

struct ProbePoint {
  std::string participant_id;
  std::string probe_id;
  std::int64_t video_time_us = 0;  // relative to video start
  int rating = 0;                  // 0..5
};

enum class AttentionLabel : int { inattentive = 0, attentive = 1 };

struct Segment {
  std::string segment_id;  // "<participant_id>:<probe_id>"
  std::string participant_id;
  std::string probe_id;
  std::int64_t start_us = 0;  // video-relative
  std::int64_t end_us = 0;    // == probe time
  std::int64_t first_frame = 0;
  std::int64_t last_frame = -1;  // inclusive; last < first means empty
  std::vector<gaze::FrameGaze> frame_gaze;
  AttentionLabel label = AttentionLabel::attentive;
  std::int64_t effective_duration_us = 0;

  std::int64_t frame_span() const {
    return last_frame < first_frame ? 0 : last_frame - first_frame + 1;
  }
};

struct ClassDistribution {
  std::int64_t n0 = 0;
  std::int64_t n1 = 0;
  double p0 = 0.0;
  double p1 = 0.0;
};

struct RatingOutOfRange : std::runtime_error {
  explicit RatingOutOfRange(int rating)
      : std::runtime_error("rating out of range: " + std::to_string(rating)) {}
};

struct ProbeBeyondVideo : std::runtime_error {
  explicit ProbeBeyondVideo(const std::string& probe_id)
      : std::runtime_error("probe beyond video end: " + probe_id) {}
};

struct EmptyLabelSet : std::runtime_error {
  EmptyLabelSet() : std::runtime_error("empty label set") {}
};

constexpr std::int64_t kDefaultWindowUs = 20'000'000;

AttentionLabel threshold_rating(int rating);

Segment extract_segment(const gaze::GazeTrace& trace, const ProbePoint& probe,
                        const gaze::VideoMeta& meta,
                        const gaze::ResamplePolicy& policy = {},
                        std::int64_t window_us = kDefaultWindowUs);

ClassDistribution class_distribution(const std::vector<AttentionLabel>& labels);

// Probe file: JSON array of {participant_id, probe_id, video_time_us, rating}.
std::vector<ProbePoint> parse_probe_json(const std::string& json_text);

// Segment manifest entry (metadata only, no per-frame gaze).
std::string segments_to_json(const std::vector<Segment>& segments);

}  // namespace gazevlm::seg
