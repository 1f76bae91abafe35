#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazevlm::gaze {

struct GazeSample {
  std::int64_t timestamp_us = 0;  // UTC microseconds
  double x = 0.0;                 // normalized [0,1] when valid
  double y = 0.0;
  bool valid = false;
  std::optional<double> pupil_mm;
};

struct GazeTrace {
  std::string participant_id;
  std::vector<GazeSample> samples;  // strictly increasing timestamps
};

// fps is an exact rational; frame mapping never goes through floating point.
struct VideoMeta {
  std::int64_t fps_num = 25;
  std::int64_t fps_den = 1;
  int width_px = 1280;
  int height_px = 720;
  std::int64_t start_timestamp_us = 0;
  std::int64_t duration_us = 0;

  std::int64_t frame_count() const;
};

enum class FrameGazeSource { exact, interpolated, held, missing };

struct FrameGaze {
  std::int64_t frame_index = 0;
  std::optional<std::pair<double, double>> point;  // absent iff source == missing
  FrameGazeSource source = FrameGazeSource::missing;
};

struct ResamplePolicy {
  enum class Mode { nearest_then_interpolate, hold_last } mode =
      Mode::nearest_then_interpolate;
  std::int64_t gap_threshold_us = 100'000;
  std::int64_t hold_horizon_us = 500'000;  // hold_last only
};

struct MalformedRow : std::runtime_error {
  int line_no;
  explicit MalformedRow(int line, const std::string& what)
      : std::runtime_error("malformed row at line " + std::to_string(line) + ": " + what),
        line_no(line) {}
};

struct NonMonotonicTimestamp : std::runtime_error {
  int line_no;
  explicit NonMonotonicTimestamp(int line)
      : std::runtime_error("non-monotonic timestamp at line " + std::to_string(line)),
        line_no(line) {}
};

struct EmptyTrace : std::runtime_error {
  EmptyTrace() : std::runtime_error("gaze log contains no data rows") {}
};

struct OutOfRange : std::runtime_error {
  explicit OutOfRange(const std::string& what) : std::runtime_error(what) {}
};

// Maps CSV header names onto the canonical fields. pupil is optional.
struct CsvSchema {
  std::string timestamp_us = "timestamp_us";
  std::string x = "x";
  std::string y = "y";
  std::string validity = "validity";
  std::string pupil_mm = "pupil_mm";
};

GazeTrace parse_gaze_csv(std::istream& stream, const CsvSchema& schema,
                         const std::string& participant_id);
void serialize_gaze_csv(const GazeTrace& trace, std::ostream& out,
                        const CsvSchema& schema);

// floor((t - start) * fps / 1e6), exact integer arithmetic.
std::int64_t map_to_frame(std::int64_t timestamp_us, const VideoMeta& meta);

// Frame index for an offset from video start (same arithmetic, no range check).
std::int64_t frame_for_offset(std::int64_t offset_us, const VideoMeta& meta);

// Midpoint time of frame f as an offset from video start, rounded down to µs.
std::int64_t frame_midpoint_offset_us(std::int64_t frame_index, const VideoMeta& meta);

std::vector<FrameGaze> resample_to_frames(const GazeTrace& trace, const VideoMeta& meta,
                                          const ResamplePolicy& policy);

}  // namespace gazevlm::gaze
