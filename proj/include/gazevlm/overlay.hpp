#pragma once

#include "gazevlm/segment.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazevlm::overlay {

struct OverlayStyle {
  int radius_px = 30;
  std::array<std::uint8_t, 3> color_rgb = {255, 0, 0};
  double alpha = 0.45;
  enum class Edge { hard, antialiased } edge = Edge::hard;
  bool draw_missing = false;
};

struct FrameBuffer {
  int width_px = 0;
  int height_px = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB8

  static FrameBuffer solid(int w, int h, std::array<std::uint8_t, 3> rgb);
  std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (y * width_px + x); }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + 3 * (y * width_px + x);
  }
};

struct ClipManifest {
  std::string segment_id;
  std::vector<std::string> frame_files;  // in frame order
  double fps = 0.0;
  std::string fps_rational;  // "num/den"
  OverlayStyle style;
  std::vector<std::string> frame_checksums;  // sha256 hex per frame file

  std::string to_json() const;
  static ClipManifest from_json(const std::string& text);
};

struct FrameSourceGap : std::runtime_error {
  std::int64_t frame_index;
  explicit FrameSourceGap(std::int64_t idx)
      : std::runtime_error("frame source cannot supply frame " + std::to_string(idx)),
        frame_index(idx) {}
};

struct IoFailure : std::runtime_error {
  explicit IoFailure(const std::string& path) : std::runtime_error("io failure: " + path) {}
};

struct EncoderMissing : std::runtime_error {
  explicit EncoderMissing(const std::string& exe)
      : std::runtime_error("encoder executable not found: " + exe) {}
};

struct EncoderFailed : std::runtime_error {
  int exit_code;
  std::string stderr_excerpt;
  EncoderFailed(int code, std::string excerpt)
      : std::runtime_error("encoder exited with code " + std::to_string(code)),
        exit_code(code),
        stderr_excerpt(std::move(excerpt)) {}
};

// Supplies source frames by index.
using FrameSource = std::function<FrameBuffer(std::int64_t frame_index)>;

// Tints the disk around the gaze point; pixels outside the disk are untouched.
// Parallel over rows when OpenMP is enabled.
FrameBuffer composite_gaze(const FrameBuffer& frame,
                           std::optional<std::pair<double, double>> point,
                           const OverlayStyle& style);

// Single-threaded reference kernel; must match composite_gaze byte for byte.
FrameBuffer composite_gaze_serial(const FrameBuffer& frame,
                                  std::optional<std::pair<double, double>> point,
                                  const OverlayStyle& style);

ClipManifest render_segment(const seg::Segment& segment, const FrameSource& frames,
                            const gaze::VideoMeta& meta, const OverlayStyle& style,
                            const std::filesystem::path& out_dir, int workers = 0);

std::filesystem::path encode_clip(const ClipManifest& manifest,
                                  const std::filesystem::path& clip_dir,
                                  const std::string& encoder_cmd_template,
                                  const std::filesystem::path& out_path);

// PNG, 8-bit RGB only.
void write_png(const FrameBuffer& frame, const std::filesystem::path& path);
FrameBuffer read_png(const std::filesystem::path& path);

}  // namespace gazevlm::overlay
