#include "gazevlm/overlay.hpp"

#include "gazevlm/util.hpp"

#include <json.hpp>
#include <png.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace gazevlm::overlay {

using nlohmann::json;

FrameBuffer FrameBuffer::solid(int w, int h, std::array<std::uint8_t, 3> rgb) {
  FrameBuffer fb;
  fb.width_px = w;
  fb.height_px = h;
  fb.pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < fb.pixels.size(); i += 3) {
    fb.pixels[i] = rgb[0];
    fb.pixels[i + 1] = rgb[1];
    fb.pixels[i + 2] = rgb[2];
  }
  return fb;
}

namespace {

inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

inline std::uint8_t blend_channel(std::uint8_t src, std::uint8_t color, double alpha) {
  const double v = alpha * color + (1.0 - alpha) * src;
  return static_cast<std::uint8_t>(std::clamp(round_half_up(v), 0, 255));
}

FrameBuffer composite_impl(const FrameBuffer& frame,
                           std::optional<std::pair<double, double>> point,
                           const OverlayStyle& style, bool parallel) {
  FrameBuffer out = frame;
  if (!point || style.alpha <= 0.0) return out;

  const int w = frame.width_px;
  const int h = frame.height_px;
  const int cx = round_half_up(point->first * (w - 1));
  const int cy = round_half_up(point->second * (h - 1));
  const int r = style.radius_px;

  const int y0 = std::max(0, cy - r);
  const int y1 = std::min(h - 1, cy + r);
  const int x0 = std::max(0, cx - r);
  const int x1 = std::min(w - 1, cx + r);
  if (y0 > y1 || x0 > x1) return out;

  const long long r2 = static_cast<long long>(r) * r;

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const long long dx = x - cx;
      const long long dy = y - cy;
      const long long d2 = dx * dx + dy * dy;
      if (d2 > r2) continue;
      double a = style.alpha;
      if (style.edge == OverlayStyle::Edge::antialiased) {
        const double d = std::sqrt(static_cast<double>(d2));
        a *= std::clamp(static_cast<double>(r) - d + 0.5, 0.0, 1.0);
      }
      std::uint8_t* px = out.at(x, y);
      for (int c = 0; c < 3; ++c) px[c] = blend_channel(px[c], style.color_rgb[c], a);
    }
  }
  (void)parallel;
  return out;
}

}  // namespace

FrameBuffer composite_gaze(const FrameBuffer& frame,
                           std::optional<std::pair<double, double>> point,
                           const OverlayStyle& style) {
  return composite_impl(frame, point, style, true);
}

FrameBuffer composite_gaze_serial(const FrameBuffer& frame,
                                  std::optional<std::pair<double, double>> point,
                                  const OverlayStyle& style) {
  return composite_impl(frame, point, style, false);
}

std::string ClipManifest::to_json() const {
  json j;
  j["segment_id"] = segment_id;
  j["frame_files"] = frame_files;
  j["fps"] = fps;
  j["fps_rational"] = fps_rational;
  j["style"] = {{"radius_px", style.radius_px},
                {"color_rgb", style.color_rgb},
                {"alpha", style.alpha},
                {"edge", style.edge == OverlayStyle::Edge::hard ? "hard" : "antialiased"},
                {"draw_missing", style.draw_missing}};
  j["frame_checksums"] = frame_checksums;
  return j.dump(2);
}

ClipManifest ClipManifest::from_json(const std::string& text) {
  const json j = json::parse(text);
  ClipManifest m;
  m.segment_id = j.at("segment_id").get<std::string>();
  m.frame_files = j.at("frame_files").get<std::vector<std::string>>();
  m.fps = j.at("fps").get<double>();
  m.fps_rational = j.at("fps_rational").get<std::string>();
  const auto& s = j.at("style");
  m.style.radius_px = s.at("radius_px").get<int>();
  m.style.color_rgb = s.at("color_rgb").get<std::array<std::uint8_t, 3>>();
  m.style.alpha = s.at("alpha").get<double>();
  m.style.edge = s.at("edge").get<std::string>() == "hard" ? OverlayStyle::Edge::hard
                                                           : OverlayStyle::Edge::antialiased;
  m.style.draw_missing = s.at("draw_missing").get<bool>();
  m.frame_checksums = j.at("frame_checksums").get<std::vector<std::string>>();
  return m;
}

namespace {

std::string frame_file_name(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06lld.png", static_cast<long long>(index));
  return buf;
}

}  // namespace

ClipManifest render_segment(const seg::Segment& segment, const FrameSource& frames,
                            const gaze::VideoMeta& meta, const OverlayStyle& style,
                            const std::filesystem::path& out_dir, int workers) {
  std::filesystem::create_directories(out_dir);

  const std::int64_t n = segment.frame_span();
  ClipManifest manifest;
  manifest.segment_id = segment.segment_id;
  manifest.fps = static_cast<double>(meta.fps_num) / static_cast<double>(meta.fps_den);
  manifest.fps_rational =
      std::to_string(meta.fps_num) + "/" + std::to_string(meta.fps_den);
  manifest.style = style;
  manifest.frame_files.resize(static_cast<std::size_t>(n));
  manifest.frame_checksums.resize(static_cast<std::size_t>(n));

  // Effective point per frame; draw_missing holds the last seen point through
  // gaps, otherwise missing frames pass through untouched.
  std::vector<std::optional<std::pair<double, double>>> points(
      static_cast<std::size_t>(n));
  std::optional<std::pair<double, double>> last;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& fg = segment.frame_gaze[static_cast<std::size_t>(i)];
    if (fg.point) last = fg.point;
    points[static_cast<std::size_t>(i)] =
        fg.point ? fg.point : (style.draw_missing ? last : std::nullopt);
  }

  std::exception_ptr first_error;

#ifdef _OPENMP
  const int nthreads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#else
  (void)workers;
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    if (first_error) continue;
    try {
      const std::int64_t frame_index = segment.first_frame + i;
      const auto& pt = points[static_cast<std::size_t>(i)];
      FrameBuffer src = frames(frame_index);
      FrameBuffer composited = pt ? composite_gaze_serial(src, pt, style) : src;
      const std::string name = frame_file_name(frame_index);
      const auto path = out_dir / name;
      write_png(composited, path);
      manifest.frame_files[static_cast<std::size_t>(i)] = name;
      manifest.frame_checksums[static_cast<std::size_t>(i)] =
          util::sha256_file_hex(path);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  util::write_file(out_dir / "manifest.json", manifest.to_json());
  return manifest;
}

namespace {

bool executable_exists(const std::string& exe) {
  namespace fs = std::filesystem;
  if (exe.find('/') != std::string::npos) return fs::exists(exe);
  const char* path_env = std::getenv("PATH");
  if (path_env == nullptr) return false;
  std::stringstream ss(path_env);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (!dir.empty() && fs::exists(fs::path(dir) / exe)) return true;
  }
  return false;
}

std::string substitute(std::string tmpl, const std::string& key, const std::string& val) {
  std::string::size_type pos = 0;
  while ((pos = tmpl.find(key, pos)) != std::string::npos) {
    tmpl.replace(pos, key.size(), val);
    pos += val.size();
  }
  return tmpl;
}

}  // namespace

std::filesystem::path encode_clip(const ClipManifest& manifest,
                                  const std::filesystem::path& clip_dir,
                                  const std::string& encoder_cmd_template,
                                  const std::filesystem::path& out_path) {
  std::string cmd = encoder_cmd_template;
  cmd = substitute(cmd, "{fps}", manifest.fps_rational);
  cmd = substitute(cmd, "{frames_glob}", (clip_dir / "frame_*.png").string());
  cmd = substitute(cmd, "{frames_pattern}", (clip_dir / "frame_%06d.png").string());
  cmd = substitute(cmd, "{out}", out_path.string());

  const std::string exe = cmd.substr(0, cmd.find(' '));
  if (!executable_exists(exe)) throw EncoderMissing(exe);

  const auto stderr_file = out_path.string() + ".stderr";
  const std::string full = cmd + " 2>" + stderr_file;
  const int status = std::system(full.c_str());
  const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;

  std::string stderr_excerpt;
  if (std::filesystem::exists(stderr_file)) {
    stderr_excerpt = util::read_file(stderr_file).substr(0, 500);
    std::filesystem::remove(stderr_file);
  }
  if (exit_code != 0) throw EncoderFailed(exit_code, stderr_excerpt);
  if (!std::filesystem::exists(out_path)) throw EncoderFailed(0, "no output produced");
  return out_path;
}

void write_png(const FrameBuffer& frame, const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (fp == nullptr) throw IoFailure(path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoFailure(path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width_px),
               static_cast<png_uint_32>(frame.height_px), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < frame.height_px; ++y)
    png_write_row(png, const_cast<png_bytep>(frame.at(0, y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

FrameBuffer read_png(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (fp == nullptr) throw IoFailure(path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoFailure(path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  FrameBuffer fb;
  fb.width_px = static_cast<int>(png_get_image_width(png, info));
  fb.height_px = static_cast<int>(png_get_image_height(png, info));
  fb.pixels.resize(static_cast<std::size_t>(fb.width_px) * fb.height_px * 3);
  for (int y = 0; y < fb.height_px; ++y) png_read_row(png, fb.at(0, y), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return fb;
}

}  // namespace gazevlm::overlay
