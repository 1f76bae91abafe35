#include "gazevlm/gaze.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace gazevlm::gaze {

namespace {

using i128 = __int128;

std::int64_t floor_div_i128(i128 num, i128 den) {
  i128 q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return static_cast<std::int64_t>(q);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "0" || s == "false" || s == "False" || s == "FALSE") return false;
  return std::nullopt;
}

}  // namespace

std::int64_t VideoMeta::frame_count() const {
  return floor_div_i128(static_cast<i128>(duration_us) * fps_num,
                        static_cast<i128>(fps_den) * 1'000'000);
}

GazeTrace parse_gaze_csv(std::istream& stream, const CsvSchema& schema,
                         const std::string& participant_id) {
  std::string line;
  if (!std::getline(stream, line)) throw EmptyTrace();

  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name, bool required) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw MalformedRow(1, "missing column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };
  const int c_ts = col(schema.timestamp_us, true);
  const int c_x = col(schema.x, true);
  const int c_y = col(schema.y, true);
  const int c_valid = col(schema.validity, true);
  const int c_pupil = col(schema.pupil_mm, false);

  GazeTrace trace;
  trace.participant_id = participant_id;
  int line_no = 1;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    const int max_col = std::max({c_ts, c_x, c_y, c_valid, c_pupil});
    if (static_cast<int>(fields.size()) <= max_col)
      throw MalformedRow(line_no, "too few fields");

    GazeSample s;
    const auto ts = parse_int(fields[c_ts]);
    if (!ts || *ts < 0) throw MalformedRow(line_no, "bad timestamp");
    s.timestamp_us = *ts;

    const auto validity = parse_bool(fields[c_valid]);
    if (!validity) throw MalformedRow(line_no, "bad validity flag");
    s.valid = *validity;

    const auto x = parse_double(fields[c_x]);
    const auto y = parse_double(fields[c_y]);
    if (s.valid) {
      if (!x || !y) throw MalformedRow(line_no, "bad gaze coordinates");
      if (*x < 0.0 || *x > 1.0 || *y < 0.0 || *y > 1.0)
        throw MalformedRow(line_no, "gaze coordinates outside [0,1]");
    }
    s.x = x.value_or(0.0);
    s.y = y.value_or(0.0);

    if (c_pupil >= 0 && !fields[c_pupil].empty()) {
      const auto p = parse_double(fields[c_pupil]);
      if (!p || *p < 0.0) throw MalformedRow(line_no, "bad pupil diameter");
      s.pupil_mm = *p;
    }

    if (!trace.samples.empty() && s.timestamp_us <= trace.samples.back().timestamp_us)
      throw NonMonotonicTimestamp(line_no);
    trace.samples.push_back(s);
  }
  if (trace.samples.empty()) throw EmptyTrace();
  return trace;
}

void serialize_gaze_csv(const GazeTrace& trace, std::ostream& out,
                        const CsvSchema& schema) {
  out << schema.timestamp_us << ',' << schema.x << ',' << schema.y << ','
      << schema.validity << ',' << schema.pupil_mm << '\n';
  out << std::setprecision(17);
  for (const auto& s : trace.samples) {
    out << s.timestamp_us << ',' << s.x << ',' << s.y << ',' << (s.valid ? 1 : 0) << ',';
    if (s.pupil_mm) out << *s.pupil_mm;
    out << '\n';
  }
}

std::int64_t map_to_frame(std::int64_t timestamp_us, const VideoMeta& meta) {
  if (timestamp_us < meta.start_timestamp_us ||
      timestamp_us >= meta.start_timestamp_us + meta.duration_us)
    throw OutOfRange("timestamp " + std::to_string(timestamp_us) + " outside video span");
  const auto frame = frame_for_offset(timestamp_us - meta.start_timestamp_us, meta);
  // A timestamp inside a trailing partial frame has no complete frame to map to.
  if (frame >= meta.frame_count())
    throw OutOfRange("timestamp " + std::to_string(timestamp_us) +
                     " falls in a trailing partial frame");
  return frame;
}

std::int64_t frame_for_offset(std::int64_t offset_us, const VideoMeta& meta) {
  return floor_div_i128(static_cast<i128>(offset_us) * meta.fps_num,
                        static_cast<i128>(meta.fps_den) * 1'000'000);
}

std::int64_t frame_midpoint_offset_us(std::int64_t frame_index, const VideoMeta& meta) {
  return floor_div_i128(
      (static_cast<i128>(2 * frame_index + 1)) * meta.fps_den * 1'000'000,
      static_cast<i128>(2) * meta.fps_num);
}

std::vector<FrameGaze> resample_to_frames(const GazeTrace& trace, const VideoMeta& meta,
                                          const ResamplePolicy& policy) {
  const std::int64_t n_frames = meta.frame_count();
  std::vector<FrameGaze> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n_frames, 0)));

  // Valid samples only; invalid rows contribute gaps, never points.
  std::vector<const GazeSample*> valid;
  for (const auto& s : trace.samples)
    if (s.valid) valid.push_back(&s);

  const std::int64_t half_frame_us = floor_div_i128(
      static_cast<i128>(meta.fps_den) * 1'000'000, static_cast<i128>(2) * meta.fps_num);

  for (std::int64_t f = 0; f < n_frames; ++f) {
    FrameGaze fg;
    fg.frame_index = f;
    const std::int64_t t =
        meta.start_timestamp_us + frame_midpoint_offset_us(f, meta);

    if (valid.empty()) {
      out.push_back(fg);
      continue;
    }

    auto hi = std::lower_bound(
        valid.begin(), valid.end(), t,
        [](const GazeSample* s, std::int64_t ts) { return s->timestamp_us < ts; });
    const GazeSample* after = hi != valid.end() ? *hi : nullptr;
    const GazeSample* before = hi != valid.begin() ? *(hi - 1) : nullptr;

    const GazeSample* nearest = nullptr;
    if (before && after)
      nearest = (t - before->timestamp_us <= after->timestamp_us - t) ? before : after;
    else
      nearest = before ? before : after;

    if (std::llabs(nearest->timestamp_us - t) <= half_frame_us) {
      fg.point = {nearest->x, nearest->y};
      fg.source = FrameGazeSource::exact;
    } else if (policy.mode == ResamplePolicy::Mode::hold_last) {
      if (before && t - before->timestamp_us <= policy.hold_horizon_us) {
        fg.point = {before->x, before->y};
        fg.source = FrameGazeSource::held;
      }
    } else if (before && after &&
               after->timestamp_us - before->timestamp_us <= policy.gap_threshold_us) {
      const double w = static_cast<double>(t - before->timestamp_us) /
                       static_cast<double>(after->timestamp_us - before->timestamp_us);
      fg.point = {before->x + w * (after->x - before->x),
                  before->y + w * (after->y - before->y)};
      fg.source = FrameGazeSource::interpolated;
    }
    out.push_back(fg);
  }
  return out;
}

}  // namespace gazevlm::gaze
