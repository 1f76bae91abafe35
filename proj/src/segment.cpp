#include "gazevlm/segment.hpp"

#include <json.hpp>

#include <algorithm>

namespace gazevlm::seg {

using nlohmann::json;

AttentionLabel threshold_rating(int rating) {
  if (rating < 0 || rating > 5) throw RatingOutOfRange(rating);
  return rating <= 2 ? AttentionLabel::inattentive : AttentionLabel::attentive;
}

Segment extract_segment(const gaze::GazeTrace& trace, const ProbePoint& probe,
                        const gaze::VideoMeta& meta,
                        const gaze::ResamplePolicy& policy, std::int64_t window_us) {
  if (probe.video_time_us > meta.duration_us) throw ProbeBeyondVideo(probe.probe_id);

  Segment s;
  s.segment_id = probe.participant_id + ":" + probe.probe_id;
  s.participant_id = probe.participant_id;
  s.probe_id = probe.probe_id;
  s.end_us = probe.video_time_us;
  s.start_us = std::max<std::int64_t>(0, probe.video_time_us - window_us);
  s.effective_duration_us = s.end_us - s.start_us;
  s.label = threshold_rating(probe.rating);

  if (s.effective_duration_us == 0) {
    s.first_frame = 0;
    s.last_frame = -1;
    return s;
  }

  // Frames starting in [start_us, end_us): first is the frame containing
  // start_us, last is the last frame whose start time precedes end_us.
  s.first_frame = gaze::frame_for_offset(s.start_us, meta);
  const __int128 num = static_cast<__int128>(s.end_us) * meta.fps_num;
  const __int128 den = static_cast<__int128>(meta.fps_den) * 1'000'000;
  const std::int64_t ceil_frames =
      static_cast<std::int64_t>(num / den + (num % den != 0 ? 1 : 0));
  s.last_frame = std::min(ceil_frames - 1, meta.frame_count() - 1);
  if (s.last_frame < s.first_frame) {
    s.last_frame = s.first_frame - 1;
    return s;
  }

  const auto all = gaze::resample_to_frames(trace, meta, policy);
  s.frame_gaze.reserve(static_cast<std::size_t>(s.frame_span()));
  for (std::int64_t f = s.first_frame; f <= s.last_frame; ++f) {
    if (f >= 0 && f < static_cast<std::int64_t>(all.size()))
      s.frame_gaze.push_back(all[static_cast<std::size_t>(f)]);
    else
      s.frame_gaze.push_back({f, std::nullopt, gaze::FrameGazeSource::missing});
  }
  return s;
}

ClassDistribution class_distribution(const std::vector<AttentionLabel>& labels) {
  if (labels.empty()) throw EmptyLabelSet();
  ClassDistribution d;
  for (auto l : labels) (l == AttentionLabel::inattentive ? d.n0 : d.n1)++;
  const double total = static_cast<double>(d.n0 + d.n1);
  d.p0 = static_cast<double>(d.n0) / total;
  d.p1 = static_cast<double>(d.n1) / total;
  return d;
}

std::vector<ProbePoint> parse_probe_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  std::vector<ProbePoint> probes;
  for (const auto& e : j) {
    ProbePoint p;
    p.participant_id = e.at("participant_id").get<std::string>();
    p.probe_id = e.at("probe_id").get<std::string>();
    p.video_time_us = e.at("video_time_us").get<std::int64_t>();
    p.rating = e.at("rating").get<int>();
    probes.push_back(std::move(p));
  }
  return probes;
}

std::string segments_to_json(const std::vector<Segment>& segments) {
  json arr = json::array();
  for (const auto& s : segments) {
    json e;
    e["segment_id"] = s.segment_id;
    e["participant_id"] = s.participant_id;
    e["probe_id"] = s.probe_id;
    e["start_us"] = s.start_us;
    e["end_us"] = s.end_us;
    e["first_frame"] = s.first_frame;
    e["last_frame"] = s.last_frame;
    e["label"] = static_cast<int>(s.label);
    e["effective_duration_us"] = s.effective_duration_us;
    arr.push_back(std::move(e));
  }
  return arr.dump(2);
}

}  // namespace gazevlm::seg
