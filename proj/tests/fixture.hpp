// Desk-scale synthetic fixture: 3 participants, 30 s video, 12 probes.
// Participants p0 and p2 look at slide content (on-content fraction ~1),
// participant p1 stares at the screen margin (fraction 0), so the scripted
// mock backend's predictions are known in advance.
#pragma once

#include "gazevlm/util.hpp"

#include <filesystem>
#include <sstream>
#include <string>
#include <unistd.h>

namespace fixture {

inline std::filesystem::path fresh_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("gazevlm_fix_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_gaze_csv(const std::filesystem::path& path, double x, double y,
                           std::int64_t duration_us) {
  std::ostringstream csv;
  csv << "timestamp_us,x,y,validity,pupil_mm\n";
  for (std::int64_t t = 0; t < duration_us; t += 16'667)  // ~60 Hz
    csv << t << ',' << x << ',' << y << ",1,3.1\n";
  gazevlm::util::write_file(path, csv.str());
}

inline std::string probes_json() {
  // labels: p0 [1,1,0,0], p1 [0,0,1,1], p2 [1,1,0,1]
  return R"([
    {"participant_id":"p0","probe_id":"q1","video_time_us":6000000,"rating":5},
    {"participant_id":"p0","probe_id":"q2","video_time_us":12000000,"rating":4},
    {"participant_id":"p0","probe_id":"q3","video_time_us":21000000,"rating":1},
    {"participant_id":"p0","probe_id":"q4","video_time_us":29000000,"rating":0},
    {"participant_id":"p1","probe_id":"q1","video_time_us":6000000,"rating":0},
    {"participant_id":"p1","probe_id":"q2","video_time_us":12000000,"rating":1},
    {"participant_id":"p1","probe_id":"q3","video_time_us":21000000,"rating":4},
    {"participant_id":"p1","probe_id":"q4","video_time_us":29000000,"rating":5},
    {"participant_id":"p2","probe_id":"q1","video_time_us":6000000,"rating":3},
    {"participant_id":"p2","probe_id":"q2","video_time_us":12000000,"rating":3},
    {"participant_id":"p2","probe_id":"q3","video_time_us":21000000,"rating":2},
    {"participant_id":"p2","probe_id":"q4","video_time_us":29000000,"rating":5}
  ])";
}

// Writes gaze logs, probes, and a config; returns the config path.
inline std::filesystem::path make_workspace(const std::filesystem::path& root,
                                            const std::string& extra_config_json = "") {
  constexpr std::int64_t duration_us = 30'000'000;
  std::filesystem::create_directories(root / "gaze");
  write_gaze_csv(root / "gaze" / "p0.csv", 0.5, 0.5, duration_us);
  write_gaze_csv(root / "gaze" / "p1.csv", 0.02, 0.02, duration_us);
  write_gaze_csv(root / "gaze" / "p2.csv", 0.4, 0.6, duration_us);
  gazevlm::util::write_file(root / "probes.json", probes_json());

  std::string config = R"({
  "paths": {
    "gaze_dir": ")" + (root / "gaze").string() + R"(",
    "probe_file": ")" + (root / "probes.json").string() + R"(",
    "frames": {"type": "synthetic", "seed": 11},
    "out_dir": ")" + (root / "out").string() + R"("
  },
  "video": {"fps": "5/1", "width_px": 64, "height_px": 48,
            "start_timestamp_us": 0, "duration_us": 30000000},
  "overlay": {"radius_px": 4, "alpha": 0.45},
  "strategies": [
    {"kind": "direct", "seed": 101},
    {"kind": "heuristic_cot", "seed": 102},
    {"kind": "few_shot", "k": 1, "seed": 103},
    {"kind": "blind_similarity", "k": 1, "seed": 104}
  ],
  "backend": {"type": "mock", "threshold": 0.6},
  "model_id": "mock-model",
  "seed": 2024)" + extra_config_json + R"(
})";
  gazevlm::util::write_file(root / "config.json", config);
  return root / "config.json";
}

}  // namespace fixture
