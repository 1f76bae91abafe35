// Compares the OpenMP kernels against their serial reference paths and
// checks that both produce identical results.

#include "gazevlm/metrics.hpp"
#include "gazevlm/overlay.hpp"
#include "gazevlm/pipeline.hpp"

#include <chrono>
#include <cstdio>

using namespace gazevlm;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
  // Overlay compositing: full-frame disk on a 1280x720 frame.
  const auto frame = pipeline::synthetic_frame(1280, 720, 0, 1);
  overlay::OverlayStyle style;
  style.radius_px = 360;
  const std::optional<std::pair<double, double>> point{{0.5, 0.5}};

  const auto serial = overlay::composite_gaze_serial(frame, point, style);
  const auto parallel = overlay::composite_gaze(frame, point, style);
  const bool overlay_match = serial.pixels == parallel.pixels;

  const double t_serial = time_ms([&] { overlay::composite_gaze_serial(frame, point, style); }, 20);
  const double t_parallel = time_ms([&] { overlay::composite_gaze(frame, point, style); }, 20);
  std::printf("composite_gaze  serial %8.3f ms  parallel %8.3f ms  speedup %.2fx  match=%s\n",
              t_serial, t_parallel, t_serial / t_parallel, overlay_match ? "yes" : "NO");

  // Monte Carlo baseline simulation at paper scale.
  std::vector<seg::AttentionLabel> labels;
  for (int i = 0; i < 206; ++i) labels.push_back(seg::AttentionLabel::inattentive);
  for (int i = 0; i < 827; ++i) labels.push_back(seg::AttentionLabel::attentive);

  const auto sim_serial = metrics::simulate_baseline_serial(
      labels, metrics::BaselineKind::proportional_random, 7, 5000);
  const auto sim_parallel = metrics::simulate_baseline(
      labels, metrics::BaselineKind::proportional_random, 7, 5000);
  const bool sim_match = sim_serial.mean.macro_f1 == sim_parallel.mean.macro_f1 &&
                         sim_serial.mean.accuracy == sim_parallel.mean.accuracy;

  const double s_serial = time_ms(
      [&] {
        metrics::simulate_baseline_serial(labels, metrics::BaselineKind::proportional_random,
                                          7, 2000);
      },
      3);
  const double s_parallel = time_ms(
      [&] {
        metrics::simulate_baseline(labels, metrics::BaselineKind::proportional_random, 7,
                                   2000);
      },
      3);
  std::printf("simulate_baseline serial %8.3f ms  parallel %8.3f ms  speedup %.2fx  match=%s\n",
              s_serial, s_parallel, s_serial / s_parallel, sim_match ? "yes" : "NO");

  return overlay_match && sim_match ? 0 : 1;
}
