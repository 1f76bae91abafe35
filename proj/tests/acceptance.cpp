// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include "gazevlm/metrics.hpp"
#include "gazevlm/pipeline.hpp"
#include "fixture.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

using namespace gazevlm;
using seg::AttentionLabel;

namespace {

int failures = 0;

void criterion(int number, const std::string& name, bool ok, const std::string& detail = "") {
  std::printf("criterion %d [%s]: %s%s%s\n", number, ok ? "PASS" : "FAIL", name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++failures;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

seg::ClassDistribution paper_distribution() {
  seg::ClassDistribution d;
  d.n0 = 206;
  d.n1 = 827;
  d.p0 = 206.0 / 1033.0;
  d.p1 = 827.0 / 1033.0;
  return d;
}

std::vector<AttentionLabel> paper_labels() {
  std::vector<AttentionLabel> labels(206, AttentionLabel::inattentive);
  labels.insert(labels.end(), 827, AttentionLabel::attentive);
  return labels;
}

// --- criterion 1: analytic Table-1 baseline block ---------------------------
void check_baselines() {
  const auto dist = paper_distribution();
  using metrics::BaselineKind;
  const auto maj = metrics::expected_baseline_metrics(dist, BaselineKind::majority_class);
  const auto prop = metrics::expected_baseline_metrics(dist, BaselineKind::proportional_random);
  const auto uni = metrics::expected_baseline_metrics(dist, BaselineKind::uniform_random);

  const bool ok = round3(maj.accuracy) == 0.801 && round3(maj.macro_precision) == 0.400 &&
                  round3(maj.macro_recall) == 0.500 && round3(maj.macro_f1) == 0.445 &&
                  round3(prop.accuracy) == 0.681 && round3(prop.macro_precision) == 0.500 &&
                  round3(prop.macro_recall) == 0.500 && round3(prop.macro_f1) == 0.500 &&
                  round3(uni.accuracy) == 0.500 && round3(uni.macro_f1) == 0.450;
  criterion(1, "analytic baseline block matches the published table at 3 d.p.", ok);
}

// --- criterion 2: Monte Carlo convergence and reproducibility ---------------
void check_monte_carlo() {
  const auto labels = paper_labels();
  const auto dist = paper_distribution();
  const int trials = 10'000;
  bool ok = true;
  std::string detail;

  for (const auto kind : {metrics::BaselineKind::majority_class,
                          metrics::BaselineKind::uniform_random,
                          metrics::BaselineKind::proportional_random}) {
    const auto sim = metrics::simulate_baseline(labels, kind, 424242, trials);
    const auto expected = metrics::expected_baseline_metrics(dist, kind);
    const auto within = [&](double mean, double sd, double target) {
      const double se = sd / std::sqrt(static_cast<double>(trials));
      return std::abs(mean - target) <= 3.0 * std::max(se, 1e-12);
    };
    if (!within(sim.mean.accuracy, sim.stddev.accuracy, expected.accuracy) ||
        !within(sim.mean.macro_precision, sim.stddev.macro_precision, expected.macro_precision) ||
        !within(sim.mean.macro_recall, sim.stddev.macro_recall, expected.macro_recall) ||
        !within(sim.mean.macro_f1, sim.stddev.macro_f1, expected.macro_f1)) {
      ok = false;
      detail = metrics::baseline_name(kind) + " off closed form";
    }

    const auto again = metrics::simulate_baseline(labels, kind, 424242, trials);
    const auto serial = metrics::simulate_baseline_serial(labels, kind, 424242, trials);
    if (sim.mean.accuracy != again.mean.accuracy || sim.mean.macro_f1 != again.mean.macro_f1 ||
        sim.mean.accuracy != serial.mean.accuracy ||
        sim.mean.macro_f1 != serial.mean.macro_f1) {
      ok = false;
      detail = metrics::baseline_name(kind) + " not bit-reproducible";
    }
  }
  criterion(2, "Monte Carlo agrees with closed forms within 3 SE, bit-reproducible", ok, detail);
}

// --- criterion 3: metric oracle equivalence ----------------------------------
metrics::MetricSet brute_force_metrics(const metrics::ConfusionMatrix& m) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < 2; ++a)
    for (int p = 0; p < 2; ++p)
      for (std::int64_t i = 0; i < m.counts[a][p]; ++i) pairs.emplace_back(a, p);
  metrics::MetricSet s;
  std::int64_t correct = 0;
  for (const auto& [a, p] : pairs)
    if (a == p) ++correct;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
  for (int c = 0; c < 2; ++c) {
    std::int64_t tp = 0, pc = 0, ac = 0;
    for (const auto& [a, p] : pairs) {
      if (p == c) ++pc;
      if (a == c) ++ac;
      if (a == c && p == c) ++tp;
    }
    s.precision[c] = pc == 0 ? 0.0 : static_cast<double>(tp) / pc;
    s.recall[c] = ac == 0 ? 0.0 : static_cast<double>(tp) / ac;
    const double pr = s.precision[c] + s.recall[c];
    s.f1[c] = pr == 0.0 ? 0.0 : 2.0 * s.precision[c] * s.recall[c] / pr;
  }
  s.macro_precision = (s.precision[0] + s.precision[1]) / 2.0;
  s.macro_recall = (s.recall[0] + s.recall[1]) / 2.0;
  s.macro_f1 = (s.f1[0] + s.f1[1]) / 2.0;
  return s;
}

void check_metric_oracle() {
  util::Rng rng(31415);
  bool ok = true;
  for (int iter = 0; iter < 1000 && ok; ++iter) {
    metrics::ConfusionMatrix m;
    const std::uint64_t cap = rng.coin_flip() ? 2 : 1000;
    m.counts[0][0] = static_cast<std::int64_t>(rng.below(cap));
    m.counts[0][1] = static_cast<std::int64_t>(rng.below(cap));
    m.counts[1][0] = static_cast<std::int64_t>(rng.below(cap));
    m.counts[1][1] = static_cast<std::int64_t>(rng.below(cap));
    if (m.total() == 0) m.counts[0][0] = 1;
    const auto fast = metrics::metrics(m);
    const auto slow = brute_force_metrics(m);
    const auto eq = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    ok = eq(fast.accuracy, slow.accuracy) && eq(fast.macro_precision, slow.macro_precision) &&
         eq(fast.macro_recall, slow.macro_recall) && eq(fast.macro_f1, slow.macro_f1) &&
         eq(fast.precision[0], slow.precision[0]) && eq(fast.precision[1], slow.precision[1]) &&
         eq(fast.recall[0], slow.recall[0]) && eq(fast.recall[1], slow.recall[1]) &&
         eq(fast.f1[0], slow.f1[0]) && eq(fast.f1[1], slow.f1[1]);
  }
  criterion(3, "metrics match brute-force scorer on 1000 random matrices (1e-12)", ok);
}

// --- criterion 4: overlay bit-exactness --------------------------------------
void check_overlay() {
  bool ok = true;
  std::string detail;

  const auto frame = pipeline::synthetic_frame(96, 64, 2, 17);
  overlay::OverlayStyle style;
  style.radius_px = 12;

  // alpha-0 identity
  {
    auto s = style;
    s.alpha = 0.0;
    if (overlay::composite_gaze(frame, {{0.4, 0.6}}, s).pixels != frame.pixels) {
      ok = false;
      detail = "alpha-0 identity";
    }
  }
  // alpha-1 saturation
  {
    auto s = style;
    s.alpha = 1.0;
    const auto out = overlay::composite_gaze(frame, {{0.5, 0.5}}, s);
    const int cx = static_cast<int>(std::floor(0.5 * 95 + 0.5));
    const int cy = static_cast<int>(std::floor(0.5 * 63 + 0.5));
    const auto* px = out.at(cx, cy);
    if (px[0] != 255 || px[1] != 0 || px[2] != 0) {
      ok = false;
      detail = "alpha-1 saturation";
    }
  }
  // half-blend pixel on white
  {
    const auto white = overlay::FrameBuffer::solid(41, 41, {255, 255, 255});
    auto s = style;
    s.alpha = 0.5;
    const auto out = overlay::composite_gaze(white, {{0.5, 0.5}}, s);
    const auto* px = out.at(20, 20);
    if (px[0] != 255 || px[1] != 128 || px[2] != 128) {
      ok = false;
      detail = "half-blend (255,128,128)";
    }
  }
  // border clipping: no crash, no out-of-disk change
  {
    auto s = style;
    s.alpha = 0.7;
    s.radius_px = 30;
    const auto out = overlay::composite_gaze(frame, {{1.0, 1.0}}, s);
    if (out.at(0, 0)[0] != frame.at(0, 0)[0]) {
      ok = false;
      detail = "border clipping";
    }
  }
  // golden checksum: frozen from the deterministic integer-only pipeline,
  // and parallel/serial agreement across thread counts
  {
    auto s = style;
    s.alpha = 0.45;
    s.radius_px = 20;
    const auto a = overlay::composite_gaze(frame, {{0.3, 0.7}}, s);
    const auto b = overlay::composite_gaze_serial(frame, {{0.3, 0.7}}, s);
    if (a.pixels != b.pixels) {
      ok = false;
      detail = "parallel != serial";
    }
    const std::string pixel_bytes(reinterpret_cast<const char*>(a.pixels.data()),
                                  a.pixels.size());
    const std::string digest = util::sha256_hex(pixel_bytes);
    const std::string golden =
        "529b639c88d1b087bbd8d56ac088047dc9db35d32430aad819893f90293cc198";
    if (digest != golden) {
      ok = false;
      detail = "golden checksum mismatch: " + digest;
    }
  }
  criterion(4, "overlay compositing is bit-exact (golden image, blend identities)", ok, detail);
}

// --- criterion 5: frame synchronization vs big-integer oracle ----------------
void check_synchronization() {
  namespace mp = boost::multiprecision;
  util::Rng rng(2718);
  bool ok = true;

  // the NTSC case first
  {
    gaze::VideoMeta meta;
    meta.fps_num = 30000;
    meta.fps_den = 1001;
    meta.duration_us = 10'000'000;
    if (gaze::map_to_frame(1'001'000, meta) != 30) ok = false;
  }

  for (int iter = 0; iter < 10'000 && ok; ++iter) {
    gaze::VideoMeta meta;
    if (iter % 7 == 0) {
      meta.fps_num = 30000;
      meta.fps_den = 1001;
    } else {
      meta.fps_num = 1 + static_cast<std::int64_t>(rng.below(240'000));
      meta.fps_den = 1 + static_cast<std::int64_t>(rng.below(5000));
    }
    meta.start_timestamp_us = static_cast<std::int64_t>(rng.below(2'000'000'000ULL));
    meta.duration_us = 1 + static_cast<std::int64_t>(rng.below(3'600'000'000ULL));
    if (meta.frame_count() < 1) continue;

    const auto off1 = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(meta.duration_us)));
    const auto off2 = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(meta.duration_us)));
    const auto t1 = meta.start_timestamp_us + std::min(off1, off2);
    const auto t2 = meta.start_timestamp_us + std::max(off1, off2);

    // independent exact-rational oracle
    const auto oracle = [&](std::int64_t t) {
      return (mp::cpp_int(t - meta.start_timestamp_us) * meta.fps_num) /
             (mp::cpp_int(meta.fps_den) * 1'000'000);
    };
    if (oracle(t2) >= meta.frame_count()) {
      // timestamps inside a trailing partial frame must be rejected
      try {
        gaze::map_to_frame(t2, meta);
        ok = false;
      } catch (const gaze::OutOfRange&) {
      }
      continue;
    }
    const auto f1 = gaze::map_to_frame(t1, meta);
    const auto f2 = gaze::map_to_frame(t2, meta);
    if (mp::cpp_int(f1) != oracle(t1)) ok = false;
    if (mp::cpp_int(f2) != oracle(t2)) ok = false;
    if (f1 > f2) ok = false;  // monotone
    if (f1 < 0 || f2 >= meta.frame_count()) ok = false;
  }
  criterion(5, "map_to_frame matches the exact-rational oracle on 10,000 cases", ok);
}

// --- criterion 6: prompt contracts -------------------------------------------
void check_prompt_contracts() {
  bool ok = true;
  std::string detail;

  // heuristic CoT pipeline text
  const auto cot =
      prompt::build_prompt(prompt::StrategyKind::HeuristicCoT(), "s", "p", "c", {}, 0);
  if (cot.user_text.find("1. Identify the key pedagogical concept") == std::string::npos ||
      cot.user_text.find("2. Estimate") == std::string::npos ||
      cot.user_text.find("3. Classify") == std::string::npos ||
      cot.user_text.find("0-100") == std::string::npos) {
    ok = false;
    detail = "CoT pipeline text";
  }

  // blind forbidden-token property over 1000 random configurations
  std::vector<prompt::Exemplar> pool;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 8; ++i)
      pool.push_back({"pp" + std::to_string(i) + ":q" + std::to_string(c * 10 + i),
                      "pp" + std::to_string(i), "clip_" + std::to_string(c * 10 + i),
                      static_cast<AttentionLabel>(c)});
  util::Rng rng(606);
  for (int iter = 0; iter < 1000 && ok; ++iter) {
    const int k = rng.coin_flip() ? 1 : 5;
    const auto ex = prompt::select_exemplars(pool, k, rng.next_u64(), std::nullopt);
    const auto b = prompt::build_prompt(prompt::StrategyKind::BlindSimilarity(k), "t:q", "t",
                                        "target", ex, rng.next_u64());
    if (prompt::contains_attention_lexicon(b.system_text) ||
        prompt::contains_attention_lexicon(b.user_text) ||
        prompt::contains_attention_lexicon(b.response_schema_hint) || !b.blind_mapping) {
      ok = false;
      detail = "blind lexicon leak";
    }
  }

  // schema round-trip with zero abstentions
  for (int iter = 0; iter < 1000 && ok; ++iter) {
    const bool attentive = rng.coin_flip();
    const int score = static_cast<int>(rng.below(101));
    const std::string text = std::string("CLASSIFICATION: ") +
                             (attentive ? "Attentive" : "Inattentive") +
                             "\nALIGNMENT: " + std::to_string(score) +
                             "\nJUSTIFICATION: j\nEVIDENCE:\n- e\n";
    const auto p = prompt::parse_response(text, prompt::StrategyKind::HeuristicCoT(),
                                          std::nullopt, "s");
    if (p.outcome != prompt::Outcome::parsed ||
        p.label != (attentive ? AttentionLabel::attentive : AttentionLabel::inattentive) ||
        p.alignment_score != score) {
      ok = false;
      detail = "schema round-trip";
    }
  }
  criterion(6, "prompt contracts (blind lexicon, CoT steps, parse round-trip)", ok, detail);
}

// --- criterion 7: end-to-end determinism at desk scale -----------------------
void check_end_to_end() {
  bool ok = true;
  std::string detail;

  const auto root = fixture::fresh_dir("acceptance");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));

  const auto m1 = pipeline::cmd_run(cfg);
  std::filesystem::remove_all(cfg.out_dir);
  const auto m2 = pipeline::cmd_run(cfg);

  if (m1.stages.size() != m2.stages.size()) {
    ok = false;
    detail = "stage count";
  } else {
    for (std::size_t i = 0; i < m1.stages.size(); ++i) {
      if (!m1.stages[i].completed || !m2.stages[i].completed ||
          m1.stages[i].output_checksum != m2.stages[i].output_checksum) {
        ok = false;
        detail = "stage checksum mismatch at " + m1.stages[i].name;
      }
    }
  }

  // mock with a known confusion matrix: p0/p2 predicted attentive, p1 not
  // actual labels per fixture -> matrix [[2,3],[2,5]]
  if (ok) {
    const auto segments = pipeline::ingest(cfg);
    std::map<std::string, AttentionLabel> labels;
    for (const auto& s : segments) labels[s.segment_id] = s.label;

    std::vector<std::pair<std::string, AttentionLabel>> preds;
    std::ifstream in(pipeline::predictions_path(cfg, prompt::StrategyKind::Direct()));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto p = prompt::Prediction::from_json_line(line);
      preds.emplace_back(p.segment_id, p.label);
    }
    const auto matrix = metrics::confusion(preds, labels);
    if (matrix.counts[0][0] != 2 || matrix.counts[0][1] != 3 || matrix.counts[1][0] != 2 ||
        matrix.counts[1][1] != 5) {
      ok = false;
      detail = "confusion matrix not the hand-computed one";
    } else {
      const auto s = metrics::metrics(matrix);
      const auto eq = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
      if (!eq(s.accuracy, 7.0 / 12.0) || !eq(s.precision[0], 0.5) ||
          !eq(s.recall[0], 0.4) || !eq(s.f1[0], 4.0 / 9.0) || !eq(s.precision[1], 5.0 / 8.0) ||
          !eq(s.recall[1], 5.0 / 7.0) || !eq(s.f1[1], 2.0 / 3.0) ||
          !eq(s.macro_precision, 0.5625) || !eq(s.macro_recall, (0.4 + 5.0 / 7.0) / 2.0) ||
          !eq(s.macro_f1, 5.0 / 9.0)) {
        ok = false;
        detail = "metric set not the hand-computed one";
      }
    }
  }
  std::filesystem::remove_all(root);
  criterion(7, "end-to-end determinism and hand-computed mock confusion matrix", ok, detail);
}

// --- criterion 8: live smoke, opt-in only ------------------------------------
void check_live_smoke() {
  const char* opt_in = std::getenv("GAZEVLM_LIVE_SMOKE");
  if (opt_in == nullptr || std::string(opt_in) != "1") {
    std::printf(
        "criterion 8 [PASS]: live VLM rows are not acceptance targets; "
        "live smoke skipped (set GAZEVLM_LIVE_SMOKE=1 with GAZEVLM_ENDPOINT to run)\n");
    return;
  }
  const char* endpoint = std::getenv("GAZEVLM_ENDPOINT");
  if (endpoint == nullptr) {
    criterion(8, "live smoke requested but GAZEVLM_ENDPOINT unset", false);
    return;
  }
  try {
    vlm::BackendConfig config;
    config.endpoint_url = endpoint;
    vlm::HttpBackend backend(config);
    prompt::PromptBundle bundle = prompt::build_prompt(prompt::StrategyKind::Direct(), "smoke",
                                                       "smoke", "", {}, 0);
    bundle.media.clear();
    const auto request = vlm::make_request(bundle, "smoke-model", {},
                                           [](const std::string&) { return "none"; });
    const auto response = backend.classify(request);
    const auto p = prompt::parse_response(response.text, prompt::StrategyKind::Direct(),
                                          std::nullopt, "smoke");
    criterion(8, "live smoke: one request, parseable response",
              p.outcome == prompt::Outcome::parsed);
  } catch (const std::exception& e) {
    criterion(8, "live smoke", false, e.what());
  }
}

}  // namespace

int main() {
  check_baselines();
  check_monte_carlo();
  check_metric_oracle();
  check_overlay();
  check_synchronization();
  check_prompt_contracts();
  check_end_to_end();
  check_live_smoke();
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
