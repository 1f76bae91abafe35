#include "gazevlm/pipeline.hpp"

#include "gazevlm/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace gazevlm::pipeline {

using nlohmann::json;
using seg::AttentionLabel;

namespace {

constexpr const char* kToolkitVersion = "0.1.0";

std::uint64_t stable_id_hash(const std::string& s) {
  const std::string hex = util::sha256_hex(s);
  std::uint64_t v = 0;
  for (int i = 0; i < 16; ++i) {
    const char c = hex[static_cast<std::size_t>(i)];
    v = (v << 4) | static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
  }
  return v;
}

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (c == ':' || c == '/' || c == '\\') c = '_';
  return out;
}

std::pair<std::int64_t, std::int64_t> parse_fps(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) return {std::stoll(s), 1};
  return {std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1))};
}

prompt::StrategyKind parse_strategy_kind(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int k = j.value("k", 1);
  if (kind == "direct") return prompt::StrategyKind::Direct();
  if (kind == "heuristic_cot") return prompt::StrategyKind::HeuristicCoT();
  if (kind == "few_shot") return prompt::StrategyKind::FewShot(k);
  if (kind == "blind_similarity") return prompt::StrategyKind::BlindSimilarity(k);
  throw ValidationError("unknown strategy kind: " + kind);
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  const json j = json::parse(json_text);
  ExperimentConfig cfg;
  cfg.config_hash = util::sha256_hex(json_text);

  const auto& paths = j.at("paths");
  cfg.gaze_dir = paths.at("gaze_dir").get<std::string>();
  cfg.probe_file = paths.at("probe_file").get<std::string>();
  cfg.out_dir = paths.at("out_dir").get<std::string>();
  if (paths.contains("frames")) {
    const auto& f = paths["frames"];
    const std::string type = f.value("type", "synthetic");
    if (type == "png_dir") {
      cfg.frames.type = FrameSourceConfig::Type::png_dir;
      cfg.frames.png_dir = f.at("path").get<std::string>();
    } else {
      cfg.frames.type = FrameSourceConfig::Type::synthetic;
      cfg.frames.synthetic_seed = f.value("seed", 0);
    }
  }

  const auto& v = j.at("video");
  std::tie(cfg.video.fps_num, cfg.video.fps_den) = parse_fps(v.at("fps").get<std::string>());
  cfg.video.width_px = v.at("width_px").get<int>();
  cfg.video.height_px = v.at("height_px").get<int>();
  cfg.video.start_timestamp_us = v.value("start_timestamp_us", 0LL);
  cfg.video.duration_us = v.at("duration_us").get<std::int64_t>();

  if (j.contains("resample")) {
    const auto& r = j["resample"];
    const std::string mode = r.value("mode", "nearest_then_interpolate");
    cfg.resample.mode = mode == "hold_last" ? gaze::ResamplePolicy::Mode::hold_last
                                            : gaze::ResamplePolicy::Mode::nearest_then_interpolate;
    cfg.resample.gap_threshold_us = r.value("gap_threshold_us", 100'000LL);
    cfg.resample.hold_horizon_us = r.value("hold_horizon_us", 500'000LL);
  }

  if (j.contains("overlay")) {
    const auto& o = j["overlay"];
    cfg.style.radius_px = o.value("radius_px", 30);
    if (o.contains("color_rgb"))
      cfg.style.color_rgb = o["color_rgb"].get<std::array<std::uint8_t, 3>>();
    cfg.style.alpha = o.value("alpha", 0.45);
    cfg.style.edge = o.value("edge", "hard") == "antialiased"
                         ? overlay::OverlayStyle::Edge::antialiased
                         : overlay::OverlayStyle::Edge::hard;
    cfg.style.draw_missing = o.value("draw_missing", false);
  }

  if (j.contains("strategies")) {
    for (const auto& s : j["strategies"]) {
      StrategyConfig sc;
      sc.kind = parse_strategy_kind(s);
      sc.seed = s.value("seed", 0);
      cfg.strategies.push_back(sc);
    }
  }

  if (j.contains("backend")) {
    const auto& b = j["backend"];
    const std::string type = b.value("type", "mock");
    if (type == "mock") {
      cfg.backend.type = BackendChoice::Type::mock;
      cfg.backend.mock_threshold = b.value("threshold", 0.6);
    } else if (type == "replay") {
      cfg.backend.type = BackendChoice::Type::replay;
      cfg.backend.cache_file = b.at("cache_file").get<std::string>();
    } else if (type == "http") {
      cfg.backend.type = BackendChoice::Type::http;
      cfg.backend.http.endpoint_url = b.at("endpoint_url").get<std::string>();
      cfg.backend.http.auth_env_var = b.value("auth_env_var", "GAZEVLM_API_KEY");
      cfg.backend.http.adapter = b.value("adapter", "generic");
      cfg.backend.http.max_in_flight = b.value("max_in_flight", 4);
      cfg.backend.http.rate_limit_per_min = b.value("rate_limit_per_min", 60);
      cfg.backend.http.timeout_ms = b.value("timeout_ms", 120'000);
      if (b.contains("retry")) {
        cfg.backend.http.retry.max_attempts = b["retry"].value("max_attempts", 3);
        cfg.backend.http.retry.base_backoff_ms = b["retry"].value("base_backoff_ms", 500);
        cfg.backend.http.retry.jitter = b["retry"].value("jitter", 0.25);
      }
      if (b.contains("cache_file"))
        cfg.backend.cache_file = b["cache_file"].get<std::string>();
    } else {
      throw ValidationError("unknown backend type: " + type);
    }
  }

  cfg.model_id = j.value("model_id", "vlm-default");
  if (j.contains("encoder_cmd_template"))
    cfg.encoder_cmd_template = j["encoder_cmd_template"].get<std::string>();
  if (j.contains("prompt_template_dir"))
    cfg.prompt_template_dir =
        std::filesystem::path(j["prompt_template_dir"].get<std::string>());

  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    cfg.eval.baselines = e.value("baselines", true);
    cfg.eval.simulate_trials = e.value("simulate_trials", 0);
    cfg.eval.fallback_class = static_cast<AttentionLabel>(e.value("fallback_class", 1));
    cfg.eval.exclude_same_participant = e.value("exclude_same_participant", true);
  }

  cfg.seed = j.value("seed", 0);
  cfg.workers = j.value("workers", 0);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ValidationError("config file not found: " + path.string());
  auto cfg = parse_config(util::read_file(path));
  validate(cfg);
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (!std::filesystem::is_directory(cfg.gaze_dir))
    throw ValidationError("gaze log directory not found: " + cfg.gaze_dir.string());
  if (!std::filesystem::exists(cfg.probe_file))
    throw ValidationError("probe file not found: " + cfg.probe_file.string());
  if (cfg.frames.type == FrameSourceConfig::Type::png_dir &&
      !std::filesystem::is_directory(cfg.frames.png_dir))
    throw ValidationError("frames directory not found: " + cfg.frames.png_dir.string());
  if (cfg.backend.type == BackendChoice::Type::replay &&
      !std::filesystem::exists(cfg.backend.cache_file))
    throw ValidationError("replay cache not found: " + cfg.backend.cache_file.string());
  if (cfg.video.fps_num <= 0 || cfg.video.fps_den <= 0)
    throw ValidationError("fps must be a positive rational");
  if (cfg.video.duration_us <= 0) throw ValidationError("duration_us must be positive");
}

overlay::FrameBuffer synthetic_frame(int width, int height, std::int64_t frame_index,
                                     std::uint64_t seed) {
  overlay::FrameBuffer fb;
  fb.width_px = width;
  fb.height_px = height;
  fb.pixels.resize(static_cast<std::size_t>(width) * height * 3);

  // Slide-like texture: gradient background, text bars, one moving block.
  const std::uint64_t h = util::splitmix64(seed + static_cast<std::uint64_t>(frame_index / 125));
  const int block_x = static_cast<int>(h % static_cast<std::uint64_t>(std::max(1, width - width / 4)));
  const int block_y = static_cast<int>((h >> 32) % static_cast<std::uint64_t>(std::max(1, height - height / 4)));

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::uint8_t* px = fb.at(x, y);
      px[0] = static_cast<std::uint8_t>(220 - (x * 40) / std::max(1, width - 1));
      px[1] = static_cast<std::uint8_t>(220 - (y * 40) / std::max(1, height - 1));
      px[2] = 230;
      const bool text_bar = (y / 14) % 3 == 1 && x > width / 10 && x < (9 * width) / 10;
      if (text_bar && (x / 6) % 2 == 0) {
        px[0] = px[1] = px[2] = 40;
      }
      if (x >= block_x && x < block_x + width / 4 && y >= block_y && y < block_y + height / 4) {
        px[0] = 250;
        px[1] = 210;
        px[2] = 90;
      }
    }
  }
  return fb;
}

overlay::FrameSource make_frame_source(const ExperimentConfig& cfg) {
  if (cfg.frames.type == FrameSourceConfig::Type::synthetic) {
    const int w = cfg.video.width_px;
    const int h = cfg.video.height_px;
    const std::uint64_t seed = cfg.frames.synthetic_seed;
    const std::int64_t n = cfg.video.frame_count();
    return [w, h, seed, n](std::int64_t index) {
      if (index < 0 || index >= n) throw overlay::FrameSourceGap(index);
      return synthetic_frame(w, h, index, seed);
    };
  }
  const auto dir = cfg.frames.png_dir;
  return [dir](std::int64_t index) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06lld.png", static_cast<long long>(index));
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) throw overlay::FrameSourceGap(index);
    return overlay::read_png(path);
  };
}

std::vector<seg::Segment> ingest(const ExperimentConfig& cfg) {
  std::map<std::string, gaze::GazeTrace> traces;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(cfg.gaze_dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    traces[f.stem().string()] = gaze::parse_gaze_csv(in, {}, f.stem().string());
  }

  auto probes = seg::parse_probe_json(util::read_file(cfg.probe_file));
  std::stable_sort(probes.begin(), probes.end(), [](const auto& a, const auto& b) {
    return std::tie(a.participant_id, a.video_time_us) <
           std::tie(b.participant_id, b.video_time_us);
  });

  std::vector<seg::Segment> segments;
  for (const auto& p : probes) {
    const auto it = traces.find(p.participant_id);
    if (it == traces.end())
      throw ValidationError("probe references unknown participant: " + p.participant_id);
    segments.push_back(seg::extract_segment(it->second, p, cfg.video, cfg.resample));
  }
  return segments;
}

std::map<std::string, double> gaze_statistics(const std::vector<seg::Segment>& segments) {
  std::map<std::string, double> stats;
  for (const auto& s : segments) {
    std::int64_t on_content = 0;
    for (const auto& fg : s.frame_gaze) {
      if (!fg.point) continue;
      const auto [x, y] = *fg.point;
      if (x >= 0.1 && x <= 0.9 && y >= 0.1 && y <= 0.9) ++on_content;
    }
    stats[s.segment_id] =
        s.frame_gaze.empty()
            ? 0.0
            : static_cast<double>(on_content) / static_cast<double>(s.frame_gaze.size());
  }
  return stats;
}

IngestOutput cmd_ingest(const ExperimentConfig& cfg) {
  const auto segments = ingest(cfg);
  std::filesystem::create_directories(cfg.out_dir);

  json wrapper;
  wrapper["config_hash"] = cfg.config_hash;
  wrapper["segments"] = json::parse(seg::segments_to_json(segments));
  util::write_file(cfg.out_dir / "segments.json", wrapper.dump(2));

  std::vector<AttentionLabel> labels;
  for (const auto& s : segments) labels.push_back(s.label);
  const auto dist = seg::class_distribution(labels);

  json d;
  d["config_hash"] = cfg.config_hash;
  d["n0"] = dist.n0;
  d["n1"] = dist.n1;
  d["p0"] = dist.p0;
  d["p1"] = dist.p1;
  util::write_file(cfg.out_dir / "distribution.json", d.dump(2));

  return {static_cast<std::int64_t>(segments.size()), dist};
}

namespace {

std::filesystem::path clip_dir_for(const ExperimentConfig& cfg, const std::string& segment_id) {
  return cfg.out_dir / "clips" / sanitize_id(segment_id);
}

bool clip_up_to_date(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) return false;
  try {
    const auto m = overlay::ClipManifest::from_json(util::read_file(manifest_path));
    for (std::size_t i = 0; i < m.frame_files.size(); ++i) {
      const auto f = dir / m.frame_files[i];
      if (!std::filesystem::exists(f)) return false;
      if (util::sha256_file_hex(f) != m.frame_checksums[i]) return false;
    }
    return true;
  } catch (...) {
    return false;
  }
}

std::string media_ref_for_clip(const ExperimentConfig& cfg, const std::string& segment_id) {
  const auto dir = clip_dir_for(cfg, segment_id);
  const auto encoded = dir / "clip.mp4";
  if (std::filesystem::exists(encoded)) return encoded.string();
  return (dir / "manifest.json").string();
}

}  // namespace

RenderOutput cmd_render(const ExperimentConfig& cfg,
                        const std::vector<std::string>& segment_filter, bool dry_run,
                        bool force) {
  const auto segments = ingest(cfg);
  const auto source = make_frame_source(cfg);
  const std::set<std::string> filter(segment_filter.begin(), segment_filter.end());

  RenderOutput out;
  for (const auto& s : segments) {
    if (!filter.empty() && filter.count(s.segment_id) == 0) continue;
    const auto dir = clip_dir_for(cfg, s.segment_id);
    if (dry_run) {
      out.clip_dirs.push_back(dir.string());
      continue;
    }
    if (!force && clip_up_to_date(dir)) {
      ++out.skipped;
      out.clip_dirs.push_back(dir.string());
      continue;
    }
    auto manifest = overlay::render_segment(s, source, cfg.video, cfg.style, dir, cfg.workers);
    if (cfg.encoder_cmd_template)
      overlay::encode_clip(manifest, dir, *cfg.encoder_cmd_template, dir / "clip.mp4");
    ++out.rendered;
    out.clip_dirs.push_back(dir.string());
  }
  return out;
}

std::filesystem::path predictions_path(const ExperimentConfig& cfg,
                                       const prompt::StrategyKind& kind) {
  return cfg.out_dir / ("predictions_" + kind.name() + ".jsonl");
}

ClassifyOutput cmd_classify(const ExperimentConfig& cfg, const StrategyConfig& strategy) {
  const auto segments = ingest(cfg);

  // Exemplar pool spans all segments; per-target exclusion handles leakage.
  std::vector<prompt::Exemplar> pool;
  for (const auto& s : segments) {
    const auto dir = clip_dir_for(cfg, s.segment_id);
    if (!std::filesystem::exists(dir / "manifest.json"))
      throw ValidationError("clip not rendered for segment " + s.segment_id +
                            " (run render first)");
    pool.push_back({s.segment_id, s.participant_id, media_ref_for_clip(cfg, s.segment_id),
                    s.label});
  }

  prompt::BuildOptions opts;
  opts.exclude_same_participant = cfg.eval.exclude_same_participant;
  if (cfg.prompt_template_dir)
    opts.templates = prompt::PromptTemplates::load_dir(*cfg.prompt_template_dir);

  std::vector<vlm::VlmRequest> requests;
  requests.reserve(segments.size());
  for (const auto& s : segments) {
    std::vector<prompt::Exemplar> exemplars;
    if (strategy.kind.uses_exemplars()) {
      const auto sel_seed = util::splitmix64(strategy.seed ^ stable_id_hash(s.segment_id));
      exemplars = prompt::select_exemplars(
          pool, strategy.kind.k, sel_seed,
          cfg.eval.exclude_same_participant ? std::optional(s.participant_id) : std::nullopt);
    }
    const auto blind_seed =
        util::splitmix64(strategy.seed ^ stable_id_hash("blind:" + s.segment_id));
    auto bundle = prompt::build_prompt(strategy.kind, s.segment_id, s.participant_id,
                                       media_ref_for_clip(cfg, s.segment_id), exemplars,
                                       blind_seed, opts);
    requests.push_back(vlm::make_request(bundle, cfg.model_id, {}));
  }

  std::shared_ptr<vlm::ResponseCache> cache;
  std::unique_ptr<vlm::Backend> backend;
  switch (cfg.backend.type) {
    case BackendChoice::Type::mock:
      backend = std::make_unique<vlm::MockBackend>(vlm::MockBackend::from_statistic(
          gaze_statistics(segments), cfg.backend.mock_threshold));
      break;
    case BackendChoice::Type::replay:
      cache = std::make_shared<vlm::ResponseCache>(cfg.backend.cache_file);
      backend = std::make_unique<vlm::ReplayBackend>(cache);
      break;
    case BackendChoice::Type::http:
      backend = std::make_unique<vlm::HttpBackend>(cfg.backend.http);
      if (!cfg.backend.cache_file.empty())
        cache = std::make_shared<vlm::ResponseCache>(cfg.backend.cache_file);
      break;
  }

  const int max_in_flight = cfg.workers > 0 ? cfg.workers : cfg.backend.http.max_in_flight;
  const auto results = vlm::run_batch(requests, *backend, max_in_flight);

  ClassifyOutput out;
  out.predictions_file = predictions_path(cfg, strategy.kind);
  std::filesystem::create_directories(cfg.out_dir);
  std::ostringstream lines;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok()) {
      ++out.failed;
      continue;
    }
    ++out.succeeded;
    if (cache && cfg.backend.type == BackendChoice::Type::http)
      cache->record(requests[i], *results[i].response);
    const auto pred = prompt::parse_response(
        results[i].response->text, requests[i].bundle.strategy,
        requests[i].bundle.blind_mapping, requests[i].bundle.target_segment_id,
        cfg.eval.fallback_class);
    lines << pred.to_json_line() << '\n';
  }
  util::write_file(out.predictions_file, lines.str());

  json meta;
  meta["config_hash"] = cfg.config_hash;
  meta["strategy"] = strategy.kind.name();
  meta["seed"] = strategy.seed;
  meta["backend_tag"] = backend->tag();
  meta["failed"] = out.failed;
  util::write_file(cfg.out_dir / ("predictions_" + strategy.kind.name() + ".meta.json"),
                   meta.dump(2));
  return out;
}

EvaluateOutput cmd_evaluate(const ExperimentConfig& cfg) {
  const auto segments = ingest(cfg);
  std::map<std::string, AttentionLabel> labels;
  std::vector<AttentionLabel> label_list;
  for (const auto& s : segments) {
    labels[s.segment_id] = s.label;
    label_list.push_back(s.label);
  }
  const auto dist = seg::class_distribution(label_list);

  std::vector<metrics::MethodRow> rows;
  if (cfg.eval.baselines) {
    for (const auto kind :
         {metrics::BaselineKind::majority_class, metrics::BaselineKind::proportional_random,
          metrics::BaselineKind::uniform_random}) {
      metrics::MethodRow row;
      row.name = metrics::baseline_name(kind);
      row.metrics = metrics::expected_baseline_metrics(dist, kind);
      row.metadata["form"] = "analytic";
      rows.push_back(row);
      if (cfg.eval.simulate_trials > 0 && kind != metrics::BaselineKind::majority_class) {
        metrics::MethodRow sim;
        sim.name = row.name + " (simulated)";
        const auto r = metrics::simulate_baseline(label_list, kind, cfg.seed,
                                                  cfg.eval.simulate_trials);
        sim.metrics = r.mean;
        sim.metadata["form"] = "monte_carlo";
        sim.metadata["trials"] = std::to_string(r.trials);
        sim.metadata["seed"] = std::to_string(cfg.seed);
        rows.push_back(sim);
      }
    }
  }

  for (const auto& strategy : cfg.strategies) {
    const auto path = predictions_path(cfg, strategy.kind);
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path);
    std::string line;
    std::vector<std::pair<std::string, AttentionLabel>> preds;
    int abstained = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto p = prompt::Prediction::from_json_line(line);
      preds.emplace_back(p.segment_id, p.label);
      if (p.outcome == prompt::Outcome::abstained) ++abstained;
    }
    if (preds.empty()) continue;
    metrics::MethodRow row;
    row.name = strategy.kind.name();
    row.metrics = metrics::metrics(metrics::confusion(preds, labels));
    row.abstention_rate = static_cast<double>(abstained) / static_cast<double>(preds.size());
    row.metadata["strategy"] = strategy.kind.name();
    row.metadata["seed"] = std::to_string(strategy.seed);
    if (!strategy.kind.paper_configuration()) row.metadata["non_paper_k"] = "true";
    rows.push_back(row);
  }

  if (rows.empty()) throw ValidationError("nothing to evaluate: no baselines, no predictions");

  EvaluateOutput out;
  out.rows = rows;
  out.report_json = cfg.out_dir / "report.json";
  out.report_text = cfg.out_dir / "report.txt";

  json j = json::parse(metrics::report_json(rows, dist));
  j["config_hash"] = cfg.config_hash;
  util::write_file(out.report_json, j.dump(2));
  util::write_file(out.report_text, metrics::report_text(rows, dist));
  return out;
}

namespace {

std::string checksum_files(const std::vector<std::filesystem::path>& files) {
  std::vector<std::filesystem::path> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  std::string acc;
  for (const auto& f : sorted) {
    if (!std::filesystem::exists(f)) continue;
    acc += f.filename().string();
    acc += util::sha256_file_hex(f);
  }
  return util::sha256_hex(acc);
}

std::vector<std::filesystem::path> glob_manifests(const std::filesystem::path& clips_dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(clips_dir)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(clips_dir))
    if (e.path().filename() == "manifest.json") out.push_back(e.path());
  return out;
}

}  // namespace

std::string RunManifest::to_json() const {
  json j;
  j["config_hash"] = config_hash;
  j["toolkit_version"] = toolkit_version;
  j["segment_count"] = segment_count;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  json stages_json = json::array();
  for (const auto& s : stages) {
    stages_json.push_back({{"name", s.name},
                           {"completed", s.completed},
                           {"output_checksum", s.output_checksum},
                           {"error", s.error}});
  }
  j["stages"] = std::move(stages_json);
  return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.toolkit_version = j.at("toolkit_version").get<std::string>();
  m.segment_count = j.at("segment_count").get<std::int64_t>();
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  for (const auto& s : j.at("stages")) {
    m.stages.push_back({s.at("name").get<std::string>(), s.at("completed").get<bool>(),
                        s.at("output_checksum").get<std::string>(),
                        s.at("error").get<std::string>()});
  }
  return m;
}

RunManifest cmd_run(const ExperimentConfig& cfg) {
  RunManifest manifest;
  manifest.config_hash = cfg.config_hash;
  manifest.toolkit_version = kToolkitVersion;
  manifest.started_at = iso_timestamp();

  bool failed = false;
  auto run_stage = [&](const std::string& name, auto&& fn,
                       const std::vector<std::filesystem::path>& outputs) {
    StageStatus status;
    status.name = name;
    if (failed) {
      status.error = "skipped: earlier stage failed";
      manifest.stages.push_back(status);
      return;
    }
    try {
      fn();
      status.completed = true;
      status.output_checksum = checksum_files(outputs);
    } catch (const std::exception& e) {
      status.error = e.what();
      failed = true;
    }
    manifest.stages.push_back(status);
  };

  run_stage(
      "ingest",
      [&] { manifest.segment_count = cmd_ingest(cfg).segment_count; },
      {cfg.out_dir / "segments.json", cfg.out_dir / "distribution.json"});

  run_stage(
      "render", [&] { cmd_render(cfg); },
      glob_manifests(cfg.out_dir / "clips"));
  // render outputs enumerated after the stage ran; recompute its checksum
  if (manifest.stages.back().completed)
    manifest.stages.back().output_checksum =
        checksum_files(glob_manifests(cfg.out_dir / "clips"));

  for (const auto& strategy : cfg.strategies) {
    run_stage(
        "classify:" + strategy.kind.name(),
        [&] {
          const auto r = cmd_classify(cfg, strategy);
          if (r.succeeded == 0 && r.failed > 0)
            throw std::runtime_error("every request failed");
        },
        {predictions_path(cfg, strategy.kind)});
  }

  run_stage(
      "evaluate", [&] { cmd_evaluate(cfg); },
      {cfg.out_dir / "report.json", cfg.out_dir / "report.txt"});

  manifest.finished_at = iso_timestamp();
  std::filesystem::create_directories(cfg.out_dir);
  util::write_file(cfg.out_dir / "run_manifest.json", manifest.to_json());
  return manifest;
}

}  // namespace gazevlm::pipeline
