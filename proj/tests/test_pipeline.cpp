#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gazevlm/pipeline.hpp"
#include "fixture.hpp"

#include <json.hpp>

#include <fstream>

using namespace gazevlm;
using nlohmann::json;

TEST_CASE("config: validation names missing paths") {
  const auto root = fixture::fresh_dir("cfg");
  const auto config_path = fixture::make_workspace(root);

  CHECK_NOTHROW(pipeline::load_config(config_path));

  std::filesystem::remove(root / "probes.json");
  try {
    pipeline::load_config(config_path);
    FAIL("expected ValidationError");
  } catch (const pipeline::ValidationError& e) {
    CHECK(std::string(e.what()).find("probes.json") != std::string::npos);
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("ingest: expected segment count and hand-counted distribution") {
  const auto root = fixture::fresh_dir("ingest");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));

  const auto r = pipeline::cmd_ingest(cfg);
  CHECK(r.segment_count == 12);
  // hand count from the fixture ratings: 5 class 0, 7 class 1
  CHECK(r.distribution.n0 == 5);
  CHECK(r.distribution.n1 == 7);
  CHECK(r.distribution.p0 == doctest::Approx(5.0 / 12.0));

  CHECK(std::filesystem::exists(cfg.out_dir / "segments.json"));
  const auto wrapper = json::parse(util::read_file(cfg.out_dir / "segments.json"));
  CHECK(wrapper.at("config_hash").get<std::string>() == cfg.config_hash);
  CHECK(wrapper.at("segments").size() == 12);
  std::filesystem::remove_all(root);
}

TEST_CASE("render: filter, dry-run, and checksum-based skipping") {
  const auto root = fixture::fresh_dir("render");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));

  const auto dry = pipeline::cmd_render(cfg, {"p0:q1", "p1:q2", "p2:q3"}, /*dry_run=*/true);
  CHECK(dry.rendered == 0);
  CHECK(dry.clip_dirs.size() == 3);
  CHECK_FALSE(std::filesystem::exists(cfg.out_dir / "clips"));

  const auto first = pipeline::cmd_render(cfg, {"p0:q1", "p1:q2", "p2:q3"});
  CHECK(first.rendered == 3);
  CHECK(first.skipped == 0);

  const auto again = pipeline::cmd_render(cfg, {"p0:q1", "p1:q2", "p2:q3"});
  CHECK(again.rendered == 0);
  CHECK(again.skipped == 3);

  const auto forced = pipeline::cmd_render(cfg, {"p0:q1"}, false, /*force=*/true);
  CHECK(forced.rendered == 1);
  std::filesystem::remove_all(root);
}

TEST_CASE("classify: mock predictions are deterministic and complete") {
  const auto root = fixture::fresh_dir("classify");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));
  pipeline::cmd_ingest(cfg);
  pipeline::cmd_render(cfg);

  const auto cot = cfg.strategies[1];
  REQUIRE(cot.kind.variant == prompt::Strategy::heuristic_cot);
  const auto r1 = pipeline::cmd_classify(cfg, cot);
  CHECK(r1.succeeded == 12);
  CHECK(r1.failed == 0);
  const auto bytes1 = util::read_file(r1.predictions_file);
  const auto r2 = pipeline::cmd_classify(cfg, cot);
  CHECK(util::read_file(r2.predictions_file) == bytes1);

  // every CoT prediction carries an alignment score
  std::ifstream in(r1.predictions_file);
  std::string line;
  int count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto p = prompt::Prediction::from_json_line(line);
    CHECK(p.alignment_score.has_value());
    CHECK(p.outcome == prompt::Outcome::parsed);
    ++count;
  }
  CHECK(count == 12);
  std::filesystem::remove_all(root);
}

TEST_CASE("classify: blind strategy decodes through the recorded mapping") {
  const auto root = fixture::fresh_dir("blind");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));
  pipeline::cmd_ingest(cfg);
  pipeline::cmd_render(cfg);

  const auto blind = cfg.strategies[3];
  REQUIRE(blind.kind.variant == prompt::Strategy::blind_similarity);
  const auto r = pipeline::cmd_classify(cfg, blind);
  CHECK(r.succeeded == 12);

  // p1 segments must decode to inattentive regardless of the A/B coin flips
  std::ifstream in(r.predictions_file);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto p = prompt::Prediction::from_json_line(line);
    if (p.segment_id.rfind("p1:", 0) == 0)
      CHECK(p.label == seg::AttentionLabel::inattentive);
    else
      CHECK(p.label == seg::AttentionLabel::attentive);
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("evaluate: baseline block plus strategy rows") {
  const auto root = fixture::fresh_dir("eval");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));
  pipeline::cmd_ingest(cfg);
  pipeline::cmd_render(cfg);
  for (const auto& s : cfg.strategies) pipeline::cmd_classify(cfg, s);

  const auto r = pipeline::cmd_evaluate(cfg);
  // 3 baselines + 4 strategies
  CHECK(r.rows.size() == 7);
  CHECK(std::filesystem::exists(r.report_json));
  CHECK(std::filesystem::exists(r.report_text));

  const auto j = json::parse(util::read_file(r.report_json));
  CHECK(j.at("config_hash").get<std::string>() == cfg.config_hash);

  // re-running evaluation yields byte-identical reports
  const auto bytes = util::read_file(r.report_json);
  pipeline::cmd_evaluate(cfg);
  CHECK(util::read_file(r.report_json) == bytes);
  std::filesystem::remove_all(root);
}

TEST_CASE("run: full pipeline emits a manifest; rerun matches stage checksums") {
  const auto root = fixture::fresh_dir("run");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));

  const auto m1 = pipeline::cmd_run(cfg);
  CHECK(m1.segment_count == 12);
  REQUIRE(m1.stages.size() == 7);  // ingest, render, 4x classify, evaluate
  for (const auto& s : m1.stages) {
    CHECK(s.completed);
    CHECK_FALSE(s.output_checksum.empty());
  }

  std::filesystem::remove_all(cfg.out_dir);
  const auto m2 = pipeline::cmd_run(cfg);
  for (std::size_t i = 0; i < m1.stages.size(); ++i) {
    CHECK(m1.stages[i].name == m2.stages[i].name);
    CHECK(m1.stages[i].output_checksum == m2.stages[i].output_checksum);
  }

  // manifest survives a serialization round-trip
  const auto loaded = pipeline::RunManifest::from_json(
      util::read_file(cfg.out_dir / "run_manifest.json"));
  CHECK(loaded.config_hash == cfg.config_hash);
  CHECK(loaded.stages.size() == 7);
  std::filesystem::remove_all(root);
}

TEST_CASE("run: failing encoder stops later stages, manifest records progress") {
  const auto root = fixture::fresh_dir("runfail");
  const auto config_path = fixture::make_workspace(
      root, ",\n  \"encoder_cmd_template\": \"/bin/sh -c 'exit 1' {out}\"");
  const auto cfg = pipeline::load_config(config_path);

  const auto m = pipeline::cmd_run(cfg);
  REQUIRE(m.stages.size() == 7);
  CHECK(m.stages[0].completed);        // ingest
  CHECK_FALSE(m.stages[1].completed);  // render fails in the encoder
  for (std::size_t i = 2; i < m.stages.size(); ++i) {
    CHECK_FALSE(m.stages[i].completed);
    CHECK(m.stages[i].error.find("skipped") != std::string::npos);
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("replay backend: cache round-trip through the pipeline") {
  const auto root = fixture::fresh_dir("replaypipe");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));
  pipeline::cmd_ingest(cfg);
  pipeline::cmd_render(cfg);

  // record mock responses into a cache, then replay them
  const auto segments = pipeline::ingest(cfg);
  auto stats = pipeline::gaze_statistics(segments);
  auto mock = vlm::MockBackend::from_statistic(stats, 0.6);
  auto cache = std::make_shared<vlm::ResponseCache>(root / "cache.jsonl");

  std::vector<prompt::Exemplar> none;
  for (const auto& s : segments) {
    auto bundle = prompt::build_prompt(prompt::StrategyKind::Direct(), s.segment_id,
                                       s.participant_id, "target.bin", none, 0);
    auto request = vlm::make_request(bundle, cfg.model_id, {},
                                     [](const std::string& p) { return p; });
    cache->record(request, mock.classify(request));
  }

  vlm::ReplayBackend replay(cache);
  for (const auto& s : segments) {
    auto bundle = prompt::build_prompt(prompt::StrategyKind::Direct(), s.segment_id,
                                       s.participant_id, "target.bin", none, 0);
    auto request = vlm::make_request(bundle, cfg.model_id, {},
                                     [](const std::string& p) { return p; });
    const auto resp = replay.classify(request);
    CHECK(resp.text == mock.classify(request).text);
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("gaze_statistics separates the fixture participants") {
  const auto root = fixture::fresh_dir("stats");
  const auto cfg = pipeline::load_config(fixture::make_workspace(root));
  const auto segments = pipeline::ingest(cfg);
  const auto stats = pipeline::gaze_statistics(segments);
  for (const auto& [id, frac] : stats) {
    if (id.rfind("p1:", 0) == 0)
      CHECK(frac < 0.1);
    else
      CHECK(frac > 0.9);
  }
  std::filesystem::remove_all(root);
}
