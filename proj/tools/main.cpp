#include "gazevlm/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace gazevlm;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitPartial = 2;
constexpr int kExitTotal = 3;

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool dry_run = false;
  bool force = false;
};

pipeline::ExperimentConfig load(const GlobalOpts& g) {
  auto cfg = pipeline::load_config(g.config_path);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaze-overlay attention evaluation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // accept global options after the subcommand name

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config file")->required();
  app.add_option("--out", g.out_dir, "override output directory");
  app.add_option("--seed", g.seed, "override global seed");
  app.add_option("--workers", g.workers, "worker count for parallel stages");
  app.add_flag("--dry-run", g.dry_run, "plan only, write nothing");
  app.add_flag("--force", g.force, "re-render even when outputs are up to date");

  auto* ingest = app.add_subcommand("ingest", "parse gaze logs, cut labeled segments");
  auto* render = app.add_subcommand("render", "composite gaze overlays into clips");
  std::vector<std::string> segment_filter;
  render->add_option("--segment", segment_filter, "restrict to these segment ids");
  auto* classify = app.add_subcommand("classify", "run prompting strategies");
  std::string only_strategy;
  classify->add_option("--strategy", only_strategy, "run a single strategy by name");
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against labels");
  auto* run = app.add_subcommand("run", "run all stages end to end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage message
    return kExitValidation;
  }

  try {
    const auto cfg = load(g);

    if (ingest->parsed()) {
      const auto r = pipeline::cmd_ingest(cfg);
      std::printf("segments: %lld  (class 0: %lld, class 1: %lld)\n",
                  static_cast<long long>(r.segment_count),
                  static_cast<long long>(r.distribution.n0),
                  static_cast<long long>(r.distribution.n1));
      return kExitOk;
    }

    if (render->parsed()) {
      const auto r = pipeline::cmd_render(cfg, segment_filter, g.dry_run, g.force);
      if (g.dry_run) {
        for (const auto& d : r.clip_dirs) std::printf("would render: %s\n", d.c_str());
      } else {
        std::printf("rendered: %d  skipped (up to date): %d\n", r.rendered, r.skipped);
      }
      return kExitOk;
    }

    if (classify->parsed()) {
      int total_failed = 0, total_ok = 0;
      for (const auto& s : cfg.strategies) {
        if (!only_strategy.empty() && s.kind.name() != only_strategy) continue;
        const auto r = pipeline::cmd_classify(cfg, s);
        std::printf("%s: %d predictions, %d failed -> %s\n", s.kind.name().c_str(),
                    r.succeeded, r.failed, r.predictions_file.string().c_str());
        total_failed += r.failed;
        total_ok += r.succeeded;
      }
      if (total_ok == 0 && total_failed > 0) return kExitTotal;
      if (total_failed > 0) return kExitPartial;
      return kExitOk;
    }

    if (evaluate->parsed()) {
      const auto r = pipeline::cmd_evaluate(cfg);
      std::cout << gazevlm::util::read_file(r.report_text);
      return kExitOk;
    }

    if (run->parsed()) {
      const auto manifest = pipeline::cmd_run(cfg);
      bool any_failed = false, all_failed = true;
      for (const auto& s : manifest.stages) {
        std::printf("%-28s %s%s%s\n", s.name.c_str(), s.completed ? "ok" : "FAILED",
                    s.error.empty() ? "" : ": ", s.error.c_str());
        any_failed |= !s.completed;
        all_failed &= !s.completed;
      }
      if (all_failed) return kExitTotal;
      if (any_failed) return kExitPartial;
      return kExitOk;
    }
  } catch (const pipeline::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitTotal;
  }
  return kExitOk;
}
