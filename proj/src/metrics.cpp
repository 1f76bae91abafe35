#include "gazevlm/metrics.hpp"

#include "gazevlm/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace gazevlm::metrics {

using nlohmann::json;
using seg::AttentionLabel;

ConfusionMatrix confusion(
    const std::vector<std::pair<std::string, AttentionLabel>>& predictions,
    const std::map<std::string, AttentionLabel>& labels) {
  ConfusionMatrix m;
  std::set<std::string> seen;
  for (const auto& [id, predicted] : predictions) {
    const auto it = labels.find(id);
    if (it == labels.end()) throw UnknownSegment(id);
    if (!seen.insert(id).second) throw DuplicatePrediction(id);
    m.counts[static_cast<int>(it->second)][static_cast<int>(predicted)]++;
  }
  return m;
}

namespace {

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricSet metrics(const ConfusionMatrix& matrix) {
  const auto total = matrix.total();
  if (total == 0) throw EmptyMatrix();

  MetricSet s;
  s.accuracy = static_cast<double>(matrix.counts[0][0] + matrix.counts[1][1]) /
               static_cast<double>(total);
  for (int c = 0; c < 2; ++c) {
    const double tp = static_cast<double>(matrix.counts[c][c]);
    const double fp = static_cast<double>(matrix.counts[1 - c][c]);
    const double fn = static_cast<double>(matrix.counts[c][1 - c]);
    s.precision[c] = safe_ratio(tp, tp + fp);
    s.recall[c] = safe_ratio(tp, tp + fn);
    s.f1[c] = safe_ratio(2.0 * s.precision[c] * s.recall[c], s.precision[c] + s.recall[c]);
  }
  s.macro_precision = (s.precision[0] + s.precision[1]) / 2.0;
  s.macro_recall = (s.recall[0] + s.recall[1]) / 2.0;
  s.macro_f1 = (s.f1[0] + s.f1[1]) / 2.0;
  return s;
}

MetricSet expected_baseline_metrics(const seg::ClassDistribution& dist, BaselineKind kind) {
  const double p[2] = {dist.p0, dist.p1};
  MetricSet s;
  switch (kind) {
    case BaselineKind::majority_class: {
      const int m = dist.p1 >= dist.p0 ? 1 : 0;
      s.accuracy = p[m];
      s.precision[m] = p[m];
      s.recall[m] = 1.0;
      s.f1[m] = safe_ratio(2.0 * p[m], p[m] + 1.0);
      break;
    }
    case BaselineKind::uniform_random: {
      if (dist.p1 == 0.0 || dist.p1 == 1.0) throw DegenerateDistribution();
      s.accuracy = 0.5;
      for (int c = 0; c < 2; ++c) {
        s.precision[c] = p[c];
        s.recall[c] = 0.5;
        s.f1[c] = safe_ratio(p[c], p[c] + 0.5);
      }
      break;
    }
    case BaselineKind::proportional_random: {
      if (dist.p1 == 0.0 || dist.p1 == 1.0) throw DegenerateDistribution();
      s.accuracy = p[0] * p[0] + p[1] * p[1];
      for (int c = 0; c < 2; ++c) {
        s.precision[c] = p[c];
        s.recall[c] = p[c];
        s.f1[c] = p[c];
      }
      break;
    }
  }
  s.macro_precision = (s.precision[0] + s.precision[1]) / 2.0;
  s.macro_recall = (s.recall[0] + s.recall[1]) / 2.0;
  s.macro_f1 = (s.f1[0] + s.f1[1]) / 2.0;
  return s;
}

namespace {

MetricSet run_trial(const std::vector<AttentionLabel>& labels, BaselineKind kind,
                    double p0, std::uint64_t trial_seed) {
  util::Rng rng(trial_seed);
  ConfusionMatrix m;
  for (const auto actual : labels) {
    int predicted = 1;
    switch (kind) {
      case BaselineKind::majority_class:
        predicted = 1;  // resolved by caller for p1 >= p0; flipped otherwise
        break;
      case BaselineKind::uniform_random:
        predicted = rng.coin_flip() ? 1 : 0;
        break;
      case BaselineKind::proportional_random:
        predicted = rng.unit_double() < p0 ? 0 : 1;
        break;
    }
    m.counts[static_cast<int>(actual)][predicted]++;
  }
  return metrics(m);
}

std::array<double, 10> flatten(const MetricSet& s) {
  return {s.accuracy,        s.precision[0], s.precision[1], s.recall[0], s.recall[1],
          s.f1[0],           s.f1[1],        s.macro_precision,
          s.macro_recall,    s.macro_f1};
}

MetricSet unflatten(const std::array<double, 10>& v) {
  MetricSet s;
  s.accuracy = v[0];
  s.precision = {v[1], v[2]};
  s.recall = {v[3], v[4]};
  s.f1 = {v[5], v[6]};
  s.macro_precision = v[7];
  s.macro_recall = v[8];
  s.macro_f1 = v[9];
  return s;
}

SimulatedMetrics simulate_impl(const std::vector<AttentionLabel>& labels,
                               BaselineKind kind, std::uint64_t seed, int trials,
                               bool parallel) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  const auto dist = seg::class_distribution(labels);

  // Majority class resolved once so trials are label-order independent.
  std::vector<AttentionLabel> effective = labels;
  if (kind == BaselineKind::majority_class && dist.p0 > dist.p1)
    for (auto& l : effective)
      l = l == AttentionLabel::inattentive ? AttentionLabel::attentive
                                           : AttentionLabel::inattentive;

  std::vector<std::array<double, 10>> per_trial(static_cast<std::size_t>(trials));

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int t = 0; t < trials; ++t) {
    const auto sub_seed = util::splitmix64(seed + static_cast<std::uint64_t>(t));
    per_trial[static_cast<std::size_t>(t)] =
        flatten(run_trial(effective, kind, dist.p0, sub_seed));
  }
  (void)parallel;

  // Sequential reduction in trial order keeps results thread-count independent.
  std::array<double, 10> mean{}, m2{};
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < 10; ++i) mean[i] += per_trial[static_cast<std::size_t>(t)][i];
  }
  for (int i = 0; i < 10; ++i) mean[i] /= trials;
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < 10; ++i) {
      const double d = per_trial[static_cast<std::size_t>(t)][i] - mean[i];
      m2[i] += d * d;
    }
  }
  std::array<double, 10> sd{};
  for (int i = 0; i < 10; ++i) sd[i] = trials > 1 ? std::sqrt(m2[i] / (trials - 1)) : 0.0;

  SimulatedMetrics out;
  out.mean = unflatten(mean);
  out.stddev = unflatten(sd);
  out.trials = trials;
  return out;
}

}  // namespace

SimulatedMetrics simulate_baseline(const std::vector<AttentionLabel>& labels,
                                   BaselineKind kind, std::uint64_t seed, int trials) {
  return simulate_impl(labels, kind, seed, trials, true);
}

SimulatedMetrics simulate_baseline_serial(const std::vector<AttentionLabel>& labels,
                                          BaselineKind kind, std::uint64_t seed,
                                          int trials) {
  return simulate_impl(labels, kind, seed, trials, false);
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::majority_class: return "Majority Class";
    case BaselineKind::uniform_random: return "Uniform Random";
    case BaselineKind::proportional_random: return "Proportional Random";
  }
  return "unknown";
}

namespace {

std::string fmt3(double v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string report_text(const std::vector<MethodRow>& rows,
                        const seg::ClassDistribution& dist) {
  std::size_t name_w = 6;
  for (const auto& r : rows) name_w = std::max(name_w, r.name.size());

  std::ostringstream out;
  out << "Segments: " << dist.n0 + dist.n1 << "  (class 0: " << dist.n0 << " = "
      << fmt3(dist.p0 * 100.0) << "%, class 1: " << dist.n1 << " = "
      << fmt3(dist.p1 * 100.0) << "%)\n\n";

  out << std::string(name_w, ' ').replace(0, 6, "Method");
  out << "  Acc.   Prec. (Mac)  Rec. (Mac)  F1 (Mac)  Abst.\n";
  for (const auto& r : rows) {
    out << r.name << std::string(name_w - r.name.size(), ' ');
    out << "  " << fmt3(r.metrics.accuracy) << "  " << fmt3(r.metrics.macro_precision)
        << "        " << fmt3(r.metrics.macro_recall) << "       "
        << fmt3(r.metrics.macro_f1) << "     " << fmt3(r.abstention_rate) << "\n";
  }
  return out.str();
}

std::string report_json(const std::vector<MethodRow>& rows,
                        const seg::ClassDistribution& dist) {
  json j;
  j["class_distribution"] = {
      {"n0", dist.n0}, {"n1", dist.n1}, {"p0", dist.p0}, {"p1", dist.p1}};
  json methods = json::array();
  for (const auto& r : rows) {
    json e;
    e["name"] = r.name;
    e["accuracy"] = r.metrics.accuracy;
    e["precision"] = r.metrics.precision;
    e["recall"] = r.metrics.recall;
    e["f1"] = r.metrics.f1;
    e["macro_precision"] = r.metrics.macro_precision;
    e["macro_recall"] = r.metrics.macro_recall;
    e["macro_f1"] = r.metrics.macro_f1;
    e["abstention_rate"] = r.abstention_rate;
    e["metadata"] = r.metadata;
    methods.push_back(std::move(e));
  }
  j["methods"] = std::move(methods);
  return j.dump(2);
}

}  // namespace gazevlm::metrics
