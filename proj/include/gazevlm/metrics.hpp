#pragma once

#include "gazevlm/segment.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazevlm::metrics {

struct ConfusionMatrix {
  // counts[actual][predicted]
  std::array<std::array<std::int64_t, 2>, 2> counts = {{{0, 0}, {0, 0}}};

  std::int64_t total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
};

struct MetricSet {
  double accuracy = 0.0;
  std::array<double, 2> precision = {0.0, 0.0};
  std::array<double, 2> recall = {0.0, 0.0};
  std::array<double, 2> f1 = {0.0, 0.0};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

enum class BaselineKind { majority_class, uniform_random, proportional_random };

struct SimulatedMetrics {
  MetricSet mean;
  MetricSet stddev;
  int trials = 0;
};

struct MethodRow {
  std::string name;
  MetricSet metrics;
  std::map<std::string, std::string> metadata;  // strategy, seeds, backend tag...
  double abstention_rate = 0.0;
};

struct UnknownSegment : std::runtime_error {
  explicit UnknownSegment(const std::string& id)
      : std::runtime_error("prediction for unknown segment: " + id) {}
};

struct DuplicatePrediction : std::runtime_error {
  explicit DuplicatePrediction(const std::string& id)
      : std::runtime_error("duplicate prediction for segment: " + id) {}
};

struct EmptyMatrix : std::runtime_error {
  EmptyMatrix() : std::runtime_error("confusion matrix has zero total") {}
};

struct DegenerateDistribution : std::runtime_error {
  DegenerateDistribution()
      : std::runtime_error("random baseline undefined for a single-class distribution") {}
};

ConfusionMatrix confusion(
    const std::vector<std::pair<std::string, seg::AttentionLabel>>& predictions,
    const std::map<std::string, seg::AttentionLabel>& labels);

// Zero-division policy: 0/0 ratios resolve to 0.
MetricSet metrics(const ConfusionMatrix& matrix);

MetricSet expected_baseline_metrics(const seg::ClassDistribution& dist, BaselineKind kind);

SimulatedMetrics simulate_baseline(const std::vector<seg::AttentionLabel>& labels,
                                   BaselineKind kind, std::uint64_t seed, int trials);

// Serial reference for the OpenMP simulation path; identical results required.
SimulatedMetrics simulate_baseline_serial(const std::vector<seg::AttentionLabel>& labels,
                                          BaselineKind kind, std::uint64_t seed, int trials);

std::string baseline_name(BaselineKind kind);

// Table 1-style report: aligned plain text and a JSON document, 3 d.p. cells.
std::string report_text(const std::vector<MethodRow>& rows,
                        const seg::ClassDistribution& dist);
std::string report_json(const std::vector<MethodRow>& rows,
                        const seg::ClassDistribution& dist);

}  // namespace gazevlm::metrics
