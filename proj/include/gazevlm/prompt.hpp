#pragma once

#include "gazevlm/segment.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazevlm::prompt {

enum class Strategy { direct, heuristic_cot, few_shot, blind_similarity };

struct StrategyKind {
  Strategy variant = Strategy::direct;
  int k = 0;  // exemplars per class (few_shot / blind_similarity)

  static StrategyKind Direct() { return {Strategy::direct, 0}; }
  static StrategyKind HeuristicCoT() { return {Strategy::heuristic_cot, 0}; }
  static StrategyKind FewShot(int k) { return {Strategy::few_shot, k}; }
  static StrategyKind BlindSimilarity(int k) { return {Strategy::blind_similarity, k}; }

  bool uses_exemplars() const {
    return variant == Strategy::few_shot || variant == Strategy::blind_similarity;
  }
  // k values other than the studied 1 and 5 are allowed but flagged.
  bool paper_configuration() const { return !uses_exemplars() || k == 1 || k == 5; }
  std::string name() const;
};

struct Exemplar {
  std::string segment_ref;
  std::string participant_id;
  std::string clip_ref;
  seg::AttentionLabel true_class = seg::AttentionLabel::attentive;
};

// Blind A/B assignment: which true class each anonymous letter stands for.
struct BlindMapping {
  seg::AttentionLabel class_a = seg::AttentionLabel::attentive;
  seg::AttentionLabel class_b = seg::AttentionLabel::inattentive;
};

struct PromptBundle {
  StrategyKind strategy;
  std::string target_segment_id;
  std::string system_text;
  std::string user_text;
  std::vector<std::string> media;  // exemplar clips first, target clip last
  std::optional<BlindMapping> blind_mapping;
  std::string response_schema_hint;
};

enum class Outcome { parsed, abstained };

struct Prediction {
  std::string segment_id;
  seg::AttentionLabel label = seg::AttentionLabel::attentive;
  std::optional<int> alignment_score;  // heuristic_cot only
  std::optional<std::string> justification;
  std::vector<std::string> evidence;
  Outcome outcome = Outcome::parsed;
  std::string raw_text;  // preserved on abstention for audit

  std::string to_json_line() const;
  static Prediction from_json_line(const std::string& line);
};

struct ExemplarCountMismatch : std::runtime_error {
  explicit ExemplarCountMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct ExemplarLeak : std::runtime_error {
  explicit ExemplarLeak(const std::string& participant)
      : std::runtime_error("exemplar shares participant with target: " + participant) {}
};

struct InsufficientPool : std::runtime_error {
  int class_id;
  explicit InsufficientPool(int cls)
      : std::runtime_error("insufficient exemplar pool for class " + std::to_string(cls)),
        class_id(cls) {}
};

// Prompt wording lives in templates; defaults are compiled in, a template
// directory can override any of them by file name.
struct PromptTemplates {
  std::string system_text;
  std::string blind_system_text;
  std::string direct_user;
  std::string cot_user;
  std::string few_shot_user;
  std::string blind_user;
  std::string schema_hint;
  std::string cot_schema_hint;
  std::string blind_schema_hint;

  static PromptTemplates defaults();
  static PromptTemplates load_dir(const std::filesystem::path& dir);
};

struct BuildOptions {
  bool exclude_same_participant = true;
  PromptTemplates templates = PromptTemplates::defaults();
};

PromptBundle build_prompt(const StrategyKind& strategy, const std::string& target_segment_id,
                          const std::string& target_participant_id,
                          const std::string& target_clip,
                          const std::vector<Exemplar>& exemplars, std::uint64_t blind_seed,
                          const BuildOptions& opts = {});

std::vector<Exemplar> select_exemplars(const std::vector<Exemplar>& pool, int k,
                                       std::uint64_t seed,
                                       const std::optional<std::string>& excluded_participant);

Prediction parse_response(const std::string& raw, const StrategyKind& strategy,
                          const std::optional<BlindMapping>& blind_mapping,
                          const std::string& segment_id,
                          seg::AttentionLabel fallback = seg::AttentionLabel::attentive);

// Tokens that must never appear in blind-similarity prompt text.
bool contains_attention_lexicon(const std::string& text);

}  // namespace gazevlm::prompt
