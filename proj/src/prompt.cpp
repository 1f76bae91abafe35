#include "gazevlm/prompt.hpp"

#include "gazevlm/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>

namespace gazevlm::prompt {

using nlohmann::json;
using seg::AttentionLabel;

std::string StrategyKind::name() const {
  switch (variant) {
    case Strategy::direct: return "direct";
    case Strategy::heuristic_cot: return "heuristic_cot";
    case Strategy::few_shot: return "few_shot_" + std::to_string(k);
    case Strategy::blind_similarity: return "blind_similarity_" + std::to_string(k);
  }
  return "unknown";
}

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.system_text =
      "You analyze screen recordings of a learner watching an educational video. "
      "A semi-transparent red circle superimposed on the frames marks where the "
      "learner is looking at each moment.";
  t.blind_system_text =
      "You compare screen recordings of a viewer watching an educational video. "
      "A semi-transparent red circle superimposed on the frames marks where the "
      "viewer is looking at each moment.";
  t.direct_user =
      "Watch the clip and classify the learner's state. "
      "Output \"Attentive\" or \"Inattentive\" directly.\n\n{schema_hint}";
  t.cot_user =
      "Watch the clip and follow this reasoning pipeline:\n"
      "1. Identify the key pedagogical concept on screen.\n"
      "2. Estimate a \"Gaze-Content Alignment\" score (0-100) for how closely the "
      "red circle tracks that concept.\n"
      "3. Classify the learner's state as \"Attentive\" or \"Inattentive\" based on "
      "this alignment.\n\n{schema_hint}";
  t.few_shot_user =
      "First study the example clips, then classify the final clip.\n\n"
      "{exemplar_block}\n"
      "The final clip is the one to classify. Output \"Attentive\" or "
      "\"Inattentive\".\n\n{schema_hint}";
  t.blind_user =
      "First study the example clips, then judge the final clip.\n\n"
      "{exemplar_block}\n"
      "Decide whether the final clip is more similar to the Class A examples or "
      "the Class B examples, judging by how the red circle moves relative to the "
      "on-screen content. Output \"Class A\" or \"Class B\".\n\n{schema_hint}";
  t.schema_hint =
      "Respond with a machine-parseable block in exactly this format:\n"
      "CLASSIFICATION: <Attentive|Inattentive>\n"
      "JUSTIFICATION: <one paragraph>\n"
      "EVIDENCE:\n"
      "- <specific visual observation>\n"
      "- <specific visual observation>";
  t.cot_schema_hint =
      "Respond with a machine-parseable block in exactly this format:\n"
      "CLASSIFICATION: <Attentive|Inattentive>\n"
      "ALIGNMENT: <integer 0-100>\n"
      "JUSTIFICATION: <one paragraph>\n"
      "EVIDENCE:\n"
      "- <specific visual observation>\n"
      "- <specific visual observation>";
  t.blind_schema_hint =
      "Respond with a machine-parseable block in exactly this format:\n"
      "CLASSIFICATION: <Class A|Class B>\n"
      "JUSTIFICATION: <one paragraph>\n"
      "EVIDENCE:\n"
      "- <specific visual observation>\n"
      "- <specific visual observation>";
  return t;
}

PromptTemplates PromptTemplates::load_dir(const std::filesystem::path& dir) {
  PromptTemplates t = defaults();
  auto maybe = [&](const char* name, std::string& slot) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) slot = util::read_file(p);
  };
  maybe("system.txt", t.system_text);
  maybe("blind_system.txt", t.blind_system_text);
  maybe("direct_user.txt", t.direct_user);
  maybe("cot_user.txt", t.cot_user);
  maybe("few_shot_user.txt", t.few_shot_user);
  maybe("blind_user.txt", t.blind_user);
  maybe("schema_hint.txt", t.schema_hint);
  maybe("cot_schema_hint.txt", t.cot_schema_hint);
  maybe("blind_schema_hint.txt", t.blind_schema_hint);
  return t;
}

bool contains_attention_lexicon(const std::string& text) {
  const std::string lower = util::to_lower(text);
  // "attentive" also matches inside "inattentive".
  for (const char* token :
       {"attentive", "attention", "engaged", "disengaged", "mind-wandering"}) {
    if (lower.find(token) != std::string::npos) return true;
  }
  return false;
}

namespace {

std::string substitute(std::string tmpl, const std::string& key, const std::string& val) {
  std::string::size_type pos = 0;
  while ((pos = tmpl.find(key, pos)) != std::string::npos) {
    tmpl.replace(pos, key.size(), val);
    pos += val.size();
  }
  return tmpl;
}

void check_exemplars(const StrategyKind& strategy, const std::vector<Exemplar>& exemplars,
                     const std::string& target_participant, bool exclude) {
  if (!strategy.uses_exemplars()) {
    if (!exemplars.empty())
      throw ExemplarCountMismatch(strategy.name() + " takes no exemplars");
    return;
  }
  int n0 = 0, n1 = 0;
  for (const auto& e : exemplars) {
    (e.true_class == AttentionLabel::inattentive ? n0 : n1)++;
    if (exclude && !target_participant.empty() && e.participant_id == target_participant)
      throw ExemplarLeak(e.participant_id);
  }
  if (n0 != strategy.k || n1 != strategy.k)
    throw ExemplarCountMismatch(strategy.name() + " needs exactly " +
                                std::to_string(strategy.k) + " exemplars per class, got " +
                                std::to_string(n0) + "/" + std::to_string(n1));
}

}  // namespace

PromptBundle build_prompt(const StrategyKind& strategy, const std::string& target_segment_id,
                          const std::string& target_participant_id,
                          const std::string& target_clip,
                          const std::vector<Exemplar>& exemplars, std::uint64_t blind_seed,
                          const BuildOptions& opts) {
  check_exemplars(strategy, exemplars, target_participant_id,
                  opts.exclude_same_participant);

  const auto& t = opts.templates;
  PromptBundle bundle;
  bundle.strategy = strategy;
  bundle.target_segment_id = target_segment_id;

  const bool blind = strategy.variant == Strategy::blind_similarity;
  bundle.system_text = blind ? t.blind_system_text : t.system_text;

  if (blind) {
    BlindMapping m;
    util::Rng rng(blind_seed);
    if (rng.coin_flip()) {
      m.class_a = AttentionLabel::attentive;
      m.class_b = AttentionLabel::inattentive;
    } else {
      m.class_a = AttentionLabel::inattentive;
      m.class_b = AttentionLabel::attentive;
    }
    bundle.blind_mapping = m;
  }

  std::string exemplar_block;
  int idx = 1;
  for (const auto& e : exemplars) {
    std::string label;
    if (blind) {
      label = (e.true_class == bundle.blind_mapping->class_a) ? "Class A" : "Class B";
    } else {
      label = (e.true_class == AttentionLabel::attentive) ? "Attentive" : "Inattentive";
    }
    exemplar_block += "Example clip " + std::to_string(idx++) + ": " + label + "\n";
    bundle.media.push_back(e.clip_ref);
  }
  bundle.media.push_back(target_clip);

  std::string schema_hint;
  std::string user;
  switch (strategy.variant) {
    case Strategy::direct:
      schema_hint = t.schema_hint;
      user = t.direct_user;
      break;
    case Strategy::heuristic_cot:
      schema_hint = t.cot_schema_hint;
      user = t.cot_user;
      break;
    case Strategy::few_shot:
      schema_hint = t.schema_hint;
      user = t.few_shot_user;
      break;
    case Strategy::blind_similarity:
      schema_hint = t.blind_schema_hint;
      user = t.blind_user;
      break;
  }
  user = substitute(user, "{exemplar_block}", exemplar_block);
  user = substitute(user, "{schema_hint}", schema_hint);
  bundle.user_text = user;
  bundle.response_schema_hint = schema_hint;
  return bundle;
}

std::vector<Exemplar> select_exemplars(const std::vector<Exemplar>& pool, int k,
                                       std::uint64_t seed,
                                       const std::optional<std::string>& excluded_participant) {
  std::vector<Exemplar> class0, class1;
  for (const auto& e : pool) {
    if (excluded_participant && e.participant_id == *excluded_participant) continue;
    (e.true_class == AttentionLabel::inattentive ? class0 : class1).push_back(e);
  }
  if (static_cast<int>(class0.size()) < k) throw InsufficientPool(0);
  if (static_cast<int>(class1.size()) < k) throw InsufficientPool(1);

  util::Rng rng(seed);
  auto draw = [&](std::vector<Exemplar>& from) {
    std::vector<Exemplar> picked;
    for (int i = 0; i < k; ++i) {
      const auto j = rng.below(from.size());
      picked.push_back(from[j]);
      from.erase(from.begin() + static_cast<std::ptrdiff_t>(j));
    }
    return picked;
  };
  auto sel0 = draw(class0);
  auto sel1 = draw(class1);

  // Interleave attentive/inattentive so neither class always comes first.
  std::vector<Exemplar> out;
  for (int i = 0; i < k; ++i) {
    out.push_back(sel1[static_cast<std::size_t>(i)]);
    out.push_back(sel0[static_cast<std::size_t>(i)]);
  }
  return out;
}

namespace {

// Classifies an occurrence of "attentive" at pos as negated if preceded by "in".
std::optional<AttentionLabel> scan_last_class_keyword(const std::string& lower) {
  std::optional<AttentionLabel> found;
  std::string::size_type pos = 0;
  while ((pos = lower.find("attentive", pos)) != std::string::npos) {
    const bool negated = pos >= 2 && lower.compare(pos - 2, 2, "in") == 0;
    found = negated ? AttentionLabel::inattentive : AttentionLabel::attentive;
    pos += 1;
  }
  return found;
}

std::optional<AttentionLabel> scan_last_blind_keyword(const std::string& lower,
                                                      const BlindMapping& m) {
  std::optional<AttentionLabel> found;
  std::string::size_type best = std::string::npos;
  for (const auto& [token, cls] :
       {std::pair<std::string, AttentionLabel>{"class a", m.class_a},
        std::pair<std::string, AttentionLabel>{"class b", m.class_b}}) {
    std::string::size_type pos = 0;
    while ((pos = lower.find(token, pos)) != std::string::npos) {
      if (best == std::string::npos || pos > best) {
        best = pos;
        found = cls;
      }
      pos += 1;
    }
  }
  return found;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Prediction parse_response(const std::string& raw, const StrategyKind& strategy,
                          const std::optional<BlindMapping>& blind_mapping,
                          const std::string& segment_id, AttentionLabel fallback) {
  Prediction p;
  p.segment_id = segment_id;
  p.raw_text = raw;

  std::optional<AttentionLabel> label;
  bool in_evidence = false;

  std::istringstream ss(raw);
  std::string line;
  while (std::getline(ss, line)) {
    const std::string lower = util::to_lower(line);
    if (lower.rfind("classification:", 0) == 0) {
      const std::string value = util::to_lower(trim(line.substr(15)));
      if (blind_mapping)
        label = scan_last_blind_keyword(value, *blind_mapping);
      else
        label = scan_last_class_keyword(value);
      in_evidence = false;
    } else if (lower.rfind("alignment:", 0) == 0) {
      try {
        const int v = std::stoi(trim(line.substr(10)));
        if (v >= 0 && v <= 100 && strategy.variant == Strategy::heuristic_cot)
          p.alignment_score = v;
      } catch (...) {
      }
      in_evidence = false;
    } else if (lower.rfind("justification:", 0) == 0) {
      p.justification = trim(line.substr(14));
      in_evidence = false;
    } else if (lower.rfind("evidence:", 0) == 0) {
      in_evidence = true;
      const std::string inline_part = trim(line.substr(9));
      if (!inline_part.empty()) p.evidence.push_back(inline_part);
    } else if (in_evidence) {
      const std::string item = trim(line);
      if (item.size() > 1 && (item[0] == '-' || item[0] == '*'))
        p.evidence.push_back(trim(item.substr(1)));
      else if (!item.empty())
        p.evidence.push_back(item);
      else
        in_evidence = false;
    }
  }

  if (!label) {
    // Fallback: last class keyword anywhere in the free text.
    const std::string lower = util::to_lower(raw);
    label = blind_mapping ? scan_last_blind_keyword(lower, *blind_mapping)
                          : scan_last_class_keyword(lower);
  }

  if (label) {
    p.label = *label;
    p.outcome = Outcome::parsed;
  } else {
    p.label = fallback;
    p.outcome = Outcome::abstained;
    p.alignment_score.reset();
  }
  return p;
}

std::string Prediction::to_json_line() const {
  json j;
  j["segment_id"] = segment_id;
  j["label"] = static_cast<int>(label);
  if (alignment_score) j["alignment_score"] = *alignment_score;
  if (justification) j["justification"] = *justification;
  j["evidence"] = evidence;
  j["outcome"] = outcome == Outcome::parsed ? "parsed" : "abstained";
  if (outcome == Outcome::abstained) j["raw_text"] = raw_text;
  return j.dump();
}

Prediction Prediction::from_json_line(const std::string& line) {
  const json j = json::parse(line);
  Prediction p;
  p.segment_id = j.at("segment_id").get<std::string>();
  p.label = static_cast<AttentionLabel>(j.at("label").get<int>());
  if (j.contains("alignment_score")) p.alignment_score = j["alignment_score"].get<int>();
  if (j.contains("justification")) p.justification = j["justification"].get<std::string>();
  p.evidence = j.at("evidence").get<std::vector<std::string>>();
  p.outcome = j.at("outcome").get<std::string>() == "parsed" ? Outcome::parsed
                                                             : Outcome::abstained;
  if (j.contains("raw_text")) p.raw_text = j["raw_text"].get<std::string>();
  return p;
}

}  // namespace gazevlm::prompt
