#include "counterprobe/metrics_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "counterprobe/errors.hpp"
#include "counterprobe/text.hpp"

namespace counterprobe {

std::string_view to_string(Preferred p) {
  switch (p) {
    case Preferred::Female:
      return "female";
    case Preferred::Male:
      return "male";
    case Preferred::None:
      return "none";
  }
  return "none";
}

Preferred preferred_from_string(std::string_view s) {
  if (s == "female") return Preferred::Female;
  if (s == "male") return Preferred::Male;
  if (s == "none") return Preferred::None;
  throw ParseError("unknown preferred class '" + std::string(s) + "'");
}

void finalize_condition(ConditionResult& r) {
  r.margin = std::abs(r.p_female - r.p_male);
  r.preferred = r.p_female > r.p_male ? Preferred::Female
                : r.p_male > r.p_female ? Preferred::Male
                                         : Preferred::None;
  const double gendered = r.p_female + r.p_male;
  r.non_gendered = !(gendered > 0.0);
  r.p_female_norm = r.non_gendered ? 0.0 : r.p_female / gendered;
  r.p_male_norm = r.non_gendered ? 0.0 : r.p_male / gendered;
}

ConditionResult aggregate(std::span<const TokenScore> scores, const Lexicon& lexicon, std::size_t k) {
  if (k == 0) throw UsageError("k must be >= 1");
  if (k > scores.size()) {
    throw UsageError("k=" + std::to_string(k) + " exceeds the " + std::to_string(scores.size()) + " available scores");
  }
  ConditionResult r;
  r.k = k;
  for (const auto& s : scores.first(k)) {
    switch (lexicon.classify(s.token)) {
      case TokenClass::Female:
        r.p_female += s.probability;
        break;
      case TokenClass::Male:
        r.p_male += s.probability;
        break;
      case TokenClass::Unmapped:
        r.p_other += s.probability;
        break;
    }
  }
  finalize_condition(r);
  return r;
}

std::string_view to_string(RatioGap g) {
  return g == RatioGap::AbsentFromBase ? "absent-from-base" : "absent-from-knowledge";
}

namespace {

const TokenScore* find_token(std::span<const TokenScore> scores, std::string_view token) {
  for (const auto& s : scores) {
    if (s.token == token) return &s;
  }
  return nullptr;
}

}  // namespace

RatioOutcome relative_probability(std::string_view token, std::span<const TokenScore> base_scores,
                                  std::span<const TokenScore> knowledge_scores, PromptKind kind) {
  RatioOutcome out;
  out.token = std::string(token);
  const auto* k = find_token(knowledge_scores, token);
  const auto* b = find_token(base_scores, token);
  if (!k) {
    out.gap = RatioGap::AbsentFromKnowledge;
    return out;
  }
  if (!b) {
    out.gap = RatioGap::AbsentFromBase;
    return out;
  }
  if (!(b->probability >= kRatioDenominatorFloor)) {
    throw UsageError("degenerate denominator: p('" + out.token + "' | base) is below the positivity floor");
  }
  out.value = RelativeProbability{out.token, k->probability / b->probability, kind};
  return out;
}

std::vector<RatioOutcome> relative_probabilities(std::span<const TokenScore> base_scores,
                                                 std::span<const TokenScore> knowledge_scores, PromptKind kind) {
  std::vector<RatioOutcome> out;
  out.reserve(knowledge_scores.size());
  for (const auto& s : knowledge_scores) out.push_back(relative_probability(s.token, base_scores, knowledge_scores, kind));
  return out;
}

std::optional<double> geometric_mean_ratio(std::span<const RatioOutcome> outcomes) {
  double log_sum = 0.0;
  std::size_t n = 0;
  for (const auto& o : outcomes) {
    if (!o.value) continue;
    log_sum += std::log(o.value->ratio);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::exp(log_sum / static_cast<double>(n));
}

std::string_view to_string(Effect e) {
  switch (e) {
    case Effect::Enhanced:
      return "enhanced";
    case Effect::Mitigated:
      return "mitigated";
    case Effect::Overturned:
      return "overturned";
    case Effect::Unchanged:
      return "unchanged";
  }
  return "unchanged";
}

Effect effect_from_string(std::string_view s) {
  for (Effect e : {Effect::Enhanced, Effect::Mitigated, Effect::Overturned, Effect::Unchanged}) {
    if (to_string(e) == s) return e;
  }
  throw ParseError("unknown effect '" + std::string(s) + "'");
}

EffectRecord classify_effect(const ConditionResult& base, const ConditionResult& knowledge, double tolerance) {
  if (base.occupation != knowledge.occupation || base.model_id != knowledge.model_id || base.k != knowledge.k) {
    throw UsageError("classify_effect: base (" + base.occupation + ", " + base.model_id + ", k=" +
                     std::to_string(base.k) + ") and knowledge (" + knowledge.occupation + ", " + knowledge.model_id +
                     ", k=" + std::to_string(knowledge.k) + ") are not linked");
  }
  if (base.kind != PromptKind::Base) throw UsageError("classify_effect: first argument is not a base-prompt result");
  if (knowledge.kind == PromptKind::Base) throw UsageError("classify_effect: second argument is a base-prompt result");

  EffectRecord e;
  e.occupation = base.occupation;
  e.kind = knowledge.kind;
  e.model_id = base.model_id;
  e.k = base.k;
  e.base_margin = base.margin;
  e.knowledge_margin = knowledge.margin;
  e.base_preferred = base.preferred;
  e.knowledge_preferred = knowledge.preferred;

  const bool both_decided = base.preferred != Preferred::None && knowledge.preferred != Preferred::None;
  const double delta = knowledge.margin - base.margin;
  if (both_decided && base.preferred != knowledge.preferred) {
    e.effect = Effect::Overturned;
  } else if (base.preferred == knowledge.preferred && std::abs(delta) > tolerance) {
    e.effect = delta > 0.0 ? Effect::Enhanced : Effect::Mitigated;
  } else {
    e.effect = Effect::Unchanged;
  }
  return e;
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Pro:
      return "pro";
    case Direction::Anti:
      return "anti";
    case Direction::Neutral:
      return "neutral";
  }
  return "neutral";
}

Direction stereotype_direction(const ConditionResult& result, const Occupation& occ) {
  if (result.preferred == Preferred::None) return Direction::Neutral;
  const Preferred stereo = occ.dominance == Dominance::FemaleDominated ? Preferred::Female : Preferred::Male;
  return result.preferred == stereo ? Direction::Pro : Direction::Anti;
}

std::optional<ConditionResult> pool_samples(std::span<const ConditionResult> samples) {
  std::optional<ConditionResult> pooled;
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (s.non_gendered) continue;
    if (!pooled) {
      pooled = ConditionResult{};
      pooled->model_id = s.model_id;
      pooled->occupation = s.occupation;
      pooled->kind = s.kind;
      pooled->k = s.k;
    }
    pooled->p_female += s.p_female;
    pooled->p_male += s.p_male;
    pooled->p_other += s.p_other;
    ++n;
  }
  if (!pooled) return std::nullopt;
  if (n > 1) {
    pooled->prompt_id.clear();
    const double inv = 1.0 / static_cast<double>(n);
    pooled->p_female *= inv;
    pooled->p_male *= inv;
    pooled->p_other *= inv;
  } else {
    for (const auto& s : samples) {
      if (!s.non_gendered) pooled->prompt_id = s.prompt_id;
    }
  }
  finalize_condition(*pooled);
  return pooled;
}

// --- analysis --------------------------------------------------------------

AnalysisResult analyze(std::span<const ProbePrompt> dataset, std::span<const RawResult> raw, const Lexicon& lexicon,
                       const AnalysisOptions& options) {
  if (options.ks.empty()) throw UsageError("analysis needs at least one k");
  for (auto k : options.ks) {
    if (k == 0) throw UsageError("k must be >= 1");
  }

  std::unordered_map<std::string, const ProbePrompt*> prompts;
  for (const auto& p : dataset) prompts.emplace(p.id, &p);

  // (occupation, model) -> base response
  std::map<std::pair<std::string, std::string>, const RawResult*> base_of;
  for (const auto& r : raw) {
    const auto it = prompts.find(r.prompt_id);
    if (it == prompts.end()) throw ValidationError("raw result for unknown prompt " + r.prompt_id);
    if (it->second->kind == PromptKind::Base) base_of[{it->second->occupation.name, r.model_id}] = &r;
  }

  AnalysisResult out;
  using CellKey = std::tuple<std::string, std::size_t, std::string, PromptKind>;  // model, k, occupation, kind
  std::map<CellKey, std::vector<ConditionResult>> cells;

  for (const auto& r : raw) {
    const ProbePrompt& p = *prompts.at(r.prompt_id);
    const auto base_it = base_of.find({p.occupation.name, r.model_id});
    const RawResult* base = base_it == base_of.end() ? nullptr : base_it->second;
    for (auto k : options.ks) {
      if (k > r.scores.size()) {
        throw ValidationError("prompt " + r.prompt_id + " / " + r.model_id + " has " + std::to_string(r.scores.size()) +
                              " scores, fewer than k=" + std::to_string(k));
      }
      ConditionResult c = aggregate(r.scores, lexicon, k);
      c.prompt_id = r.prompt_id;
      c.model_id = r.model_id;
      c.occupation = p.occupation.name;
      c.kind = p.kind;
      cells[{c.model_id, k, c.occupation, c.kind}].push_back(c);
      out.conditions.push_back(std::move(c));

      if (p.kind != PromptKind::Base && base && k <= base->scores.size()) {
        const auto base_top = std::span<const TokenScore>(base->scores).first(k);
        const auto know_top = std::span<const TokenScore>(r.scores).first(k);
        for (auto& o : relative_probabilities(base_top, know_top, p.kind)) {
          out.ratios.push_back({r.prompt_id, r.model_id, p.occupation.name, p.kind, k, std::move(o)});
        }
      }
    }
  }

  for (const auto& [key, samples] : cells) {
    const auto& [model, k, occupation, kind] = key;
    if (kind == PromptKind::Base) continue;
    const auto base_cell = cells.find({model, k, occupation, PromptKind::Base});
    if (base_cell == cells.end()) continue;
    const auto base = pool_samples(base_cell->second);
    const auto knowledge = pool_samples(samples);
    if (!base || !knowledge) {
      ++out.excluded_cells;
      continue;
    }
    out.effects.push_back(classify_effect(*base, *knowledge, options.tolerance));
  }

  std::sort(out.conditions.begin(), out.conditions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.k, a.prompt_id) < std::tie(b.model_id, b.k, b.prompt_id);
  });
  std::stable_sort(out.ratios.begin(), out.ratios.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.k, a.prompt_id) < std::tie(b.model_id, b.k, b.prompt_id);
  });
  return out;
}

// --- results file ----------------------------------------------------------

nlohmann::json condition_to_json(const ConditionResult& r) {
  return nlohmann::json{{"type", "condition"},
                        {"schema", kResultsSchema},
                        {"prompt_id", r.prompt_id},
                        {"model", r.model_id},
                        {"occupation", r.occupation},
                        {"kind", to_string(r.kind)},
                        {"k", r.k},
                        {"p_female", r.p_female},
                        {"p_male", r.p_male},
                        {"p_other", r.p_other},
                        {"margin", r.margin},
                        {"preferred", to_string(r.preferred)},
                        {"p_female_norm", r.p_female_norm},
                        {"p_male_norm", r.p_male_norm},
                        {"non_gendered", r.non_gendered}};
}

ConditionResult condition_from_json(const nlohmann::json& j) {
  ConditionResult r;
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.model_id = j.at("model").get<std::string>();
  r.occupation = j.at("occupation").get<std::string>();
  r.kind = prompt_kind_from_string(j.at("kind").get<std::string>());
  r.k = j.at("k").get<std::size_t>();
  r.p_female = j.at("p_female").get<double>();
  r.p_male = j.at("p_male").get<double>();
  r.p_other = j.at("p_other").get<double>();
  r.margin = j.at("margin").get<double>();
  r.preferred = preferred_from_string(j.at("preferred").get<std::string>());
  r.p_female_norm = j.at("p_female_norm").get<double>();
  r.p_male_norm = j.at("p_male_norm").get<double>();
  r.non_gendered = j.at("non_gendered").get<bool>();
  return r;
}

nlohmann::json ratio_to_json(const RatioRecord& r) {
  nlohmann::json j{{"type", "relative"},
                   {"schema", kResultsSchema},
                   {"prompt_id", r.prompt_id},
                   {"model", r.model_id},
                   {"occupation", r.occupation},
                   {"kind", to_string(r.kind)},
                   {"k", r.k},
                   {"token", r.outcome.token}};
  j["ratio"] = r.outcome.value ? nlohmann::json(r.outcome.value->ratio) : nlohmann::json(nullptr);
  j["reason"] = r.outcome.gap ? nlohmann::json(to_string(*r.outcome.gap)) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json effect_to_json(const EffectRecord& e) {
  return nlohmann::json{{"type", "effect"},
                        {"schema", kResultsSchema},
                        {"occupation", e.occupation},
                        {"kind", to_string(e.kind)},
                        {"model", e.model_id},
                        {"k", e.k},
                        {"effect", to_string(e.effect)},
                        {"base_margin", e.base_margin},
                        {"knowledge_margin", e.knowledge_margin},
                        {"base_preferred", to_string(e.base_preferred)},
                        {"knowledge_preferred", to_string(e.knowledge_preferred)}};
}

EffectRecord effect_from_json(const nlohmann::json& j) {
  EffectRecord e;
  e.occupation = j.at("occupation").get<std::string>();
  e.kind = prompt_kind_from_string(j.at("kind").get<std::string>());
  e.model_id = j.at("model").get<std::string>();
  e.k = j.at("k").get<std::size_t>();
  e.effect = effect_from_string(j.at("effect").get<std::string>());
  e.base_margin = j.at("base_margin").get<double>();
  e.knowledge_margin = j.at("knowledge_margin").get<double>();
  e.base_preferred = preferred_from_string(j.at("base_preferred").get<std::string>());
  e.knowledge_preferred = preferred_from_string(j.at("knowledge_preferred").get<std::string>());
  return e;
}

std::string serialize_results(const AnalysisResult& analysis) {
  std::string out;
  const auto emit = [&](const nlohmann::json& j) {
    out += j.dump();
    out += '\n';
  };
  for (const auto& c : analysis.conditions) emit(condition_to_json(c));
  for (const auto& r : analysis.ratios) emit(ratio_to_json(r));
  for (const auto& e : analysis.effects) emit(effect_to_json(e));
  return out;
}

ParsedResults parse_results(std::string_view jsonl) {
  ParsedResults out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("schema").get<std::string>() != kResultsSchema) {
        throw ParseError("unsupported results schema '" + j.at("schema").get<std::string>() + "'");
      }
      const auto type = j.at("type").get<std::string>();
      if (type == "condition") {
        out.conditions.push_back(condition_from_json(j));
      } else if (type == "effect") {
        out.effects.push_back(effect_from_json(j));
      } else if (type == "relative") {
        ++out.ratio_records;
      } else {
        throw ParseError("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("results line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("results line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace counterprobe
