#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "counterprobe/occupation_registry.hpp"
#include "counterprobe/prompt_factory.hpp"
#include "counterprobe/scoring_client.hpp"
#include "counterprobe/verbalizer.hpp"

namespace counterprobe {

enum class Preferred { Female, Male, None };

std::string_view to_string(Preferred p);
Preferred preferred_from_string(std::string_view s);

// Gender aggregate over the first k scores of one response.
struct ConditionResult {
  std::string prompt_id;
  std::string model_id;
  std::string occupation;
  PromptKind kind = PromptKind::Base;
  std::size_t k = 0;

  double p_female = 0.0;
  double p_male = 0.0;
  double p_other = 0.0;
  double margin = 0.0;
  Preferred preferred = Preferred::None;

  // Mass renormalized over p_female + p_male. Zero when non_gendered.
  double p_female_norm = 0.0;
  double p_male_norm = 0.0;

  // No lexicon token among the first k.
  bool non_gendered = false;

  bool operator==(const ConditionResult&) const = default;
};

// Throws UsageError when k is 0 or exceeds scores.size(). Linkage fields
// (prompt_id, model_id, occupation, kind) are left for the caller.
ConditionResult aggregate(std::span<const TokenScore> scores, const Lexicon& lexicon, std::size_t k);

// Margin and preferred class from a female/male pair.
void finalize_condition(ConditionResult& r);

struct RelativeProbability {
  std::string token;
  double ratio = 0.0;
  PromptKind kind = PromptKind::Base;

  bool operator==(const RelativeProbability&) const = default;
};

enum class RatioGap { AbsentFromBase, AbsentFromKnowledge };
std::string_view to_string(RatioGap g);

struct RatioOutcome {
  std::string token;
  std::optional<RelativeProbability> value;
  std::optional<RatioGap> gap;

  explicit operator bool() const noexcept { return value.has_value(); }
};

inline constexpr double kRatioDenominatorFloor = 1e-300;

// p(token | knowledge) / p(token | base), when the token occurs in both
// lists. Throws UsageError if the base probability is below the floor.
RatioOutcome relative_probability(std::string_view token, std::span<const TokenScore> base_scores,
                                  std::span<const TokenScore> knowledge_scores,
                                  PromptKind kind = PromptKind::Base);

// One outcome per token of the knowledge list, in its rank order.
std::vector<RatioOutcome> relative_probabilities(std::span<const TokenScore> base_scores,
                                                 std::span<const TokenScore> knowledge_scores, PromptKind kind);

// Extension, not part of the reported metric: geometric mean of the
// defined ratios, or nullopt when there are none.
std::optional<double> geometric_mean_ratio(std::span<const RatioOutcome> outcomes);

enum class Effect { Enhanced, Mitigated, Overturned, Unchanged };

std::string_view to_string(Effect e);
Effect effect_from_string(std::string_view s);

struct EffectRecord {
  std::string occupation;
  PromptKind kind = PromptKind::Base;
  std::string model_id;
  std::size_t k = 0;
  Effect effect = Effect::Unchanged;
  double base_margin = 0.0;
  double knowledge_margin = 0.0;
  Preferred base_preferred = Preferred::None;
  Preferred knowledge_preferred = Preferred::None;

  bool operator==(const EffectRecord&) const = default;
};

inline constexpr double kDefaultEffectTolerance = 1e-3;

// Overturned when the preferred class flips Female<->Male. Otherwise, with
// the same preferred class, a margin change larger than `tolerance` is
// Enhanced (wider) or Mitigated (narrower). Everything else is Unchanged.
// Throws UsageError when occupation, model or k differ, when `base` is not
// a base-prompt result, or when `knowledge` is one.
EffectRecord classify_effect(const ConditionResult& base, const ConditionResult& knowledge,
                             double tolerance = kDefaultEffectTolerance);

enum class Direction { Pro, Anti, Neutral };
std::string_view to_string(Direction d);

Direction stereotype_direction(const ConditionResult& result, const Occupation& occ);

// Mean of several samples of one (occupation, model, kind, k) cell. Only
// gendered samples contribute; nullopt when none are gendered.
std::optional<ConditionResult> pool_samples(std::span<const ConditionResult> samples);

// --- analysis over a whole run ---------------------------------------------

struct AnalysisOptions {
  std::vector<std::size_t> ks{3, 5, 10};
  double tolerance = kDefaultEffectTolerance;
};

struct RatioRecord {
  std::string prompt_id;
  std::string model_id;
  std::string occupation;
  PromptKind kind = PromptKind::Base;
  std::size_t k = 0;
  RatioOutcome outcome;
};

struct AnalysisResult {
  std::vector<ConditionResult> conditions;  // one per (prompt, model, k)
  std::vector<RatioRecord> ratios;          // per knowledge prompt, model, k, token
  std::vector<EffectRecord> effects;        // per gendered (occupation, model, kind, k)
  std::size_t excluded_cells = 0;           // cells skipped as non-gendered
};

// Joins raw results to their prompts. Raw results whose prompt is not in the
// dataset raise ValidationError.
AnalysisResult analyze(std::span<const ProbePrompt> dataset, std::span<const RawResult> raw, const Lexicon& lexicon,
                       const AnalysisOptions& options = {});

inline constexpr std::string_view kResultsSchema = "counterprobe.results/1";

nlohmann::json condition_to_json(const ConditionResult& r);
ConditionResult condition_from_json(const nlohmann::json& j);
nlohmann::json ratio_to_json(const RatioRecord& r);
nlohmann::json effect_to_json(const EffectRecord& e);
EffectRecord effect_from_json(const nlohmann::json& j);

// JSONL with records discriminated by "type": condition, relative, effect.
std::string serialize_results(const AnalysisResult& analysis);

struct ParsedResults {
  std::vector<ConditionResult> conditions;
  std::vector<EffectRecord> effects;
  std::size_t ratio_records = 0;
};
ParsedResults parse_results(std::string_view jsonl);

}  // namespace counterprobe
