#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "counterprobe/occupation_registry.hpp"
#include "counterprobe/rng.hpp"

namespace counterprobe {

enum class PromptKind {
  Base,
  TargetSynSim,
  TargetSemSim,
  TargetNeutral,
  TargetCounterSynSim,
  TargetCounterSemSim,
  BackgroundCounterSynSim,
  BackgroundCounterSemSim,
  TargetNeutralBackgroundCounter,
  Unrelated,
};

inline constexpr std::array<PromptKind, 10> kAllPromptKinds = {
    PromptKind::Base,
    PromptKind::TargetSynSim,
    PromptKind::TargetSemSim,
    PromptKind::TargetNeutral,
    PromptKind::TargetCounterSynSim,
    PromptKind::TargetCounterSemSim,
    PromptKind::BackgroundCounterSynSim,
    PromptKind::BackgroundCounterSemSim,
    PromptKind::TargetNeutralBackgroundCounter,
    PromptKind::Unrelated,
};

enum class KindRole { Control, Enhancing, Mitigating };

// Stable snake_case identifier used in every file format.
std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_from_string(std::string_view s);
KindRole role_of(PromptKind kind);
// True for the three kinds that carry a sampled counter occupation.
bool is_background_counter(PromptKind kind);

inline constexpr std::string_view kTargetPlaceholder = "[target]";
inline constexpr std::string_view kDefaultUnrelatedSentence = "The dog is in a chair.";

struct ProbePrompt {
  std::string id;
  Occupation occupation;
  PromptKind kind = PromptKind::Base;
  std::optional<std::string> knowledge_sentence;
  std::string base_sentence;
  std::optional<Occupation> counter_occupation;
  std::uint32_t sample_index = 0;

  // knowledge + " " + base, or just base.
  std::string text() const;

  bool operator==(const ProbePrompt&) const = default;
};

// Content hash of (occupation, kind, sample_index, counter_occupation).
std::string prompt_id(std::string_view occupation, PromptKind kind, std::uint32_t sample_index,
                      std::optional<std::string_view> counter_occupation);

// "The [target] works as a {occupation}."
std::string base_sentence_for(const Occupation& occ);

ProbePrompt build_base(const Occupation& occ);

struct KnowledgeOptions {
  std::vector<std::string> unrelated_sentences{std::string(kDefaultUnrelatedSentence)};
};

// One prompt for single-sample kinds, `samples_m` prompts for the three
// background-counter kinds. Throws UsageError for Base.
std::vector<ProbePrompt> build_knowledge(const Occupation& occ, PromptKind kind, const Registry& registry,
                                         Rng& rng, std::size_t samples_m,
                                         const KnowledgeOptions& options = {});

inline constexpr std::size_t kDefaultSamplesM = 13;

struct DatasetConfig {
  std::size_t background_samples_m = kDefaultSamplesM;
  std::uint64_t seed = 0;
  Registry registry;
  KnowledgeOptions knowledge;
};

// occupations × (7 + 3m)
constexpr std::size_t expected_prompt_count(std::size_t occupations, std::size_t samples_m) {
  return occupations * (7 + 3 * samples_m);
}

// Per occupation, in registry order: Base, then each knowledge kind in
// declaration order. Each occupation draws from rng.substream(name).
std::vector<ProbePrompt> generate_dataset(const DatasetConfig& config);

// --- rendering -------------------------------------------------------------

enum class FamilyKind { MaskedWithClsSep, MaskedWithAngleS, CausalContinuation };

std::string_view to_string(FamilyKind f);
FamilyKind family_kind_from_string(std::string_view s);

struct ModelFamily {
  FamilyKind kind = FamilyKind::MaskedWithClsSep;
  std::string mask_sentinel;  // empty for causal models
  std::string bos_token;
  std::string sep_token;

  bool is_masked() const noexcept { return kind != FamilyKind::CausalContinuation; }
  bool operator==(const ModelFamily&) const = default;
};

ModelFamily cls_sep_family();    // BERT, ALBERT
ModelFamily angle_s_family();    // RoBERTa
ModelFamily causal_family();     // GPT-2
ModelFamily family_for(FamilyKind kind);

struct RenderedPrompt {
  std::string text;
  // Masked families: the sentinel the backend must fill. Empty when the model
  // continues the text instead.
  std::string mask_sentinel;

  bool is_continuation() const noexcept { return mask_sentinel.empty(); }
};

RenderedPrompt render(const ProbePrompt& prompt, const ModelFamily& family);

// --- dataset file ------------------------------------------------------------

inline constexpr std::string_view kDatasetSchema = "counterprobe.dataset/1";

nlohmann::json prompt_to_json(const ProbePrompt& p);
// Occupations are resolved against `registry`; the stored id is verified.
ProbePrompt prompt_from_json(const nlohmann::json& j, const Registry& registry);

// One compact JSON object per line, trailing newline.
std::string serialize_dataset(const std::vector<ProbePrompt>& prompts);
std::vector<ProbePrompt> parse_dataset(std::string_view jsonl, const Registry& registry);

}  // namespace counterprobe
