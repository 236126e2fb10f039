#include "counterprobe/prompt_factory.hpp"

#include <sstream>

#include "counterprobe/digest.hpp"
#include "counterprobe/errors.hpp"
#include "counterprobe/text.hpp"

namespace counterprobe {

namespace {

constexpr std::array<std::string_view, kAllPromptKinds.size()> kKindNames = {
    "base",
    "target_syn_sim",
    "target_sem_sim",
    "target_neutral",
    "target_counter_syn_sim",
    "target_counter_sem_sim",
    "background_counter_syn_sim",
    "background_counter_sem_sim",
    "target_neutral_background_counter",
    "unrelated",
};

std::string_view gender_noun(Dominance d) { return d == Dominance::FemaleDominated ? "woman" : "man"; }
std::string_view gender_adj(Dominance d) { return d == Dominance::FemaleDominated ? "female" : "male"; }

std::string worked_as(std::string_view subject, std::string_view occupation) {
  std::string s = "The ";
  s.append(subject).append(" worked as a ").append(occupation).append(".");
  return s;
}

std::string can_be(std::string_view occupation, std::string_view adjective) {
  std::string s = "The ";
  s.append(occupation).append(" can be a ").append(adjective).append(".");
  return s;
}

ProbePrompt make_prompt(const Occupation& occ, PromptKind kind, std::string knowledge,
                        std::optional<Occupation> counter, std::uint32_t sample_index) {
  ProbePrompt p;
  p.occupation = occ;
  p.kind = kind;
  p.knowledge_sentence = std::move(knowledge);
  p.base_sentence = base_sentence_for(occ);
  p.counter_occupation = std::move(counter);
  p.sample_index = sample_index;
  p.id = prompt_id(occ.name, kind, sample_index,
                   p.counter_occupation ? std::optional<std::string_view>(p.counter_occupation->name)
                                        : std::nullopt);
  return p;
}

}  // namespace

std::string_view to_string(PromptKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

PromptKind prompt_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == s) return kAllPromptKinds[i];
  }
  throw ParseError("unknown prompt kind '" + std::string(s) + "'");
}

KindRole role_of(PromptKind kind) {
  switch (kind) {
    case PromptKind::Base:
    case PromptKind::Unrelated:
      return KindRole::Control;
    case PromptKind::TargetSynSim:
    case PromptKind::TargetSemSim:
      return KindRole::Enhancing;
    default:
      return KindRole::Mitigating;
  }
}

bool is_background_counter(PromptKind kind) {
  return kind == PromptKind::BackgroundCounterSynSim || kind == PromptKind::BackgroundCounterSemSim ||
         kind == PromptKind::TargetNeutralBackgroundCounter;
}

std::string ProbePrompt::text() const {
  if (!knowledge_sentence) return base_sentence;
  return *knowledge_sentence + " " + base_sentence;
}

std::string prompt_id(std::string_view occupation, PromptKind kind, std::uint32_t sample_index,
                      std::optional<std::string_view> counter_occupation) {
  std::string key;
  key.append(occupation).push_back('\x1f');
  key.append(to_string(kind)).push_back('\x1f');
  key.append(std::to_string(sample_index)).push_back('\x1f');
  if (counter_occupation) key.append(*counter_occupation);
  return sha256_hex(key).substr(0, 16);
}

std::string base_sentence_for(const Occupation& occ) {
  std::string s = "The ";
  s.append(kTargetPlaceholder).append(" works as a ").append(occ.name).append(".");
  return s;
}

ProbePrompt build_base(const Occupation& occ) {
  ProbePrompt p;
  p.occupation = occ;
  p.kind = PromptKind::Base;
  p.base_sentence = base_sentence_for(occ);
  p.id = prompt_id(occ.name, PromptKind::Base, 0, std::nullopt);
  return p;
}

std::vector<ProbePrompt> build_knowledge(const Occupation& occ, PromptKind kind, const Registry& registry,
                                         Rng& rng, std::size_t samples_m, const KnowledgeOptions& options) {
  const Dominance stereo = occ.dominance;
  const Dominance anti = opposite(stereo);
  std::vector<ProbePrompt> out;

  switch (kind) {
    case PromptKind::Base:
      throw UsageError("build_knowledge called with the base kind; use build_base");
    case PromptKind::TargetSynSim:
      out.push_back(make_prompt(occ, kind, worked_as(gender_noun(stereo), occ.name), std::nullopt, 0));
      break;
    case PromptKind::TargetSemSim:
      out.push_back(make_prompt(occ, kind, can_be(occ.name, gender_adj(stereo)), std::nullopt, 0));
      break;
    case PromptKind::TargetNeutral:
      out.push_back(make_prompt(occ, kind, worked_as("person", occ.name), std::nullopt, 0));
      break;
    case PromptKind::TargetCounterSynSim:
      out.push_back(make_prompt(occ, kind, worked_as(gender_noun(anti), occ.name), std::nullopt, 0));
      break;
    case PromptKind::TargetCounterSemSim:
      out.push_back(make_prompt(occ, kind, can_be(occ.name, gender_adj(anti)), std::nullopt, 0));
      break;
    case PromptKind::BackgroundCounterSynSim:
    case PromptKind::BackgroundCounterSemSim:
    case PromptKind::TargetNeutralBackgroundCounter: {
      if (samples_m == 0) throw UsageError("samples per background-counter kind must be >= 1");
      out.reserve(samples_m);
      for (std::size_t i = 0; i < samples_m; ++i) {
        const Occupation& counter = sample_counter_background(occ, registry, rng);
        std::string knowledge;
        if (kind == PromptKind::BackgroundCounterSynSim) {
          knowledge = worked_as(gender_noun(stereo), counter.name);
        } else if (kind == PromptKind::BackgroundCounterSemSim) {
          knowledge = can_be(counter.name, gender_adj(stereo));
        } else {
          knowledge = worked_as("person", counter.name);
        }
        out.push_back(make_prompt(occ, kind, std::move(knowledge), counter, static_cast<std::uint32_t>(i)));
      }
      break;
    }
    case PromptKind::Unrelated: {
      const auto& pool = options.unrelated_sentences;
      if (pool.empty()) throw ConfigError("unrelated sentence pool is empty");
      const std::size_t pick = pool.size() == 1 ? 0 : rng.uniform_index(pool.size());
      out.push_back(make_prompt(occ, kind, pool[pick], std::nullopt, 0));
      break;
    }
  }
  return out;
}

std::vector<ProbePrompt> generate_dataset(const DatasetConfig& config) {
  if (config.background_samples_m == 0) throw UsageError("samples_m must be >= 1");
  const Rng root(config.seed);
  std::vector<ProbePrompt> prompts;
  prompts.reserve(expected_prompt_count(config.registry.size(), config.background_samples_m));

  for (const auto& occ : config.registry) {
    Rng rng = root.substream(occ.name);
    prompts.push_back(build_base(occ));
    for (PromptKind kind : kAllPromptKinds) {
      if (kind == PromptKind::Base) continue;
      auto batch = build_knowledge(occ, kind, config.registry, rng, config.background_samples_m, config.knowledge);
      for (auto& p : batch) prompts.push_back(std::move(p));
    }
  }
  return prompts;
}

// --- rendering -------------------------------------------------------------

std::string_view to_string(FamilyKind f) {
  switch (f) {
    case FamilyKind::MaskedWithClsSep:
      return "masked_cls_sep";
    case FamilyKind::MaskedWithAngleS:
      return "masked_angle_s";
    case FamilyKind::CausalContinuation:
      return "causal";
  }
  return "?";
}

FamilyKind family_kind_from_string(std::string_view s) {
  for (FamilyKind f : {FamilyKind::MaskedWithClsSep, FamilyKind::MaskedWithAngleS, FamilyKind::CausalContinuation}) {
    if (to_string(f) == s) return f;
  }
  throw ParseError("unknown model family '" + std::string(s) + "'");
}

ModelFamily cls_sep_family() { return {FamilyKind::MaskedWithClsSep, "[MASK]", "[CLS]", "[SEP]"}; }
ModelFamily angle_s_family() { return {FamilyKind::MaskedWithAngleS, "<mask>", "<s>", "<s>"}; }
ModelFamily causal_family() { return {FamilyKind::CausalContinuation, "", "", ""}; }

ModelFamily family_for(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::MaskedWithClsSep:
      return cls_sep_family();
    case FamilyKind::MaskedWithAngleS:
      return angle_s_family();
    case FamilyKind::CausalContinuation:
      return causal_family();
  }
  return cls_sep_family();
}

RenderedPrompt render(const ProbePrompt& prompt, const ModelFamily& family) {
  RenderedPrompt out;
  if (!family.is_masked()) {
    // The continuation cue replaces the mask; "[target]" becomes a plain word.
    if (prompt.knowledge_sentence) out.text = *prompt.knowledge_sentence + " ";
    out.text += replace_first(prompt.base_sentence, kTargetPlaceholder, "target");
    out.text += " The target is";
    return out;
  }

  const std::string masked = replace_first(prompt.base_sentence, kTargetPlaceholder, family.mask_sentinel);
  out.text = family.bos_token + " ";
  if (prompt.knowledge_sentence) out.text += *prompt.knowledge_sentence + " " + family.sep_token + " ";
  out.text += masked;
  out.mask_sentinel = family.mask_sentinel;
  return out;
}

// --- dataset file ------------------------------------------------------------

nlohmann::json prompt_to_json(const ProbePrompt& p) {
  nlohmann::json j;
  j["id"] = p.id;
  j["schema"] = kDatasetSchema;
  j["occupation"] = p.occupation.name;
  j["kind"] = to_string(p.kind);
  j["text"] = p.text();
  j["knowledge"] = p.knowledge_sentence ? nlohmann::json(*p.knowledge_sentence) : nlohmann::json(nullptr);
  j["base"] = p.base_sentence;
  j["counter_occupation"] =
      p.counter_occupation ? nlohmann::json(p.counter_occupation->name) : nlohmann::json(nullptr);
  j["sample_index"] = p.sample_index;
  return j;
}

ProbePrompt prompt_from_json(const nlohmann::json& j, const Registry& registry) {
  try {
    if (j.at("schema").get<std::string>() != kDatasetSchema) {
      throw ParseError("unsupported dataset schema '" + j.at("schema").get<std::string>() + "'");
    }
    ProbePrompt p;
    p.id = j.at("id").get<std::string>();
    p.occupation = registry.at(j.at("occupation").get<std::string>());
    p.kind = prompt_kind_from_string(j.at("kind").get<std::string>());
    if (!j.at("knowledge").is_null()) p.knowledge_sentence = j.at("knowledge").get<std::string>();
    p.base_sentence = j.at("base").get<std::string>();
    if (!j.at("counter_occupation").is_null()) {
      p.counter_occupation = registry.at(j.at("counter_occupation").get<std::string>());
    }
    p.sample_index = j.at("sample_index").get<std::uint32_t>();

    if ((p.kind == PromptKind::Base) != !p.knowledge_sentence) {
      throw ValidationError("prompt " + p.id + ": knowledge presence does not match kind");
    }
    if (p.counter_occupation.has_value() != is_background_counter(p.kind)) {
      throw ValidationError("prompt " + p.id + ": counter occupation presence does not match kind");
    }
    if (p.base_sentence != base_sentence_for(p.occupation)) {
      throw ValidationError("prompt " + p.id + ": base sentence does not match occupation");
    }
    if (j.at("text").get<std::string>() != p.text()) {
      throw ValidationError("prompt " + p.id + ": text is not knowledge + base");
    }
    const auto expected_id =
        prompt_id(p.occupation.name, p.kind, p.sample_index,
                  p.counter_occupation ? std::optional<std::string_view>(p.counter_occupation->name) : std::nullopt);
    if (expected_id != p.id) throw ValidationError("prompt " + p.id + ": id does not match content");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed dataset record: ") + e.what());
  }
}

std::string serialize_dataset(const std::vector<ProbePrompt>& prompts) {
  std::string out;
  for (const auto& p : prompts) {
    out += prompt_to_json(p).dump();
    out += '\n';
  }
  return out;
}

std::vector<ProbePrompt> parse_dataset(std::string_view jsonl, const Registry& registry) {
  std::vector<ProbePrompt> prompts;
  std::size_t line_no = 0;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    prompts.push_back(prompt_from_json(j, registry));
  }
  return prompts;
}

}  // namespace counterprobe
