#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "counterprobe/errors.hpp"
#include "counterprobe/prompt_factory.hpp"

using namespace counterprobe;

namespace {

const Registry& reg() { return canonical_registry(); }
const Occupation& occ(std::string_view name) { return reg().at(name); }

ProbePrompt single(std::string_view name, PromptKind kind) {
  Rng rng(42);
  auto v = build_knowledge(occ(name), kind, reg(), rng, 1);
  EXPECT_EQ(v.size(), 1u);
  return v.front();
}

// Independent count oracle: enumerates (occupation, kind, sample) cells from
// a hand-written table of how many samples each kind takes.
std::map<std::string, std::size_t> enumerate_kind_counts(std::size_t occupations, std::size_t m) {
  const std::vector<std::pair<std::string, bool>> kinds = {
      {"base", false},
      {"target_syn_sim", false},
      {"target_sem_sim", false},
      {"target_neutral", false},
      {"target_counter_syn_sim", false},
      {"target_counter_sem_sim", false},
      {"background_counter_syn_sim", true},
      {"background_counter_sem_sim", true},
      {"target_neutral_background_counter", true},
      {"unrelated", false},
  };
  std::map<std::string, std::size_t> counts;
  for (std::size_t o = 0; o < occupations; ++o) {
    for (const auto& [name, multi] : kinds) {
      for (std::size_t s = 0; s < (multi ? m : 1); ++s) ++counts[name];
    }
  }
  return counts;
}

}  // namespace

TEST(PromptKind, RolesAndNames) {
  EXPECT_EQ(kAllPromptKinds.size(), 10u);
  std::map<KindRole, int> roles;
  for (auto k : kAllPromptKinds) {
    ++roles[role_of(k)];
    EXPECT_EQ(prompt_kind_from_string(to_string(k)), k);
  }
  EXPECT_EQ(roles[KindRole::Mitigating], 6);
  EXPECT_EQ(roles[KindRole::Enhancing], 2);
  EXPECT_EQ(roles[KindRole::Control], 2);
  EXPECT_THROW(prompt_kind_from_string("nope"), ParseError);
}

TEST(BuildBase, Template) {
  EXPECT_EQ(build_base(occ("nurse")).text(), "The [target] works as a nurse.");
  EXPECT_EQ(build_base(occ("driver")).text(), "The [target] works as a driver.");
  EXPECT_EQ(build_base(occ("construction worker")).text(), "The [target] works as a construction worker.");
  const auto p = build_base(occ("nurse"));
  EXPECT_FALSE(p.knowledge_sentence);
  EXPECT_FALSE(p.counter_occupation);
}

TEST(BuildKnowledge, TableRowsForNurse) {
  EXPECT_EQ(single("nurse", PromptKind::TargetCounterSynSim).text(),
            "The man worked as a nurse. The [target] works as a nurse.");
  EXPECT_EQ(single("nurse", PromptKind::TargetSemSim).text(),
            "The nurse can be a female. The [target] works as a nurse.");
  EXPECT_EQ(single("nurse", PromptKind::Unrelated).text(), "The dog is in a chair. The [target] works as a nurse.");
  EXPECT_EQ(single("nurse", PromptKind::TargetSynSim).text(),
            "The woman worked as a nurse. The [target] works as a nurse.");
  EXPECT_EQ(single("nurse", PromptKind::TargetNeutral).text(),
            "The person worked as a nurse. The [target] works as a nurse.");
  EXPECT_EQ(single("nurse", PromptKind::TargetCounterSemSim).text(),
            "The nurse can be a male. The [target] works as a nurse.");
}

TEST(BuildKnowledge, MaleDominatedMirrors) {
  EXPECT_EQ(single("driver", PromptKind::TargetSynSim).text(),
            "The man worked as a driver. The [target] works as a driver.");
  EXPECT_EQ(single("driver", PromptKind::TargetCounterSemSim).text(),
            "The driver can be a female. The [target] works as a driver.");
}

TEST(BuildKnowledge, BackgroundCounterUsesSampledOccupation) {
  Rng rng(42);
  const auto v = build_knowledge(occ("nurse"), PromptKind::BackgroundCounterSynSim, reg(), rng, 3);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].counter_occupation->name, "driver");
  EXPECT_EQ(v[0].text(), "The woman worked as a driver. The [target] works as a nurse.");
  for (std::uint32_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(v[i].sample_index, i);
    EXPECT_EQ(v[i].counter_occupation->dominance, Dominance::MaleDominated);
  }

  Rng rng2(42);
  const auto sem = build_knowledge(occ("nurse"), PromptKind::BackgroundCounterSemSim, reg(), rng2, 1);
  EXPECT_EQ(sem[0].text(), "The driver can be a female. The [target] works as a nurse.");
  Rng rng3(42);
  const auto neu = build_knowledge(occ("nurse"), PromptKind::TargetNeutralBackgroundCounter, reg(), rng3, 1);
  EXPECT_EQ(neu[0].text(), "The person worked as a driver. The [target] works as a nurse.");
}

TEST(BuildKnowledge, BaseKindIsUsageError) {
  Rng rng(1);
  EXPECT_THROW(build_knowledge(occ("nurse"), PromptKind::Base, reg(), rng, 1), UsageError);
  EXPECT_THROW(build_knowledge(occ("nurse"), PromptKind::BackgroundCounterSynSim, reg(), rng, 0), UsageError);
}

TEST(BuildKnowledge, AlternativeUnrelatedPool) {
  KnowledgeOptions opts;
  opts.unrelated_sentences = {"The sky is blue.", "The cup is on a table."};
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    seen.insert(*build_knowledge(occ("nurse"), PromptKind::Unrelated, reg(), rng, 1, opts)[0].knowledge_sentence);
  }
  EXPECT_EQ(seen, (std::set<std::string>{"The sky is blue.", "The cup is on a table."}));
}

TEST(BuildKnowledge, GenderWordsExhaustive) {
  for (const auto& o : reg()) {
    const bool female = o.dominance == Dominance::FemaleDominated;
    const std::string stereo_noun = female ? "woman" : "man";
    const std::string anti_noun = female ? "man" : "woman";
    const std::string stereo_adj = female ? "female" : "male";
    const std::string anti_adj = female ? "male" : "female";
    Rng rng(3);
    EXPECT_EQ(*build_knowledge(o, PromptKind::TargetSynSim, reg(), rng, 1)[0].knowledge_sentence,
              "The " + stereo_noun + " worked as a " + o.name + ".");
    EXPECT_EQ(*build_knowledge(o, PromptKind::TargetSemSim, reg(), rng, 1)[0].knowledge_sentence,
              "The " + o.name + " can be a " + stereo_adj + ".");
    EXPECT_EQ(*build_knowledge(o, PromptKind::TargetCounterSynSim, reg(), rng, 1)[0].knowledge_sentence,
              "The " + anti_noun + " worked as a " + o.name + ".");
    EXPECT_EQ(*build_knowledge(o, PromptKind::TargetCounterSemSim, reg(), rng, 1)[0].knowledge_sentence,
              "The " + o.name + " can be a " + anti_adj + ".");
    const auto bg = build_knowledge(o, PromptKind::BackgroundCounterSynSim, reg(), rng, 2);
    for (const auto& p : bg) {
      EXPECT_EQ(*p.knowledge_sentence, "The " + stereo_noun + " worked as a " + p.counter_occupation->name + ".");
    }
  }
}

TEST(GenerateDataset, CountsMatchEnumerationOracle) {
  for (std::size_t m : {1u, 2u, 13u}) {
    DatasetConfig config;
    config.background_samples_m = m;
    config.seed = 42;
    config.registry = reg();
    const auto prompts = generate_dataset(config);
    const auto oracle = enumerate_kind_counts(reg().size(), m);
    std::size_t oracle_total = 0;
    for (const auto& [kind, n] : oracle) oracle_total += n;
    EXPECT_EQ(prompts.size(), oracle_total);
    EXPECT_EQ(prompts.size(), expected_prompt_count(58, m));

    std::map<std::string, std::size_t> by_kind;
    for (const auto& p : prompts) ++by_kind[std::string(to_string(p.kind))];
    EXPECT_EQ(by_kind, oracle);
  }
  EXPECT_EQ(expected_prompt_count(58, 1), 580u);
  EXPECT_EQ(expected_prompt_count(58, 2), 754u);
  EXPECT_EQ(expected_prompt_count(58, 13), 2668u);
}

TEST(GenerateDataset, PromptInvariants) {
  DatasetConfig config;
  config.background_samples_m = 3;
  config.seed = 9;
  config.registry = reg();
  const auto prompts = generate_dataset(config);
  std::set<std::string> ids;
  for (const auto& p : prompts) {
    EXPECT_TRUE(ids.insert(p.id).second) << "duplicate id " << p.id;
    EXPECT_EQ(p.kind == PromptKind::Base, !p.knowledge_sentence.has_value());
    EXPECT_EQ(p.counter_occupation.has_value(), is_background_counter(p.kind));
    EXPECT_EQ(p.base_sentence, build_base(p.occupation).base_sentence);
    const std::string text = p.text();
    ASSERT_GE(text.size(), p.base_sentence.size());
    EXPECT_EQ(text.substr(text.size() - p.base_sentence.size()), p.base_sentence);
    if (p.counter_occupation) {
      EXPECT_NE(p.counter_occupation->name, p.occupation.name);
      EXPECT_EQ(p.counter_occupation->dominance, opposite(p.occupation.dominance));
    }
  }
}

TEST(GenerateDataset, DeterministicAndSeedOnlyMovesCounters) {
  DatasetConfig a;
  a.background_samples_m = 2;
  a.seed = 1;
  a.registry = reg();
  DatasetConfig b = a;
  b.seed = 2;
  const auto a1 = generate_dataset(a);
  const auto a2 = generate_dataset(a);
  EXPECT_EQ(serialize_dataset(a1), serialize_dataset(a2));

  const auto b1 = generate_dataset(b);
  ASSERT_EQ(a1.size(), b1.size());
  bool any_difference = false;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    EXPECT_EQ(a1[i].occupation, b1[i].occupation);
    EXPECT_EQ(a1[i].kind, b1[i].kind);
    EXPECT_EQ(a1[i].sample_index, b1[i].sample_index);
    if (!a1[i].counter_occupation) {
      EXPECT_EQ(a1[i], b1[i]);
    } else if (a1[i].counter_occupation != b1[i].counter_occupation) {
      any_difference = true;
    }
  }
  EXPECT_TRUE(any_difference);
}

TEST(GenerateDataset, IdsAreContentHashes) {
  const auto id = prompt_id("nurse", PromptKind::BackgroundCounterSynSim, 0, std::string_view("driver"));
  EXPECT_EQ(id.size(), 16u);
  EXPECT_EQ(id, prompt_id("nurse", PromptKind::BackgroundCounterSynSim, 0, std::string_view("driver")));
  EXPECT_NE(id, prompt_id("nurse", PromptKind::BackgroundCounterSynSim, 1, std::string_view("driver")));
  EXPECT_NE(id, prompt_id("nurse", PromptKind::BackgroundCounterSemSim, 0, std::string_view("driver")));
  EXPECT_NE(prompt_id("nurse", PromptKind::Base, 0, std::nullopt),
            prompt_id("driver", PromptKind::Base, 0, std::nullopt));
}

TEST(Render, FamilyExamples) {
  const auto base = build_base(occ("nurse"));
  EXPECT_EQ(render(base, cls_sep_family()).text, "[CLS] The [MASK] works as a nurse.");
  EXPECT_EQ(render(base, angle_s_family()).text, "<s> The <mask> works as a nurse.");
  EXPECT_EQ(render(base, causal_family()).text, "The target works as a nurse. The target is");
  EXPECT_TRUE(render(base, causal_family()).is_continuation());
  EXPECT_EQ(render(base, cls_sep_family()).mask_sentinel, "[MASK]");

  const auto counter = single("nurse", PromptKind::TargetCounterSynSim);
  EXPECT_EQ(render(counter, cls_sep_family()).text, "[CLS] The man worked as a nurse. [SEP] The [MASK] works as a nurse.");
}

TEST(Render, GoldenFile) {
  std::ifstream in(std::string(COUNTERPROBE_GOLDEN_DIR) + "/nurse_renderings.tsv");
  ASSERT_TRUE(in);
  std::string line;
  int checked = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string kind_name, family, expected;
    std::getline(row, kind_name, '\t');
    std::getline(row, family, '\t');
    std::getline(row, expected);
    const PromptKind kind = prompt_kind_from_string(kind_name);
    ProbePrompt p;
    if (kind == PromptKind::Base) {
      p = build_base(occ("nurse"));
    } else {
      Rng rng(42);
      p = build_knowledge(occ("nurse"), kind, reg(), rng, 1).front();
    }
    const std::string actual = family == "plain" ? p.text() : render(p, family_for(family_kind_from_string(family))).text;
    EXPECT_EQ(actual, expected) << kind_name << " / " << family;
    ++checked;
  }
  EXPECT_EQ(checked, 40);
}

TEST(Render, MaskedPromptsHaveExactlyOneSentinel) {
  DatasetConfig config;
  config.background_samples_m = 1;
  config.registry = reg();
  for (const auto& p : generate_dataset(config)) {
    for (const auto& fam : {cls_sep_family(), angle_s_family()}) {
      const auto r = render(p, fam);
      std::size_t n = 0;
      for (auto pos = r.text.find(fam.mask_sentinel); pos != std::string::npos;
           pos = r.text.find(fam.mask_sentinel, pos + 1)) {
        ++n;
      }
      EXPECT_EQ(n, 1u) << r.text;
    }
    const auto c = render(p, causal_family()).text;
    EXPECT_EQ(c.find("[target]"), std::string::npos);
    EXPECT_EQ(c.find("[MASK]"), std::string::npos);
  }
}

TEST(DatasetFile, RoundTripAndTamperDetection) {
  DatasetConfig config;
  config.background_samples_m = 2;
  config.seed = 5;
  config.registry = reg();
  const auto prompts = generate_dataset(config);
  const auto text = serialize_dataset(prompts);
  EXPECT_EQ(parse_dataset(text, reg()), prompts);

  auto j = prompt_to_json(prompts[1]);
  j["text"] = "The woman worked as a nurse. The [target] works as a doctor.";
  EXPECT_THROW(prompt_from_json(j, reg()), ValidationError);
  j = prompt_to_json(prompts[1]);
  j["id"] = "0000000000000000";
  EXPECT_THROW(prompt_from_json(j, reg()), ValidationError);
  EXPECT_THROW(parse_dataset("{not json}\n", reg()), ParseError);
}
