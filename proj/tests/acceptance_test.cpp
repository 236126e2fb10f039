// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "counterprobe/canonical_data.hpp"
#include "counterprobe/metrics_engine.hpp"
#include "counterprobe/mock_backend.hpp"
#include "counterprobe/occupation_registry.hpp"
#include "counterprobe/pipeline.hpp"
#include "counterprobe/prompt_factory.hpp"
#include "counterprobe/rng.hpp"
#include "counterprobe/verbalizer.hpp"

namespace cp = counterprobe;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %-26s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void criterion(const char* name, const std::function<std::pair<bool, std::string>()>& check) {
  try {
    const auto [ok, detail] = check();
    report(name, ok, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::pair<bool, std::string> registry_fidelity() {
  const auto start = Clock::now();
  const auto reg = cp::load_registry(cp::canonical_occupations_tsv());
  const double elapsed = seconds_since(start);

  std::size_t female = 0, male = 0;
  for (const auto& o : reg.occupations()) {
    (o.dominance == cp::Dominance::FemaleDominated ? female : male) += 1;
  }
  struct Spot {
    const char* name;
    double pct;
    cp::Dominance d;
  };
  const Spot spots[] = {{"nurse", 88.5, cp::Dominance::FemaleDominated},
                        {"driver", 25.1, cp::Dominance::MaleDominated},
                        {"attendant", 52.3, cp::Dominance::FemaleDominated}};
  bool ok = reg.size() == 58 && female == 29 && male == 29 && elapsed < 1.0;
  for (const auto& s : spots) {
    const auto* o = reg.find(s.name);
    ok = ok && o && o->female_pct == s.pct && o->dominance == s.d;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu occupations, %zu/%zu, spot values checked, %.3f s", reg.size(), female, male,
                elapsed);
  return {ok, buf};
}

std::pair<bool, std::string> template_goldens() {
  const auto& reg = cp::canonical_registry();
  std::ifstream in(std::string(COUNTERPROBE_GOLDEN_DIR) + "/nurse_renderings.tsv");
  if (!in) return {false, "golden file missing"};
  std::set<std::pair<std::string, std::string>> covered;
  int mismatches = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string kind_name, family, expected;
    std::getline(row, kind_name, '\t');
    std::getline(row, family, '\t');
    std::getline(row, expected);
    const auto kind = cp::prompt_kind_from_string(kind_name);
    cp::ProbePrompt p;
    if (kind == cp::PromptKind::Base) {
      p = cp::build_base(reg.at("nurse"));
    } else {
      cp::Rng rng(42);
      p = cp::build_knowledge(reg.at("nurse"), kind, reg, rng, 1).front();
    }
    const auto actual =
        family == "plain" ? p.text() : cp::render(p, cp::family_for(cp::family_kind_from_string(family))).text;
    if (actual != expected) {
      ++mismatches;
      std::printf("      mismatch %s/%s\n        want: %s\n        got:  %s\n", kind_name.c_str(), family.c_str(),
                  expected.c_str(), actual.c_str());
    }
    if (family != "plain") covered.insert({kind_name, family});
  }
  const bool ok = mismatches == 0 && covered.size() == 30;
  return {ok, std::to_string(covered.size()) + " kind x family renderings, " + std::to_string(mismatches) +
                  " mismatches"};
}

std::pair<bool, std::string> count_formula() {
  const auto& reg = cp::canonical_registry();
  std::string detail;
  bool ok = true;
  for (std::size_t m : {1u, 2u, 13u}) {
    // Enumeration oracle: one prompt per (occupation, kind), m for each
    // background-counter kind.
    std::map<cp::PromptKind, std::size_t> want;
    std::size_t want_total = 0;
    for (std::size_t o = 0; o < reg.size(); ++o) {
      for (auto kind : cp::kAllPromptKinds) {
        const bool sampled = kind == cp::PromptKind::BackgroundCounterSynSim ||
                             kind == cp::PromptKind::BackgroundCounterSemSim ||
                             kind == cp::PromptKind::TargetNeutralBackgroundCounter;
        for (std::size_t s = 0; s < (sampled ? m : 1); ++s) {
          ++want[kind];
          ++want_total;
        }
      }
    }
    cp::DatasetConfig config;
    config.background_samples_m = m;
    config.seed = 42;
    config.registry = reg;
    const auto prompts = cp::generate_dataset(config);
    std::map<cp::PromptKind, std::size_t> got;
    for (const auto& p : prompts) ++got[p.kind];
    ok = ok && prompts.size() == want_total && got == want;
    detail += (detail.empty() ? "" : ", ") + std::string("m=") + std::to_string(m) + " -> " +
              std::to_string(prompts.size());
  }
  return {ok, detail};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == cp::kManifestFile) continue;
    files[fs::relative(e.path(), dir).string()] = cp::read_file(e.path());
  }
  return files;
}

std::pair<bool, std::string> determinism() {
  const fs::path root = fs::temp_directory_path() / ("counterprobe_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::map<std::string, std::string> runs[2];
  std::string hashes[2];
  for (int i = 0; i < 2; ++i) {
    cp::RunConfig config;
    config.samples_m = 2;
    config.out_dir = (root / ("run" + std::to_string(i))).string();
    config.concurrency = i == 0 ? 1 : 8;
    const auto r = cp::run_pipeline(config);
    if (r.code != cp::ExitCode::Ok) return {false, "pipeline exited with " + std::to_string(static_cast<int>(r.code))};
    runs[i] = snapshot(config.out_dir);
    hashes[i] = cp::read_manifest(config.out_dir)->dataset_hash;
  }
  fs::remove_all(root);
  const bool has_all = runs[0].contains("dataset.jsonl") && runs[0].contains("results.jsonl") &&
                       runs[0].contains("report/summary.csv");
  const bool ok = has_all && runs[0] == runs[1] && hashes[0] == hashes[1];
  return {ok, std::to_string(runs[0].size()) + " artifacts byte-identical across 2 runs (7 models, k=3,5,10)"};
}

std::pair<bool, std::string> metric_oracles() {
  // Brute-force classification straight from the lexicon file.
  std::set<std::string> female, male;
  std::istringstream lex_in{std::string(cp::canonical_lexicon_tsv())};
  std::string line;
  while (std::getline(lex_in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    (line.substr(tab + 1) == "female" ? female : male).insert(line.substr(0, tab));
  }
  std::vector<std::string> vocab(female.begin(), female.end());
  vocab.insert(vocab.end(), male.begin(), male.end());
  for (const char* w : {"person", "worker", "chair", "it", "someone"}) vocab.push_back(w);

  std::mt19937_64 gen(2024);
  double worst = 0;
  int identity_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::shuffle(vocab.begin(), vocab.end(), gen);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 20)(gen);
    std::vector<double> p(n);
    double total = 0;
    for (auto& x : p) total += (x = std::uniform_real_distribution<double>(1e-6, 1.0)(gen));
    for (auto& x : p) x /= total * 1.01;
    std::sort(p.rbegin(), p.rend());
    std::vector<cp::TokenScore> scores;
    for (std::size_t i = 0; i < n; ++i) scores.push_back({vocab[i], p[i]});
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n)(gen);

    double f = 0, m = 0, o = 0;
    for (std::size_t i = 0; i < k; ++i) {
      (female.count(scores[i].token) ? f : male.count(scores[i].token) ? m : o) += scores[i].probability;
    }
    const auto r = cp::aggregate(scores, cp::canonical_lexicon(), k);
    worst = std::max({worst, std::abs(r.p_female - f), std::abs(r.p_male - m), std::abs(r.p_other - o),
                      std::abs(r.margin - std::abs(f - m))});
    for (const auto& s : scores) {
      const auto ratio = cp::relative_probability(s.token, scores, scores);
      if (!ratio || ratio.value->ratio != 1.0) ++identity_failures;
    }
  }
  const std::vector<cp::TokenScore> base{{"she", 0.1}}, know{{"she", 0.2}};
  const auto hand = cp::relative_probability("she", base, know);
  const bool hand_ok = hand && hand.value->ratio == 2.0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "1000 lists, max |err| %.2e; identity failures %d; 0.2/0.1 = %s", worst,
                identity_failures, hand_ok ? "2.0" : "wrong");
  return {worst <= 1e-12 && identity_failures == 0 && hand_ok, buf};
}

std::pair<bool, std::string> effect_classification() {
  // Dyadic grid so the tolerance boundary is hit exactly.
  const double eps = 1.0 / 1024;
  std::vector<double> grid;
  for (int i = 0; i <= 16; ++i) grid.push_back(i / 4096.0);
  for (int i = 1; i <= 6; ++i) grid.push_back(i / 16.0);
  const auto make = [](double f, double m, cp::PromptKind kind) {
    cp::ConditionResult r;
    r.occupation = "nurse";
    r.model_id = "m";
    r.k = 3;
    r.kind = kind;
    r.p_female = f;
    r.p_male = m;
    cp::finalize_condition(r);
    return r;
  };
  std::map<cp::Effect, std::size_t> seen;
  std::size_t cases = 0, wrong = 0, boundary = 0;
  for (double bf : grid)
    for (double bm : grid)
      for (double kf : grid)
        for (double km : grid) {
          const int pb = (bf > bm) - (bf < bm);
          const int pk = (kf > km) - (kf < km);
          const double delta = std::abs(kf - km) - std::abs(bf - bm);
          cp::Effect want = cp::Effect::Unchanged;
          if (pb != 0 && pk != 0 && pb != pk) {
            want = cp::Effect::Overturned;
          } else if (pb == pk && delta > eps) {
            want = cp::Effect::Enhanced;
          } else if (pb == pk && delta < -eps) {
            want = cp::Effect::Mitigated;
          }
          if (pb == pk && std::abs(delta) == eps) ++boundary;
          const auto got = cp::classify_effect(make(bf, bm, cp::PromptKind::Base),
                                               make(kf, km, cp::PromptKind::TargetCounterSynSim), eps);
          if (got.effect != want) ++wrong;
          ++seen[want];
          ++cases;
        }
  const bool examples = cp::classify_effect(make(0.3, 0.6, cp::PromptKind::Base),
                                            make(0.5, 0.3, cp::PromptKind::TargetNeutral))
                                .effect == cp::Effect::Overturned &&
                        cp::classify_effect(make(0.4, 0.1, cp::PromptKind::Base),
                                            make(0.3, 0.2, cp::PromptKind::TargetNeutral))
                                .effect == cp::Effect::Mitigated &&
                        cp::classify_effect(make(0.4, 0.1, cp::PromptKind::Base),
                                            make(0.4004, 0.1, cp::PromptKind::TargetNeutral), 1e-3)
                                .effect == cp::Effect::Unchanged;
  const bool ok = wrong == 0 && seen.size() == 4 && boundary > 0 && examples;
  return {ok, std::to_string(cases) + " pairs, all 4 effects, " + std::to_string(boundary) + " on the boundary, " +
                  std::to_string(wrong) + " wrong"};
}

std::pair<bool, std::string> lexicon_validation() {
  const auto& lex = cp::canonical_lexicon();
  const auto rep = cp::validate_lexicon(lex);
  const bool ok = rep.ok() && rep.total == 126 && rep.female == 63 && rep.male == 63 &&
                  lex.classify("mom") == cp::TokenClass::Female && lex.classify("dad") == cp::TokenClass::Male;
  return {ok, std::to_string(rep.total) + " tokens, " + std::to_string(rep.female) + "/" + std::to_string(rep.male) +
                  ", disjoint, mom=female dad=male"};
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion("registry fidelity", registry_fidelity);
  criterion("template goldens", template_goldens);
  criterion("count formula", count_formula);
  criterion("determinism", determinism);
  criterion("metric oracles", metric_oracles);
  criterion("effect classification", effect_classification);
  criterion("lexicon validation", lexicon_validation);
  const double elapsed = seconds_since(start);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f s without the scoring service (limit 60 s)", elapsed);
  report("suite runtime", elapsed < 60.0, buf);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
