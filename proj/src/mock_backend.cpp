#include "counterprobe/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "counterprobe/digest.hpp"
#include "counterprobe/errors.hpp"

namespace counterprobe {

namespace {

void check_distribution(const std::vector<TokenScore>& scores, const std::string& where) {
  try {
    validate_scores(scores);
  } catch (const ProtocolError& e) {
    throw ValidationError("mock distribution " + where + ": " + e.what());
  }
  double sum = 0.0;
  for (const auto& s : scores) sum += s.probability;
  if (sum > 1.0 + 1e-12) throw ValidationError("mock distribution " + where + " sums to more than 1");
}

nlohmann::json scores_json(const std::vector<TokenScore>& scores) { return scores_to_wire(scores).at("scores"); }

std::vector<TokenScore> scores_from(const nlohmann::json& list) {
  std::vector<TokenScore> out;
  for (const auto& item : list) out.push_back({item.at("token").get<std::string>(), item.at("p").get<double>()});
  return out;
}

// Signed lean shift per kind, applied toward (+) or away from (-) the
// occupation's dominant class.
double kind_shift(PromptKind kind) {
  switch (kind) {
    case PromptKind::Base:
      return 0.0;
    case PromptKind::TargetSynSim:
      return 0.30;
    case PromptKind::TargetSemSim:
      return 0.15;
    case PromptKind::TargetNeutral:
      return -0.25;
    case PromptKind::TargetCounterSynSim:
      return -1.10;
    case PromptKind::TargetCounterSemSim:
      return -0.45;
    case PromptKind::BackgroundCounterSynSim:
      return -0.60;
    case PromptKind::BackgroundCounterSemSim:
      return -0.20;
    case PromptKind::TargetNeutralBackgroundCounter:
      return -0.10;
    case PromptKind::Unrelated:
      return 0.0005;
  }
  return 0.0;
}

std::vector<TokenScore> synthetic_distribution(double female_lean) {
  const double f = (1.0 + female_lean) / 2.0;
  const double m = 1.0 - f;
  std::vector<TokenScore> scores = {
      {"she", 0.42 * f},  {"he", 0.42 * m},    {"woman", 0.12 * f}, {"man", 0.12 * m},
      {"person", 0.08},   {"worker", 0.05},    {"doctor", 0.03},    {"it", 0.02},
      {"one", 0.015},     {"they", 0.01},      {"someone", 0.008},  {"nobody", 0.005},
  };
  std::erase_if(scores, [](const TokenScore& s) { return !(s.probability > 0.0); });
  std::stable_sort(scores.begin(), scores.end(), [](const TokenScore& a, const TokenScore& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.token < b.token;
  });
  return scores;
}

}  // namespace

void MockModelSpec::validate() const {
  check_distribution(default_distribution, "default");
  for (const auto& [key, scores] : table) {
    check_distribution(scores, "(" + key.first + ", " + std::string(to_string(key.second)) + ")");
  }
}

std::vector<TokenScore> MockModelSpec::lookup(const std::optional<ProbeKey>& key, std::size_t top_k) const {
  const std::vector<TokenScore>* base = &default_distribution;
  if (key) {
    if (auto it = table.find({key->occupation, key->kind}); it != table.end()) base = &it->second;
  }
  std::vector<TokenScore> out(base->begin(), base->begin() + static_cast<std::ptrdiff_t>(std::min(top_k, base->size())));
  if (out.size() >= top_k) return out;

  std::unordered_set<std::string> present;
  for (const auto& s : out) present.insert(s.token);
  for (const auto& s : default_distribution) {
    if (out.size() >= top_k) break;
    if (present.contains(s.token)) continue;
    const double cap = out.empty() ? s.probability : out.back().probability;
    out.push_back({s.token, std::min(s.probability, cap)});
    present.insert(s.token);
  }
  return out;
}

nlohmann::json mock_spec_to_json(const MockModelSpec& spec) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, scores] : spec.table) {
    entries.push_back({{"occupation", key.first}, {"kind", to_string(key.second)}, {"scores", scores_json(scores)}});
  }
  return nlohmann::json{{"default", scores_json(spec.default_distribution)}, {"entries", std::move(entries)}};
}

MockModelSpec mock_spec_from_json(const nlohmann::json& j) {
  MockModelSpec spec;
  try {
    spec.default_distribution = scores_from(j.at("default"));
    for (const auto& e : j.at("entries")) {
      spec.table[{e.at("occupation").get<std::string>(), prompt_kind_from_string(e.at("kind").get<std::string>())}] =
          scores_from(e.at("scores"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed mock spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

MockModelSpec synthetic_mock_spec(const Registry& registry, const std::string& model_id) {
  const double sensitivity = 0.25 + 0.75 * static_cast<double>(mix64(fnv1a64(model_id)) % 1000) / 1000.0;
  MockModelSpec spec;
  spec.default_distribution = {{"it", 0.02}, {"one", 0.015}, {"they", 0.01}, {"someone", 0.008}, {"nobody", 0.005}};
  for (const auto& occ : registry) {
    const double toward = occ.dominance == Dominance::FemaleDominated ? 1.0 : -1.0;
    const double base_lean = (occ.female_pct - 50.0) / 50.0;
    for (PromptKind kind : kAllPromptKinds) {
      const double lean = std::clamp(base_lean + toward * sensitivity * kind_shift(kind), -1.0, 1.0);
      spec.table[{occ.name, kind}] = synthetic_distribution(lean);
    }
  }
  spec.validate();
  return spec;
}

MockBackend::MockBackend(std::vector<MockModel> models) : models_(std::move(models)) {
  std::string fingerprint;
  for (const auto& m : models_) {
    m.spec.validate();
    fingerprint += m.info.id + "\n" + mock_spec_to_json(m.spec).dump() + "\n";
  }
  identity_ = "mock:" + sha256_hex(fingerprint).substr(0, 16);
}

std::string MockBackend::identity() const { return identity_; }

std::vector<ModelInfo> MockBackend::list_models() {
  std::vector<ModelInfo> out;
  for (const auto& m : models_) out.push_back(m.info);
  return out;
}

std::string MockBackend::score_raw(const ScoreRequest& request) {
  const auto it = std::find_if(models_.begin(), models_.end(),
                               [&](const MockModel& m) { return m.info.id == request.model_id; });
  if (it == models_.end()) throw ConfigError("unknown model '" + request.model_id + "'");
  if (it->info.mode != request.mode) {
    throw ProtocolError("model '" + request.model_id + "' does not support mode " + std::string(to_string(request.mode)),
                        "");
  }
  return scores_to_wire(it->spec.lookup(request.probe_key, request.top_k)).dump();
}

std::vector<ModelInfo> default_model_catalog() {
  return {
      {"bert-base", ScoreMode::MaskedFill, "[MASK]"},    {"bert-large", ScoreMode::MaskedFill, "[MASK]"},
      {"albert-base", ScoreMode::MaskedFill, "[MASK]"},  {"roberta-base", ScoreMode::MaskedFill, "<mask>"},
      {"roberta-large", ScoreMode::MaskedFill, "<mask>"}, {"gpt2-medium", ScoreMode::CausalNext, ""},
      {"gpt2-large", ScoreMode::CausalNext, ""},
  };
}

MockBackend make_synthetic_backend(const Registry& registry, const std::vector<ModelInfo>& models) {
  std::vector<MockModel> catalog;
  for (const auto& info : models) catalog.push_back({info, synthetic_mock_spec(registry, info.id)});
  return MockBackend(std::move(catalog));
}

}  // namespace counterprobe
