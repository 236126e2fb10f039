#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "counterprobe/occupation_registry.hpp"
#include "counterprobe/scoring_client.hpp"

namespace counterprobe {

// Lookup-table model: (occupation, kind) -> ranked distribution.
struct MockModelSpec {
  std::map<std::pair<std::string, PromptKind>, std::vector<TokenScore>> table;
  std::vector<TokenScore> default_distribution;

  // Each list must satisfy validate_scores and sum to <= 1. Throws ValidationError.
  void validate() const;

  // Table entry (or the default when absent), padded from the default
  // distribution up to top_k. Padding skips tokens already present and caps
  // each padded probability at the previous rank's, so the list stays
  // non-increasing. Returns fewer than top_k only when the combined
  // vocabulary is smaller.
  std::vector<TokenScore> lookup(const std::optional<ProbeKey>& key, std::size_t top_k) const;
};

nlohmann::json mock_spec_to_json(const MockModelSpec& spec);
MockModelSpec mock_spec_from_json(const nlohmann::json& j);

// A deterministic stand-in for a pretrained model with a stereotyped prior.
// Gendered mass leans toward each occupation's dominant class in proportion
// to its distance from 50%, and every knowledge kind shifts the lean by a
// fixed amount scaled by a per-model sensitivity in [0.25, 1.0) derived
// from the model id. Only the harness is exercised by it.
MockModelSpec synthetic_mock_spec(const Registry& registry, const std::string& model_id);

struct MockModel {
  ModelInfo info;
  MockModelSpec spec;
};

// Stateless apart from its immutable catalog; safe for concurrent use.
class MockBackend final : public ScoringBackend {
 public:
  explicit MockBackend(std::vector<MockModel> models);

  std::string identity() const override;
  std::vector<ModelInfo> list_models() override;
  std::string score_raw(const ScoreRequest& request) override;

 private:
  std::vector<MockModel> models_;
  std::string identity_;
};

// The seven pretrained variants probed by default, with their mask tokens:
// bert-base, bert-large, albert-base ([MASK]); roberta-base, roberta-large
// (<mask>); gpt2-medium, gpt2-large (causal).
std::vector<ModelInfo> default_model_catalog();

// MockBackend serving synthetic specs for the given catalog entries.
MockBackend make_synthetic_backend(const Registry& registry, const std::vector<ModelInfo>& models);

}  // namespace counterprobe
