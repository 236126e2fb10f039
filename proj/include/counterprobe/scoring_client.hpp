#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "counterprobe/prompt_factory.hpp"

namespace counterprobe {

struct TokenScore {
  std::string token;
  double probability = 0.0;

  bool operator==(const TokenScore&) const = default;
};

enum class ScoreMode { MaskedFill, CausalNext };

// Wire names: "masked" / "causal".
std::string_view to_string(ScoreMode m);
ScoreMode score_mode_from_string(std::string_view s);

// Identifies which dataset cell a request belongs to. Never sent over the
// wire; the mock backend uses it as its lookup key.
struct ProbeKey {
  std::string occupation;
  PromptKind kind = PromptKind::Base;
};

struct ScoreRequest {
  std::string model_id;
  ScoreMode mode = ScoreMode::MaskedFill;
  std::string text;
  std::size_t top_k = 10;
  std::string mask_sentinel;  // required for MaskedFill
  std::optional<ProbeKey> probe_key;
};

ScoreRequest make_request(const ProbePrompt& prompt, const std::string& model_id, const ModelFamily& family,
                          std::size_t top_k);

// MaskedFill: exactly one sentinel in the text. CausalNext: no sentinel.
// top_k >= 1. Throws UsageError.
void validate_request(const ScoreRequest& request);

// Probabilities finite and in (0,1], tokens unique, non-increasing by rank.
// Throws ProtocolError carrying `raw_payload`.
void validate_scores(std::span<const TokenScore> scores, std::string_view raw_payload = {});

nlohmann::json request_to_wire(const ScoreRequest& request);
nlohmann::json scores_to_wire(std::span<const TokenScore> scores);
// Parses {"scores":[{"token":..,"p":..},...]} and validates the list.
std::vector<TokenScore> parse_score_response(std::string_view raw_payload);

struct ModelInfo {
  std::string id;
  ScoreMode mode = ScoreMode::MaskedFill;
  std::string mask_token;

  bool operator==(const ModelInfo&) const = default;
};

nlohmann::json models_to_wire(std::span<const ModelInfo> models);
std::vector<ModelInfo> parse_models_response(std::string_view raw_payload);

// "[MASK]" -> CLS/SEP family, "<mask>" -> <s> family, causal -> continuation.
ModelFamily family_for_model(const ModelInfo& model);

// A source of top-k probabilities. Implementations must tolerate concurrent
// calls to score_raw.
class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;

  // Recorded in run manifests ("mock:<spec hash>", "http://host:port", ...).
  virtual std::string identity() const = 0;
  virtual std::vector<ModelInfo> list_models() = 0;
  // Returns the response body verbatim. Throws TransportError when the
  // backend cannot be reached, ConfigError for an unknown model.
  virtual std::string score_raw(const ScoreRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{100};
  double multiplier = 2.0;
  // Injectable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Verbatim backend responses, keyed by (prompt id, model).
class RunLog {
 public:
  struct Entry {
    std::string prompt_id;
    std::string model_id;
    std::string raw;
  };

  void record(std::string prompt_id, std::string model_id, std::string raw);
  std::vector<Entry> entries() const;
  // JSONL sorted by (prompt_id, model_id, raw).
  std::string serialize() const;

 private:
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
};

// Validates the request, calls the backend with exponential backoff on
// transient transport failures, logs the raw payload, then parses it.
// Returns at most top_k scores.
std::vector<TokenScore> score(const ScoreRequest& request, ScoringBackend& backend, const RetryPolicy& retry = {},
                              RunLog* log = nullptr, std::string_view log_prompt_id = {});

// --- probe runs ------------------------------------------------------------

struct RawResult {
  std::string prompt_id;
  std::string model_id;
  std::vector<TokenScore> scores;

  bool operator==(const RawResult&) const = default;
};

struct ProbeFailure {
  std::string prompt_id;
  std::string model_id;
  std::string error;

  bool operator==(const ProbeFailure&) const = default;
};

enum class RunStatus { Ok, Partial };

struct ProbeOptions {
  std::size_t top_k = 10;
  std::size_t concurrency = 4;
  // Abort once failures exceed this fraction of all (prompt, model) pairs.
  double max_failure_fraction = 0.05;
  RetryPolicy retry;
};

struct ProbeOutcome {
  std::vector<RawResult> results;      // sorted by (prompt_id, model_id)
  std::vector<ProbeFailure> failures;  // sorted by (prompt_id, model_id)
  RunStatus status = RunStatus::Ok;
  std::string raw_log;                 // RunLog::serialize()
};

// Scores every (prompt, model) pair. Output order is canonical regardless
// of concurrency. Throws RunAborted when the failure budget is exceeded and
// ConfigError when a model has no family.
ProbeOutcome probe_run(std::span<const ProbePrompt> dataset, const std::map<std::string, ModelFamily>& families,
                       ScoringBackend& backend, const ProbeOptions& options);

std::string serialize_raw_results(std::span<const RawResult> results);
std::vector<RawResult> parse_raw_results(std::string_view jsonl);
std::string serialize_failures(std::span<const ProbeFailure> failures);
std::vector<ProbeFailure> parse_failures(std::string_view jsonl);

}  // namespace counterprobe
