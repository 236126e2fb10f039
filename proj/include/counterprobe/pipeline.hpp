#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "counterprobe/metrics_engine.hpp"
#include "counterprobe/report_emitter.hpp"
#include "counterprobe/scoring_client.hpp"

namespace counterprobe {

enum class ExitCode : int { Ok = 0, Usage = 1, Validation = 2, Partial = 3, Aborted = 4 };

inline constexpr const char* kOutDirEnv = "COUNTERPROBE_OUT_DIR";

// Artifact names inside a run directory.
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kDatasetFile = "dataset.jsonl";
inline constexpr std::string_view kRawResultsFile = "raw_results.jsonl";
inline constexpr std::string_view kFailuresFile = "failures.jsonl";
inline constexpr std::string_view kRawLogFile = "raw_log.jsonl";
inline constexpr std::string_view kResultsFile = "results.jsonl";
inline constexpr std::string_view kReportDir = "report";

struct RunConfig {
  std::uint64_t seed = 42;
  std::size_t samples_m = kDefaultSamplesM;
  std::string backend = "mock";      // "mock" or an http:// URL
  std::vector<std::string> models;   // empty: every model the backend lists
  std::vector<std::size_t> ks{3, 5, 10};
  std::string out_dir = "run";
  std::string registry_path;         // empty: shipped table
  std::string lexicon_path;          // empty: shipped lexicon
  bool strict_registry = true;       // enforce 58 entries split 29/29
  bool strict_lexicon = true;        // enforce 126 entries split 63/63
  std::size_t concurrency = 4;
  double max_failure_fraction = 0.05;
  int retries = 4;
  double tolerance = kDefaultEffectTolerance;
  GroupBy group_by = GroupBy::KnowledgeKind;
  std::set<ReportFormat> formats{ReportFormat::TableText, ReportFormat::Csv, ReportFormat::ChartSvg,
                                 ReportFormat::ChartData};
  bool resume = false;

  // Throws UsageError naming the offending setting.
  void validate() const;
};

// Flat "key = value" text; '#' starts a comment. Duplicate keys are a UsageError.
std::map<std::string, std::string> parse_config_text(std::string_view text);
std::map<std::string, std::string> load_config_file(const std::string& path);

// Keys: seed, samples_m, backend, models, ks, out_dir, registry, lexicon,
// strict_registry, strict_lexicon, concurrency, max_failure_fraction, retries, tolerance, group_by, formats,
// resume. Unknown keys and unparsable values raise one UsageError listing
// every offending key.
void apply_config(RunConfig& config, const std::map<std::string, std::string>& values);

// COUNTERPROBE_BACKEND_URL and COUNTERPROBE_OUT_DIR.
void apply_env_overrides(RunConfig& config);

// Sorted ascending, duplicates dropped.
std::vector<std::size_t> parse_k_list(std::string_view csv);
std::vector<std::string> parse_name_list(std::string_view csv);

struct RunManifest {
  std::uint64_t seed = 0;
  std::size_t samples_m = 0;
  std::string registry_hash;
  std::string lexicon_hash;
  std::string dataset_hash;
  std::string backend;
  std::vector<std::string> models;
  std::vector<std::size_t> ks;
  std::string tool_version;
  std::string timestamp;
  std::map<std::string, std::string> stages;  // stage -> status

  bool operator==(const RunManifest&) const = default;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
std::optional<RunManifest> read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

// ISO-8601 UTC; honours SOURCE_DATE_EPOCH when set.
std::string current_timestamp();

// Writes through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

Registry load_run_registry(const RunConfig& config);
Lexicon load_run_lexicon(const RunConfig& config);
std::unique_ptr<ScoringBackend> make_backend(const RunConfig& config, const Registry& registry);

// Model id -> family, for the requested models (all listed ones when empty).
// Throws ConfigError for a model the backend does not serve.
std::map<std::string, ModelFamily> resolve_families(ScoringBackend& backend, const std::vector<std::string>& models);

struct StageResult {
  ExitCode code = ExitCode::Ok;
  std::string message;
};

// Each stage reads and writes only files in `dir` and updates its manifest.
StageResult stage_generate(const RunConfig& config, const std::filesystem::path& dataset_path);
StageResult stage_probe(const RunConfig& config, const std::filesystem::path& dataset_path,
                        const std::filesystem::path& dir, ScoringBackend* backend = nullptr);
StageResult stage_analyze(const RunConfig& config, const std::filesystem::path& dir);
StageResult stage_report(const RunConfig& config, const std::filesystem::path& results_dir,
                         const std::filesystem::path& report_dir);

// Registry and lexicon checks; prints nothing, returns a readable summary.
StageResult validate_inputs(const RunConfig& config);

// generate -> probe -> analyze -> report in config.out_dir. With
// config.resume, stages whose outputs exist for identical manifest inputs
// are skipped.
StageResult run_pipeline(const RunConfig& config, ScoringBackend* backend = nullptr);

// Maps a library exception to the CLI exit code.
ExitCode exit_code_for(const std::exception& e);

}  // namespace counterprobe
