#include "counterprobe/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "counterprobe/digest.hpp"
#include "counterprobe/errors.hpp"
#include "counterprobe/http_backend.hpp"
#include "counterprobe/mock_backend.hpp"
#include "counterprobe/text.hpp"

namespace fs = std::filesystem;

namespace counterprobe {

// --- config ----------------------------------------------------------------

void RunConfig::validate() const {
  std::vector<std::string> bad;
  if (samples_m < 1) bad.push_back("samples_m (must be >= 1)");
  if (ks.empty()) bad.push_back("ks (must not be empty)");
  if (std::any_of(ks.begin(), ks.end(), [](std::size_t k) { return k == 0; })) bad.push_back("ks (k must be >= 1)");
  if (std::set<std::size_t>(ks.begin(), ks.end()).size() != ks.size()) bad.push_back("ks (duplicate k)");
  if (concurrency < 1) bad.push_back("concurrency (must be >= 1)");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    bad.push_back("max_failure_fraction (must be in [0,1])");
  }
  if (retries < 1) bad.push_back("retries (must be >= 1)");
  if (!(tolerance >= 0.0)) bad.push_back("tolerance (must be >= 0)");
  if (formats.empty()) bad.push_back("formats (must not be empty)");
  if (backend != "mock" && backend.rfind("http://", 0) != 0) bad.push_back("backend (expected mock or http://...)");
  if (out_dir.empty()) bad.push_back("out_dir (must not be empty)");
  if (!bad.empty()) {
    std::string msg = "invalid configuration: ";
    for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? "; " : "") + bad[i];
    throw UsageError(msg);
  }
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> values;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    if (!values.emplace(key, value).second) throw UsageError("config key '" + key + "' given more than once");
  }
  return values;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::vector<std::size_t> parse_k_list(std::string_view csv) {
  std::vector<std::size_t> ks;
  for (const auto& part : split(csv, ',')) {
    const auto t = trim(part);
    std::size_t k = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), k);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
      throw UsageError("invalid k '" + std::string(t) + "'");
    }
    if (k == 0) throw UsageError("k must be >= 1");
    ks.push_back(k);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

std::vector<std::string> parse_name_list(std::string_view csv) {
  std::vector<std::string> names;
  for (const auto& part : split(csv, ',')) {
    const auto t = trim(part);
    if (!t.empty()) names.emplace_back(t);
  }
  return names;
}

namespace {

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("not a number");
  return v;
}

bool parse_bool(const std::string& s) {
  const auto v = ascii_lower(s);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("not a boolean");
}

}  // namespace

void apply_config(RunConfig& config, const std::map<std::string, std::string>& values) {
  std::vector<std::string> offending;
  for (const auto& [key, value] : values) {
    try {
      if (key == "seed") {
        config.seed = parse_number<std::uint64_t>(value);
      } else if (key == "samples_m") {
        config.samples_m = parse_number<std::size_t>(value);
      } else if (key == "backend") {
        config.backend = value;
      } else if (key == "models") {
        config.models = parse_name_list(value);
      } else if (key == "ks") {
        config.ks = parse_k_list(value);
      } else if (key == "out_dir") {
        config.out_dir = value;
      } else if (key == "registry") {
        config.registry_path = value;
      } else if (key == "lexicon") {
        config.lexicon_path = value;
      } else if (key == "strict_registry") {
        config.strict_registry = parse_bool(value);
      } else if (key == "strict_lexicon") {
        config.strict_lexicon = parse_bool(value);
      } else if (key == "concurrency") {
        config.concurrency = parse_number<std::size_t>(value);
      } else if (key == "max_failure_fraction") {
        config.max_failure_fraction = parse_number<double>(value);
      } else if (key == "retries") {
        config.retries = parse_number<int>(value);
      } else if (key == "tolerance") {
        config.tolerance = parse_number<double>(value);
      } else if (key == "group_by") {
        config.group_by = group_by_from_string(value);
      } else if (key == "formats") {
        std::set<ReportFormat> formats;
        for (const auto& f : parse_name_list(value)) formats.insert(report_format_from_string(f));
        config.formats = std::move(formats);
      } else if (key == "resume") {
        config.resume = parse_bool(value);
      } else {
        offending.push_back(key + " (unknown key)");
      }
    } catch (const Error& e) {
      offending.push_back(key + " (" + e.what() + ")");
    }
  }
  if (!offending.empty()) {
    std::string msg = "config conflicts in keys: ";
    for (std::size_t i = 0; i < offending.size(); ++i) msg += (i ? ", " : "") + offending[i];
    throw UsageError(msg);
  }
}

void apply_env_overrides(RunConfig& config) {
  if (const char* url = std::getenv(kBackendUrlEnv); url && *url) config.backend = url;
  if (const char* out = std::getenv(kOutDirEnv); out && *out) config.out_dir = out;
}

// --- manifest --------------------------------------------------------------

nlohmann::json manifest_to_json(const RunManifest& m) {
  return nlohmann::json{{"schema", "counterprobe.manifest/1"},
                        {"seed", m.seed},
                        {"samples_m", m.samples_m},
                        {"registry_hash", m.registry_hash},
                        {"lexicon_hash", m.lexicon_hash},
                        {"dataset_hash", m.dataset_hash},
                        {"backend", m.backend},
                        {"models", m.models},
                        {"ks", m.ks},
                        {"tool_version", m.tool_version},
                        {"timestamp", m.timestamp},
                        {"stages", m.stages}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.samples_m = j.at("samples_m").get<std::size_t>();
    m.registry_hash = j.at("registry_hash").get<std::string>();
    m.lexicon_hash = j.at("lexicon_hash").get<std::string>();
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
    m.backend = j.at("backend").get<std::string>();
    m.models = j.at("models").get<std::vector<std::string>>();
    m.ks = j.at("ks").get<std::vector<std::size_t>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::string>();
    m.stages = j.at("stages").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
}

std::optional<RunManifest> read_manifest(const fs::path& dir) {
  const auto path = dir / kManifestFile;
  if (!fs::exists(path)) return std::nullopt;
  try {
    return manifest_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  write_file_atomic(dir / kManifestFile, manifest_to_json(m).dump(2) + "\n");
}

std::string current_timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ConfigError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- inputs ----------------------------------------------------------------

Registry load_run_registry(const RunConfig& config) {
  if (config.registry_path.empty()) return canonical_registry();
  return load_registry_file(config.registry_path, RegistryOptions{config.strict_registry});
}

Lexicon load_run_lexicon(const RunConfig& config) {
  if (config.lexicon_path.empty()) return canonical_lexicon();
  return load_lexicon_file(config.lexicon_path, LexiconOptions{config.strict_lexicon});
}

std::unique_ptr<ScoringBackend> make_backend(const RunConfig& config, const Registry& registry) {
  if (config.backend == "mock") {
    return std::make_unique<MockBackend>(make_synthetic_backend(registry, default_model_catalog()));
  }
  return std::make_unique<HttpBackend>(config.backend);
}

std::map<std::string, ModelFamily> resolve_families(ScoringBackend& backend, const std::vector<std::string>& models) {
  const auto listed = backend.list_models();
  std::map<std::string, ModelFamily> families;
  if (models.empty()) {
    for (const auto& m : listed) families.emplace(m.id, family_for_model(m));
  } else {
    for (const auto& id : models) {
      const auto it = std::find_if(listed.begin(), listed.end(), [&](const ModelInfo& m) { return m.id == id; });
      if (it == listed.end()) throw ConfigError("backend " + backend.identity() + " does not serve model '" + id + "'");
      families.emplace(id, family_for_model(*it));
    }
  }
  if (families.empty()) throw ConfigError("backend " + backend.identity() + " lists no models");
  return families;
}

namespace {

std::string registry_hash(const Registry& r) { return sha256_hex(registry_to_json(r).dump()); }

RunManifest load_or_new_manifest(const fs::path& dir) {
  auto m = read_manifest(dir).value_or(RunManifest{});
  m.tool_version = COUNTERPROBE_VERSION;
  m.timestamp = current_timestamp();
  return m;
}

std::vector<std::string> model_ids(const std::map<std::string, ModelFamily>& families) {
  std::vector<std::string> ids;
  for (const auto& [id, family] : families) ids.push_back(id);
  return ids;
}

}  // namespace

// --- stages ----------------------------------------------------------------

StageResult stage_generate(const RunConfig& config, const fs::path& dataset_path) {
  config.validate();
  const Registry registry = load_run_registry(config);
  const Lexicon lexicon = load_run_lexicon(config);

  DatasetConfig dc;
  dc.background_samples_m = config.samples_m;
  dc.seed = config.seed;
  dc.registry = registry;
  const auto prompts = generate_dataset(dc);
  const std::string text = serialize_dataset(prompts);
  write_file_atomic(dataset_path, text);

  const fs::path dir = dataset_path.has_parent_path() ? dataset_path.parent_path() : fs::path(".");
  RunManifest m = load_or_new_manifest(dir);
  m.seed = config.seed;
  m.samples_m = config.samples_m;
  m.registry_hash = registry_hash(registry);
  m.lexicon_hash = lexicon.hash();
  m.dataset_hash = sha256_hex(text);
  m.stages["generate"] = "ok";
  write_manifest(dir, m);
  return {ExitCode::Ok, "generated " + std::to_string(prompts.size()) + " prompts -> " + dataset_path.string()};
}

StageResult stage_probe(const RunConfig& config, const fs::path& dataset_path, const fs::path& dir,
                        ScoringBackend* backend) {
  config.validate();
  const Registry registry = load_run_registry(config);
  const Lexicon lexicon = load_run_lexicon(config);
  const std::string dataset_text = read_file(dataset_path);
  const auto prompts = parse_dataset(dataset_text, registry);

  fs::create_directories(dir);
  const fs::path local_dataset = dir / kDatasetFile;
  if (!fs::exists(local_dataset) || !fs::equivalent(dataset_path, local_dataset)) {
    write_file_atomic(local_dataset, dataset_text);
  }

  std::unique_ptr<ScoringBackend> owned;
  if (!backend) {
    owned = make_backend(config, registry);
    backend = owned.get();
  }
  const auto families = resolve_families(*backend, config.models);

  ProbeOptions options;
  options.top_k = *std::max_element(config.ks.begin(), config.ks.end());
  options.concurrency = config.concurrency;
  options.max_failure_fraction = config.max_failure_fraction;
  options.retry.max_attempts = config.retries;

  RunManifest m = load_or_new_manifest(dir);
  m.registry_hash = registry_hash(registry);
  m.lexicon_hash = lexicon.hash();
  m.dataset_hash = sha256_hex(dataset_text);
  m.backend = backend->identity();
  m.models = model_ids(families);
  m.ks = config.ks;
  // The dataset file does not carry its generation settings; keep the
  // manifest's when present, else the config's.
  if (!m.stages.contains("generate")) {
    m.seed = config.seed;
    m.samples_m = config.samples_m;
  }

  try {
    auto outcome = probe_run(prompts, families, *backend, options);
    write_file_atomic(dir / kRawResultsFile, serialize_raw_results(outcome.results));
    write_file_atomic(dir / kFailuresFile, serialize_failures(outcome.failures));
    write_file_atomic(dir / kRawLogFile, outcome.raw_log);
    const bool partial = outcome.status == RunStatus::Partial;
    m.stages["probe"] = partial ? "partial" : "ok";
    write_manifest(dir, m);
    std::string msg = "probed " + std::to_string(outcome.results.size()) + " (prompt, model) pairs";
    if (partial) msg += ", " + std::to_string(outcome.failures.size()) + " failed (see failures.jsonl)";
    return {partial ? ExitCode::Partial : ExitCode::Ok, msg};
  } catch (const RunAborted& e) {
    m.stages["probe"] = "aborted";
    write_manifest(dir, m);
    return {ExitCode::Aborted, e.what()};
  }
}

StageResult stage_analyze(const RunConfig& config, const fs::path& dir) {
  config.validate();
  const Registry registry = load_run_registry(config);
  const Lexicon lexicon = load_run_lexicon(config);
  const auto prompts = parse_dataset(read_file(dir / kDatasetFile), registry);
  const auto raw = parse_raw_results(read_file(dir / kRawResultsFile));

  AnalysisOptions options;
  options.ks = config.ks;
  options.tolerance = config.tolerance;
  const auto analysis = analyze(prompts, raw, lexicon, options);
  write_file_atomic(dir / kResultsFile, serialize_results(analysis));

  RunManifest m = load_or_new_manifest(dir);
  m.lexicon_hash = lexicon.hash();
  m.ks = config.ks;
  m.stages["analyze"] = "ok";
  write_manifest(dir, m);
  return {ExitCode::Ok, "analyzed " + std::to_string(analysis.conditions.size()) + " conditions, " +
                            std::to_string(analysis.effects.size()) + " effects, " +
                            std::to_string(analysis.excluded_cells) + " non-gendered cells excluded"};
}

StageResult stage_report(const RunConfig& config, const fs::path& results_dir, const fs::path& report_dir) {
  config.validate();
  const auto parsed = parse_results(read_file(results_dir / kResultsFile));
  ReportSpec spec;
  spec.models = config.models;
  spec.ks = config.ks;
  spec.group_by = config.group_by;
  spec.formats = config.formats;
  const auto report = build_report(parsed, spec);

  fs::create_directories(report_dir);
  for (const auto& [name, contents] : report.artifacts) write_file_atomic(report_dir / name, contents);

  if (fs::exists(results_dir / kManifestFile)) {
    RunManifest m = load_or_new_manifest(results_dir);
    m.stages["report"] = "ok";
    write_manifest(results_dir, m);
  }
  return {ExitCode::Ok, "wrote " + std::to_string(report.artifacts.size()) + " report files to " + report_dir.string() +
                            " (" + std::to_string(report.gaps.size()) + " gaps)"};
}

StageResult validate_inputs(const RunConfig& config) {
  std::ostringstream msg;
  const Registry registry = load_run_registry(config);
  registry.validate_canonical_shape();
  msg << "registry: " << registry.size() << " occupations (" << registry.count(Dominance::FemaleDominated)
      << " female-dominated, " << registry.count(Dominance::MaleDominated) << " male-dominated)\n";

  const Lexicon lexicon = load_run_lexicon(config);
  const auto report = validate_lexicon(lexicon, true);
  msg << "lexicon: " << report.total << " tokens (" << report.female << " female, " << report.male
      << " male), hash " << lexicon.hash() << "\n";
  for (const auto& p : report.problems) msg << "  problem: " << p << "\n";
  return {report.ok() ? ExitCode::Ok : ExitCode::Validation, msg.str()};
}

StageResult run_pipeline(const RunConfig& config, ScoringBackend* backend) {
  config.validate();
  const fs::path dir = config.out_dir;
  fs::create_directories(dir);

  const Registry registry = load_run_registry(config);
  const Lexicon lexicon = load_run_lexicon(config);
  std::unique_ptr<ScoringBackend> owned;
  if (!backend) {
    owned = make_backend(config, registry);
    backend = owned.get();
  }
  const auto families = resolve_families(*backend, config.models);

  const auto prior = read_manifest(dir);
  const bool same_inputs = config.resume && prior && prior->seed == config.seed &&
                           prior->samples_m == config.samples_m && prior->registry_hash == registry_hash(registry) &&
                           prior->lexicon_hash == lexicon.hash() && prior->backend == backend->identity() &&
                           prior->models == model_ids(families) && prior->ks == config.ks;
  const auto done = [&](const char* stage, std::string_view artifact) {
    return same_inputs && prior->stages.contains(stage) && prior->stages.at(stage) == "ok" && fs::exists(dir / artifact);
  };

  std::vector<std::string> messages;
  ExitCode code = ExitCode::Ok;
  const fs::path dataset = dir / kDatasetFile;

  bool regenerated = false;
  if (done("generate", kDatasetFile) && sha256_hex(read_file(dataset)) == prior->dataset_hash) {
    messages.push_back("generate: up to date");
  } else {
    messages.push_back(stage_generate(config, dataset).message);
    regenerated = true;
  }

  if (!regenerated && done("probe", kRawResultsFile)) {
    messages.push_back("probe: up to date");
  } else {
    regenerated = true;
    auto r = stage_probe(config, dataset, dir, backend);
    messages.push_back(r.message);
    if (r.code == ExitCode::Aborted) return {ExitCode::Aborted, r.message};
    code = r.code;
  }

  if (!regenerated && done("analyze", kResultsFile)) {
    messages.push_back("analyze: up to date");
  } else {
    regenerated = true;
    messages.push_back(stage_analyze(config, dir).message);
  }

  if (!regenerated && fs::exists(dir / kReportDir) && prior->stages.contains("report")) {
    messages.push_back("report: up to date");
  } else {
    messages.push_back(stage_report(config, dir, dir / kReportDir).message);
  }

  std::string joined;
  for (const auto& m : messages) joined += m + "\n";
  return {code, joined};
}

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const ConfigError*>(&e)) return ExitCode::Usage;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e)) return ExitCode::Validation;
  return ExitCode::Aborted;
}

}  // namespace counterprobe
