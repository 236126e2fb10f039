// counterprobe: generate probing prompts, score them, and report gender shifts.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "counterprobe/errors.hpp"
#include "counterprobe/pipeline.hpp"

namespace cp = counterprobe;

namespace {

// Flag values as given on the command line; unset ones leave the config alone.
struct Flags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples_m;
  std::optional<std::string> backend;
  std::optional<std::string> models;
  std::optional<std::string> ks;
  std::optional<std::string> out;
  std::optional<std::string> registry;
  std::optional<std::string> lexicon;
  std::optional<std::size_t> concurrency;
  std::optional<double> max_failure_fraction;
  std::optional<int> retries;
  std::optional<double> tolerance;
  std::optional<std::string> group_by;
  std::optional<std::string> formats;
  bool no_strict_registry = false;
  bool no_strict_lexicon = false;
  bool resume = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "Flat key = value config file (flags win)");
  cmd->add_option("--registry", f.registry, "Occupation table (name<TAB>female_pct); default: shipped table");
  cmd->add_option("--lexicon", f.lexicon, "Gender lexicon (token<TAB>class); default: shipped lexicon");
  cmd->add_flag("--no-strict-registry", f.no_strict_registry, "Allow registries other than 58 entries split 29/29");
  cmd->add_flag("--no-strict-lexicon", f.no_strict_lexicon, "Allow lexicons other than 126 entries split 63/63");
}

cp::RunConfig build_config(const Flags& f) {
  cp::RunConfig config;
  if (!f.config_file.empty()) cp::apply_config(config, cp::load_config_file(f.config_file));
  cp::apply_env_overrides(config);

  if (f.seed) config.seed = *f.seed;
  if (f.samples_m) config.samples_m = *f.samples_m;
  if (f.backend) config.backend = *f.backend;
  if (f.models) config.models = cp::parse_name_list(*f.models);
  if (f.ks) config.ks = cp::parse_k_list(*f.ks);
  if (f.out) config.out_dir = *f.out;
  if (f.registry) config.registry_path = *f.registry;
  if (f.lexicon) config.lexicon_path = *f.lexicon;
  if (f.concurrency) config.concurrency = *f.concurrency;
  if (f.max_failure_fraction) config.max_failure_fraction = *f.max_failure_fraction;
  if (f.retries) config.retries = *f.retries;
  if (f.tolerance) config.tolerance = *f.tolerance;
  if (f.group_by) config.group_by = cp::group_by_from_string(*f.group_by);
  if (f.formats) {
    std::set<cp::ReportFormat> formats;
    for (const auto& name : cp::parse_name_list(*f.formats)) formats.insert(cp::report_format_from_string(name));
    config.formats = std::move(formats);
  }
  if (f.no_strict_registry) config.strict_registry = false;
  if (f.no_strict_lexicon) config.strict_lexicon = false;
  if (f.resume) config.resume = true;
  config.validate();
  return config;
}

int finish(const cp::StageResult& r) {
  if (!r.message.empty()) (r.code == cp::ExitCode::Ok ? std::cout : std::cerr) << r.message << (r.message.back() == '\n' ? "" : "\n");
  return static_cast<int>(r.code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counterprobe: counterexample probing of gender stereotypes in language models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", COUNTERPROBE_VERSION);

  Flags f;
  std::string dataset_path;
  std::string results_dir;
  std::string report_out;

  auto* generate = app.add_subcommand("generate", "Write the prompt dataset (JSONL)");
  add_common(generate, f);
  generate->add_option("--seed", f.seed, "Sampling seed");
  generate->add_option("--samples-m", f.samples_m, "Samples per background-counter kind");
  generate->add_option("--out", f.out, "Dataset output path")->required();

  auto* probe = app.add_subcommand("probe", "Score a dataset against one or more models");
  add_common(probe, f);
  probe->add_option("--dataset", dataset_path, "Dataset JSONL from `generate`")->required()->check(CLI::ExistingFile);
  probe->add_option("--backend", f.backend, "mock, or the scoring service URL (env COUNTERPROBE_BACKEND_URL)");
  probe->add_option("--models", f.models, "Comma-separated model ids (default: all served)");
  probe->add_option("--top-k,--k", f.ks, "Comma-separated k values, e.g. 3,5,10");
  probe->add_option("--out", f.out, "Run directory")->required();
  probe->add_option("--concurrency", f.concurrency, "Parallel requests");
  probe->add_option("--max-failure-fraction", f.max_failure_fraction, "Abort above this failure fraction");
  probe->add_option("--retries", f.retries, "Attempts per request for transient failures");

  auto* analyze = app.add_subcommand("analyze", "Aggregate raw scores into gender metrics");
  add_common(analyze, f);
  analyze->add_option("--results", results_dir, "Run directory from `probe`")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--k,--top-k", f.ks, "Comma-separated k values");
  analyze->add_option("--tolerance", f.tolerance, "Margin change treated as unchanged");

  auto* report = app.add_subcommand("report", "Write tables and charts from analyzed results");
  add_common(report, f);
  report->add_option("--results", results_dir, "Run directory from `analyze`")->required()->check(CLI::ExistingDirectory);
  report->add_option("--models", f.models, "Comma-separated model ids (default: all in results)");
  report->add_option("--k,--top-k", f.ks, "Comma-separated k values");
  report->add_option("--format", f.formats, "table-text,csv,chart-svg,chart-data");
  report->add_option("--group-by", f.group_by, "kind or occupation");
  report->add_option("--out", report_out, "Report directory (default: <results>/report)");

  auto* run = app.add_subcommand("run", "generate, probe, analyze and report in one directory");
  add_common(run, f);
  run->add_option("--seed", f.seed, "Sampling seed");
  run->add_option("--samples-m", f.samples_m, "Samples per background-counter kind");
  run->add_option("--backend", f.backend, "mock, or the scoring service URL");
  run->add_option("--models", f.models, "Comma-separated model ids");
  run->add_option("--k,--top-k", f.ks, "Comma-separated k values");
  run->add_option("--out", f.out, "Run directory (env COUNTERPROBE_OUT_DIR)");
  run->add_option("--concurrency", f.concurrency, "Parallel requests");
  run->add_option("--max-failure-fraction", f.max_failure_fraction, "Abort above this failure fraction");
  run->add_option("--retries", f.retries, "Attempts per request for transient failures");
  run->add_option("--tolerance", f.tolerance, "Margin change treated as unchanged");
  run->add_option("--format", f.formats, "table-text,csv,chart-svg,chart-data");
  run->add_option("--group-by", f.group_by, "kind or occupation");
  run->add_flag("--resume", f.resume, "Skip stages whose artifacts match the manifest");

  auto* validate = app.add_subcommand("validate", "Check the occupation registry and gender lexicon");
  add_common(validate, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(cp::ExitCode::Usage);
  }

  try {
    const cp::RunConfig config = build_config(f);
    if (*generate) return finish(cp::stage_generate(config, config.out_dir));
    if (*probe) return finish(cp::stage_probe(config, dataset_path, config.out_dir));
    if (*analyze) return finish(cp::stage_analyze(config, results_dir));
    if (*report) {
      const std::filesystem::path out = report_out.empty() ? std::filesystem::path(results_dir) / cp::kReportDir
                                                           : std::filesystem::path(report_out);
      return finish(cp::stage_report(config, results_dir, out));
    }
    if (*run) return finish(cp::run_pipeline(config));
    if (*validate) return finish(cp::validate_inputs(config));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(cp::exit_code_for(e));
  }
  return static_cast<int>(cp::ExitCode::Usage);
}
