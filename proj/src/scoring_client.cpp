#include "counterprobe/scoring_client.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "counterprobe/errors.hpp"
#include "counterprobe/text.hpp"

namespace counterprobe {

std::string_view to_string(ScoreMode m) { return m == ScoreMode::MaskedFill ? "masked" : "causal"; }

ScoreMode score_mode_from_string(std::string_view s) {
  if (s == "masked") return ScoreMode::MaskedFill;
  if (s == "causal") return ScoreMode::CausalNext;
  throw ParseError("unknown score mode '" + std::string(s) + "'");
}

ScoreRequest make_request(const ProbePrompt& prompt, const std::string& model_id, const ModelFamily& family,
                          std::size_t top_k) {
  const RenderedPrompt rendered = render(prompt, family);
  ScoreRequest r;
  r.model_id = model_id;
  r.mode = rendered.is_continuation() ? ScoreMode::CausalNext : ScoreMode::MaskedFill;
  r.text = rendered.text;
  r.top_k = top_k;
  r.mask_sentinel = rendered.mask_sentinel;
  r.probe_key = ProbeKey{prompt.occupation.name, prompt.kind};
  return r;
}

void validate_request(const ScoreRequest& request) {
  if (request.model_id.empty()) throw UsageError("score request has no model id");
  if (request.top_k < 1) throw UsageError("top_k must be >= 1");
  if (request.mode == ScoreMode::MaskedFill) {
    if (request.mask_sentinel.empty()) throw UsageError("masked request has no mask sentinel");
    const auto n = count_occurrences(request.text, request.mask_sentinel);
    if (n != 1) {
      throw UsageError("masked request must contain exactly one " + request.mask_sentinel + ", found " +
                       std::to_string(n));
    }
  } else {
    for (std::string_view sentinel : {std::string_view("[MASK]"), std::string_view("<mask>")}) {
      if (count_occurrences(request.text, sentinel) != 0) {
        throw UsageError("causal request must not contain a mask sentinel");
      }
    }
  }
}

void validate_scores(std::span<const TokenScore> scores, std::string_view raw_payload) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const auto fail = [&](const std::string& why) {
      return ProtocolError("score " + std::to_string(i) + " ('" + s.token + "'): " + why, std::string(raw_payload));
    };
    if (!std::isfinite(s.probability) || s.probability <= 0.0 || s.probability > 1.0) {
      throw fail("probability outside (0,1]");
    }
    if (!seen.insert(s.token).second) throw fail("duplicate token");
    if (i > 0 && s.probability > scores[i - 1].probability) throw fail("probabilities are not non-increasing");
  }
}

nlohmann::json request_to_wire(const ScoreRequest& request) {
  return nlohmann::json{{"model", request.model_id},
                        {"mode", to_string(request.mode)},
                        {"text", request.text},
                        {"top_k", request.top_k}};
}

nlohmann::json scores_to_wire(std::span<const TokenScore> scores) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : scores) list.push_back({{"token", s.token}, {"p", s.probability}});
  return nlohmann::json{{"scores", std::move(list)}};
}

std::vector<TokenScore> parse_score_response(std::string_view raw_payload) {
  std::vector<TokenScore> scores;
  try {
    const auto j = nlohmann::json::parse(raw_payload);
    for (const auto& item : j.at("scores")) {
      const auto& p = item.at("p");
      if (!p.is_number()) throw ProtocolError("score probability is not a number", std::string(raw_payload));
      scores.push_back({item.at("token").get<std::string>(), p.get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed score response: ") + e.what(), std::string(raw_payload));
  }
  validate_scores(scores, raw_payload);
  return scores;
}

nlohmann::json models_to_wire(std::span<const ModelInfo> models) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json entry{{"id", m.id}, {"mode", to_string(m.mode)}};
    if (m.mode == ScoreMode::MaskedFill) entry["mask_token"] = m.mask_token;
    list.push_back(std::move(entry));
  }
  return nlohmann::json{{"models", std::move(list)}};
}

std::vector<ModelInfo> parse_models_response(std::string_view raw_payload) {
  std::vector<ModelInfo> models;
  try {
    const auto j = nlohmann::json::parse(raw_payload);
    for (const auto& item : j.at("models")) {
      ModelInfo m;
      m.id = item.at("id").get<std::string>();
      m.mode = score_mode_from_string(item.at("mode").get<std::string>());
      if (m.mode == ScoreMode::MaskedFill) m.mask_token = item.at("mask_token").get<std::string>();
      models.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed model list: ") + e.what(), std::string(raw_payload));
  } catch (const ParseError& e) {
    throw ProtocolError(e.what(), std::string(raw_payload));
  }
  return models;
}

ModelFamily family_for_model(const ModelInfo& model) {
  if (model.mode == ScoreMode::CausalNext) return causal_family();
  if (model.mask_token == "[MASK]") return cls_sep_family();
  if (model.mask_token == "<mask>") return angle_s_family();
  throw ConfigError("model '" + model.id + "' uses unsupported mask token '" + model.mask_token + "'");
}

// --- RunLog ----------------------------------------------------------------

void RunLog::record(std::string prompt_id, std::string model_id, std::string raw) {
  std::lock_guard lock(mu_);
  entries_.push_back({std::move(prompt_id), std::move(model_id), std::move(raw)});
}

std::vector<RunLog::Entry> RunLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::string RunLog::serialize() const {
  auto sorted = entries();
  std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.prompt_id, a.model_id, a.raw) < std::tie(b.prompt_id, b.model_id, b.raw);
  });
  std::string out;
  for (const auto& e : sorted) {
    out += nlohmann::json{{"prompt_id", e.prompt_id}, {"model", e.model_id}, {"raw", e.raw}}.dump();
    out += '\n';
  }
  return out;
}

// --- score -----------------------------------------------------------------

std::vector<TokenScore> score(const ScoreRequest& request, ScoringBackend& backend, const RetryPolicy& retry,
                              RunLog* log, std::string_view log_prompt_id) {
  validate_request(request);

  const int attempts = std::max(1, retry.max_attempts);
  auto backoff = retry.initial_backoff;
  std::string raw;
  for (int attempt = 1;; ++attempt) {
    try {
      raw = backend.score_raw(request);
      break;
    } catch (const TransportError& e) {
      if (!e.transient() || attempt >= attempts) {
        throw TransportError("backend unreachable after " + std::to_string(attempt) + " attempt(s): " + e.what(),
                             false);
      }
    }
    if (retry.sleep) {
      retry.sleep(backoff);
    } else {
      std::this_thread::sleep_for(backoff);
    }
    backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * retry.multiplier));
  }

  if (log) log->record(std::string(log_prompt_id), request.model_id, raw);

  auto scores = parse_score_response(raw);
  if (scores.size() > request.top_k) {
    throw ProtocolError("backend returned " + std::to_string(scores.size()) + " scores for top_k=" +
                            std::to_string(request.top_k),
                        raw);
  }
  return scores;
}

// --- probe_run -------------------------------------------------------------

ProbeOutcome probe_run(std::span<const ProbePrompt> dataset, const std::map<std::string, ModelFamily>& families,
                       ScoringBackend& backend, const ProbeOptions& options) {
  if (options.top_k < 1) throw UsageError("top_k must be >= 1");
  if (families.empty()) throw ConfigError("no models requested");

  struct Job {
    const ProbePrompt* prompt;
    const std::string* model_id;
    const ModelFamily* family;
  };
  std::vector<Job> jobs;
  jobs.reserve(dataset.size() * families.size());
  for (const auto& p : dataset) {
    for (const auto& [model_id, family] : families) jobs.push_back({&p, &model_id, &family});
  }

  const auto budget = static_cast<std::size_t>(options.max_failure_fraction * static_cast<double>(jobs.size()));
  RunLog log;
  std::mutex mu;
  std::vector<RawResult> results;
  std::vector<ProbeFailure> failures;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failure_count{0};
  std::atomic<bool> aborted{false};

  auto worker = [&] {
    while (!aborted.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      try {
        auto request = make_request(*job.prompt, *job.model_id, *job.family, options.top_k);
        auto scores = score(request, backend, options.retry, &log, job.prompt->id);
        std::lock_guard lock(mu);
        results.push_back({job.prompt->id, *job.model_id, std::move(scores)});
      } catch (const ConfigError&) {
        aborted.store(true);
        throw;
      } catch (const std::exception& e) {
        {
          std::lock_guard lock(mu);
          failures.push_back({job.prompt->id, *job.model_id, e.what()});
        }
        if (failure_count.fetch_add(1) + 1 > budget) aborted.store(true);
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(options.concurrency, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> fatal(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    threads.emplace_back([&, t] {
      try {
        worker();
      } catch (...) {
        fatal[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : fatal) {
    if (e) std::rethrow_exception(e);
  }

  const auto by_key = [](const auto& a, const auto& b) {
    return std::tie(a.prompt_id, a.model_id) < std::tie(b.prompt_id, b.model_id);
  };
  std::sort(results.begin(), results.end(), by_key);
  std::sort(failures.begin(), failures.end(), by_key);

  if (aborted.load()) {
    std::ostringstream msg;
    msg << "probe run aborted: " << failures.size() << " failure(s) exceed the budget of " << budget << " ("
        << options.max_failure_fraction * 100.0 << "% of " << jobs.size() << " requests)";
    if (!failures.empty()) msg << "; first: " << failures.front().prompt_id << "/" << failures.front().model_id
                               << ": " << failures.front().error;
    throw RunAborted(msg.str());
  }

  ProbeOutcome outcome;
  outcome.status = failures.empty() ? RunStatus::Ok : RunStatus::Partial;
  outcome.results = std::move(results);
  outcome.failures = std::move(failures);
  outcome.raw_log = log.serialize();
  return outcome;
}

// --- persistence -----------------------------------------------------------

namespace {

template <typename F>
void for_each_json_line(std::string_view jsonl, std::string_view what, F&& f) {
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      f(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::string serialize_raw_results(std::span<const RawResult> results) {
  std::string out;
  for (const auto& r : results) {
    auto j = scores_to_wire(r.scores);
    j["prompt_id"] = r.prompt_id;
    j["model"] = r.model_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<RawResult> parse_raw_results(std::string_view jsonl) {
  std::vector<RawResult> results;
  for_each_json_line(jsonl, "raw results", [&](const nlohmann::json& j) {
    RawResult r;
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.model_id = j.at("model").get<std::string>();
    r.scores = parse_score_response(j.dump());
    results.push_back(std::move(r));
  });
  return results;
}

std::string serialize_failures(std::span<const ProbeFailure> failures) {
  std::string out;
  for (const auto& f : failures) {
    out += nlohmann::json{{"prompt_id", f.prompt_id}, {"model", f.model_id}, {"error", f.error}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<ProbeFailure> parse_failures(std::string_view jsonl) {
  std::vector<ProbeFailure> failures;
  for_each_json_line(jsonl, "failures", [&](const nlohmann::json& j) {
    failures.push_back(
        {j.at("prompt_id").get<std::string>(), j.at("model").get<std::string>(), j.at("error").get<std::string>()});
  });
  return failures;
}

}  // namespace counterprobe
