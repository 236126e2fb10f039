#include "counterprobe/occupation_registry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "counterprobe/canonical_data.hpp"
#include "counterprobe/errors.hpp"
#include "counterprobe/text.hpp"

namespace counterprobe {

std::string_view to_string(Dominance d) {
  return d == Dominance::FemaleDominated ? "female_dominated" : "male_dominated";
}

Dominance dominance_from_string(std::string_view s) {
  if (s == "female_dominated") return Dominance::FemaleDominated;
  if (s == "male_dominated") return Dominance::MaleDominated;
  throw ParseError("unknown dominance '" + std::string(s) + "'");
}

Dominance opposite(Dominance d) {
  return d == Dominance::FemaleDominated ? Dominance::MaleDominated : Dominance::FemaleDominated;
}

Occupation make_occupation(std::string name, double female_pct) {
  const Dominance d = classify_dominance(female_pct);
  return Occupation{std::move(name), female_pct, d};
}

namespace {

void check_occupation(const Occupation& o) {
  if (o.name.empty()) throw ValidationError("occupation name is empty");
  if (o.name != ascii_lower(o.name)) {
    throw ValidationError("occupation name '" + o.name + "' is not lowercase");
  }
  if (!std::isfinite(o.female_pct) || o.female_pct < 0.0 || o.female_pct > 100.0) {
    throw ValidationError("occupation '" + o.name + "' has female_pct outside [0,100]");
  }
  if (o.dominance != classify_dominance(o.female_pct)) {
    throw ValidationError("occupation '" + o.name + "' has inconsistent dominance");
  }
}

}  // namespace

Registry::Registry(std::vector<Occupation> occupations) : occupations_(std::move(occupations)) {
  std::unordered_set<std::string> seen;
  for (const auto& o : occupations_) {
    check_occupation(o);
    if (!seen.insert(o.name).second) {
      throw ValidationError("duplicate occupation '" + o.name + "'");
    }
  }
}

const Occupation* Registry::find(std::string_view name) const {
  auto it = std::find_if(occupations_.begin(), occupations_.end(),
                         [&](const Occupation& o) { return o.name == name; });
  return it == occupations_.end() ? nullptr : &*it;
}

const Occupation& Registry::at(std::string_view name) const {
  if (const auto* o = find(name)) return *o;
  throw ConfigError("occupation '" + std::string(name) + "' is not in the registry");
}

std::size_t Registry::count(Dominance d) const {
  return static_cast<std::size_t>(std::count_if(
      occupations_.begin(), occupations_.end(), [d](const Occupation& o) { return o.dominance == d; }));
}

void Registry::validate_canonical_shape() const {
  const auto female = count(Dominance::FemaleDominated);
  const auto male = count(Dominance::MaleDominated);
  if (size() != kCanonicalOccupationCount || female != kCanonicalPerClass ||
      male != kCanonicalPerClass) {
    std::ostringstream msg;
    msg << "registry has " << size() << " occupations (" << female << " female-dominated, " << male
        << " male-dominated); expected " << kCanonicalOccupationCount << " split "
        << kCanonicalPerClass << "/" << kCanonicalPerClass;
    throw ValidationError(msg.str());
  }
}

Registry load_registry(std::istream& in, const RegistryOptions& options) {
  std::vector<Occupation> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(strip_comment(line));
    if (body.empty()) continue;

    const auto row_error = [&](const std::string& why) {
      return ParseError("occupation table line " + std::to_string(line_no) + " ('" +
                        std::string(body) + "'): " + why);
    };
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos) throw row_error("expected name<TAB>female_pct");
    const std::string_view name = trim(body.substr(0, tab));
    const std::string_view pct_text = trim(body.substr(tab + 1));
    if (name.empty()) throw row_error("empty occupation name");
    if (pct_text.find('\t') != std::string_view::npos) throw row_error("too many columns");

    double pct = 0.0;
    const auto [ptr, ec] = std::from_chars(pct_text.data(), pct_text.data() + pct_text.size(), pct);
    if (ec != std::errc() || ptr != pct_text.data() + pct_text.size()) {
      throw row_error("female_pct is not a number");
    }
    if (!std::isfinite(pct) || pct < 0.0 || pct > 100.0) throw row_error("female_pct outside [0,100]");
    rows.push_back(make_occupation(std::string(name), pct));
  }

  Registry registry(std::move(rows));
  if (options.require_canonical_shape) registry.validate_canonical_shape();
  return registry;
}

Registry load_registry(std::string_view text, const RegistryOptions& options) {
  std::istringstream in{std::string(text)};
  return load_registry(in, options);
}

Registry load_registry_file(const std::string& path, const RegistryOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open occupation table '" + path + "'");
  return load_registry(in, options);
}

const Registry& canonical_registry() {
  static const Registry registry = load_registry(canonical_occupations_tsv());
  return registry;
}

void to_json(nlohmann::json& j, const Occupation& o) {
  j = nlohmann::json{{"name", o.name}, {"female_pct", o.female_pct}, {"dominance", to_string(o.dominance)}};
}

void from_json(const nlohmann::json& j, Occupation& o) {
  o.name = j.at("name").get<std::string>();
  o.female_pct = j.at("female_pct").get<double>();
  o.dominance = dominance_from_string(j.at("dominance").get<std::string>());
}

nlohmann::json registry_to_json(const Registry& r) {
  return nlohmann::json{{"schema", "counterprobe.registry/1"}, {"occupations", r.occupations()}};
}

Registry registry_from_json(const nlohmann::json& j, const RegistryOptions& options) {
  Registry registry(j.at("occupations").get<std::vector<Occupation>>());
  if (options.require_canonical_shape) registry.validate_canonical_shape();
  return registry;
}

const Occupation& sample_counter_background(const Occupation& base, const Registry& registry,
                                            Rng& rng) {
  std::vector<const Occupation*> pool;
  const Dominance wanted = opposite(base.dominance);
  for (const auto& o : registry) {
    if (o.dominance == wanted && o.name != base.name) pool.push_back(&o);
  }
  if (pool.empty()) {
    throw ConfigError("no " + std::string(to_string(wanted)) + " occupation available as background for '" +
                      base.name + "'");
  }
  return *pool[rng.uniform_index(pool.size())];
}

}  // namespace counterprobe
