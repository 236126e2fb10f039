#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "counterprobe/rng.hpp"

namespace counterprobe {

enum class Dominance { FemaleDominated, MaleDominated };

std::string_view to_string(Dominance d);
Dominance dominance_from_string(std::string_view s);
Dominance opposite(Dominance d);

// Strictly above 50 percent female is female-dominated; exactly 50 is male.
constexpr Dominance classify_dominance(double female_pct) {
  return female_pct > 50.0 ? Dominance::FemaleDominated : Dominance::MaleDominated;
}

struct Occupation {
  std::string name;
  double female_pct = 0.0;
  Dominance dominance = Dominance::MaleDominated;

  bool operator==(const Occupation&) const = default;
};

// Builds an Occupation with dominance derived from the percentage.
Occupation make_occupation(std::string name, double female_pct);

struct RegistryOptions {
  // Enforce the shipped-table shape: 58 entries split 29/29.
  bool require_canonical_shape = true;
};

inline constexpr std::size_t kCanonicalOccupationCount = 58;
inline constexpr std::size_t kCanonicalPerClass = 29;

// Immutable, ordered collection of occupations with unique names.
class Registry {
 public:
  Registry() = default;
  // Validates names and uniqueness; the canonical shape check is separate.
  explicit Registry(std::vector<Occupation> occupations);

  const std::vector<Occupation>& occupations() const noexcept { return occupations_; }
  std::size_t size() const noexcept { return occupations_.size(); }
  auto begin() const noexcept { return occupations_.begin(); }
  auto end() const noexcept { return occupations_.end(); }

  const Occupation* find(std::string_view name) const;
  const Occupation& at(std::string_view name) const;
  std::size_t count(Dominance d) const;

  // Throws ValidationError unless the registry has 58 entries split 29/29.
  void validate_canonical_shape() const;

  bool operator==(const Registry&) const = default;

 private:
  std::vector<Occupation> occupations_;
};

// Parses `name<TAB>female_pct` rows. Blank lines and `#` comments are skipped.
Registry load_registry(std::istream& in, const RegistryOptions& options = {});
Registry load_registry(std::string_view text, const RegistryOptions& options = {});
Registry load_registry_file(const std::string& path, const RegistryOptions& options = {});

// The table compiled in from data/occupations.tsv, validated.
const Registry& canonical_registry();

void to_json(nlohmann::json& j, const Occupation& o);
void from_json(const nlohmann::json& j, Occupation& o);
nlohmann::json registry_to_json(const Registry& r);
Registry registry_from_json(const nlohmann::json& j, const RegistryOptions& options = {});

// Draws an occupation of opposite dominance to `base` (never `base` itself).
// Consumes exactly one uniform_index draw from `rng`.
const Occupation& sample_counter_background(const Occupation& base, const Registry& registry,
                                            Rng& rng);

}  // namespace counterprobe
