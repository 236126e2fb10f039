#include "counterprobe/verbalizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "counterprobe/canonical_data.hpp"
#include "counterprobe/digest.hpp"
#include "counterprobe/errors.hpp"
#include "counterprobe/text.hpp"

namespace counterprobe {

namespace {

constexpr std::string_view kGpt2Space = "\xC4\xA0";       // U+0120
constexpr std::string_view kSentencePiece = "\xE2\x96\x81";  // U+2581

}  // namespace

std::string_view to_string(GenderClass g) { return g == GenderClass::Female ? "female" : "male"; }

std::string_view to_string(TokenClass t) {
  switch (t) {
    case TokenClass::Female:
      return "female";
    case TokenClass::Male:
      return "male";
    case TokenClass::Unmapped:
      return "unmapped";
  }
  return "unmapped";
}

GenderClass gender_class_from_string(std::string_view s) {
  const std::string lower = ascii_lower(trim(s));
  if (lower == "female") return GenderClass::Female;
  if (lower == "male") return GenderClass::Male;
  throw ParseError("unknown gender class '" + std::string(s) + "'");
}

std::string normalize_token(std::string_view token) {
  bool stripped = true;
  while (stripped && !token.empty()) {
    stripped = false;
    for (std::string_view marker : {kGpt2Space, kSentencePiece, std::string_view(" "), std::string_view("\t"),
                                    std::string_view("\n"), std::string_view("\r")}) {
      if (token.substr(0, marker.size()) == marker) {
        token.remove_prefix(marker.size());
        stripped = true;
      }
    }
  }
  return ascii_lower(trim(token));
}

Lexicon::Lexicon(std::vector<GenderLexeme> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.token.empty()) throw ValidationError("lexicon token is empty");
    if (normalize_token(e.token) != e.token) {
      throw ValidationError("lexicon token '" + e.token + "' is not in normalized lowercase form");
    }
    auto [it, inserted] = index_.emplace(e.token, e.gender);
    if (!inserted) {
      if (it->second != e.gender) {
        throw ValidationError("lexicon token '" + e.token + "' is listed as both female and male");
      }
      throw ValidationError("duplicate lexicon token '" + e.token + "'");
    }
  }

  std::vector<const GenderLexeme*> sorted;
  sorted.reserve(entries_.size());
  for (const auto& e : entries_) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->token < b->token; });
  std::string canonical;
  for (const auto* e : sorted) canonical.append(e->token).append("\t").append(to_string(e->gender)).append("\n");
  hash_ = sha256_hex(canonical);
}

std::size_t Lexicon::count(GenderClass g) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [g](const GenderLexeme& e) { return e.gender == g; }));
}

TokenClass Lexicon::classify(std::string_view token) const {
  const auto it = index_.find(normalize_token(token));
  if (it == index_.end()) return TokenClass::Unmapped;
  return it->second == GenderClass::Female ? TokenClass::Female : TokenClass::Male;
}

LexiconReport validate_lexicon(const Lexicon& lexicon, bool require_canonical_shape) {
  LexiconReport report;
  report.total = lexicon.size();
  report.female = lexicon.count(GenderClass::Female);
  report.male = lexicon.count(GenderClass::Male);

  std::unordered_map<std::string, GenderClass> seen;
  for (const auto& e : lexicon.entries()) {
    auto [it, inserted] = seen.emplace(e.token, e.gender);
    if (!inserted) {
      report.problems.push_back(it->second != e.gender ? "class collision on '" + e.token + "'"
                                                       : "duplicate token '" + e.token + "'");
    }
  }
  if (require_canonical_shape) {
    if (report.total != kCanonicalLexiconSize) {
      report.problems.push_back("expected " + std::to_string(kCanonicalLexiconSize) + " tokens, found " +
                                std::to_string(report.total));
    }
    if (report.female != kCanonicalLexiconPerClass || report.male != kCanonicalLexiconPerClass) {
      report.problems.push_back("expected a " + std::to_string(kCanonicalLexiconPerClass) + "/" +
                                std::to_string(kCanonicalLexiconPerClass) + " split, found " +
                                std::to_string(report.female) + "/" + std::to_string(report.male));
    }
  }
  return report;
}

Lexicon load_lexicon(std::istream& in, const LexiconOptions& options) {
  std::vector<GenderLexeme> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos) {
      throw ParseError("lexicon line " + std::to_string(line_no) + " ('" + std::string(body) +
                       "'): expected token<TAB>class");
    }
    GenderLexeme lexeme;
    lexeme.token = normalize_token(body.substr(0, tab));
    try {
      lexeme.gender = gender_class_from_string(body.substr(tab + 1));
    } catch (const ParseError& e) {
      throw ParseError("lexicon line " + std::to_string(line_no) + ": " + e.what());
    }
    entries.push_back(std::move(lexeme));
  }

  Lexicon lexicon(std::move(entries));
  if (options.strict) {
    const auto report = validate_lexicon(lexicon, true);
    if (!report.ok()) throw ValidationError("lexicon failed validation: " + report.problems.front());
  }
  return lexicon;
}

Lexicon load_lexicon(std::string_view text, const LexiconOptions& options) {
  std::istringstream in{std::string(text)};
  return load_lexicon(in, options);
}

Lexicon load_lexicon_file(const std::string& path, const LexiconOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon '" + path + "'");
  return load_lexicon(in, options);
}

const Lexicon& canonical_lexicon() {
  static const Lexicon lexicon = load_lexicon(canonical_lexicon_tsv());
  return lexicon;
}

}  // namespace counterprobe
