#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace counterprobe {

enum class GenderClass { Female, Male };
enum class TokenClass { Female, Male, Unmapped };

std::string_view to_string(GenderClass g);
std::string_view to_string(TokenClass t);
GenderClass gender_class_from_string(std::string_view s);

struct GenderLexeme {
  std::string token;
  GenderClass gender = GenderClass::Female;

  bool operator==(const GenderLexeme&) const = default;
};

// Strips the word-boundary markers subword vocabularies prepend (whitespace,
// U+0120 'Ġ' from byte-level BPE, U+2581 '▁' from SentencePiece), trims
// trailing whitespace and lowercases ASCII. WordPiece "##" continuation
// pieces are left alone: they are word fragments, not words.
std::string normalize_token(std::string_view token);

inline constexpr std::size_t kCanonicalLexiconSize = 126;
inline constexpr std::size_t kCanonicalLexiconPerClass = 63;

struct LexiconReport {
  std::size_t total = 0;
  std::size_t female = 0;
  std::size_t male = 0;
  std::vector<std::string> problems;

  bool ok() const noexcept { return problems.empty(); }
};

class Lexicon {
 public:
  Lexicon() = default;
  // Throws ValidationError on an invalid token, a duplicate, or a token
  // listed under both classes.
  explicit Lexicon(std::vector<GenderLexeme> entries);

  const std::vector<GenderLexeme>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t count(GenderClass g) const;

  TokenClass classify(std::string_view token) const;

  // SHA-256 over the entries sorted by token, one "token\tclass\n" per entry.
  // Independent of file order, comments and whitespace.
  const std::string& hash() const noexcept { return hash_; }

 private:
  std::vector<GenderLexeme> entries_;
  std::unordered_map<std::string, GenderClass> index_;
  std::string hash_;
};

struct LexiconOptions {
  // Require the shipped shape: 126 entries split 63/63.
  bool strict = true;
};

Lexicon load_lexicon(std::istream& in, const LexiconOptions& options = {});
Lexicon load_lexicon(std::string_view text, const LexiconOptions& options = {});
Lexicon load_lexicon_file(const std::string& path, const LexiconOptions& options = {});

// Counts, disjointness and the canonical-shape check, collected rather than thrown.
LexiconReport validate_lexicon(const Lexicon& lexicon, bool require_canonical_shape = true);

const Lexicon& canonical_lexicon();

}  // namespace counterprobe
