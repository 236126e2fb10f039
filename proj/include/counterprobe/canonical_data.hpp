#pragma once

#include <string_view>

namespace counterprobe {

// Byte-exact contents of data/occupations.tsv and data/gender_lexicon.tsv.
std::string_view canonical_occupations_tsv();
std::string_view canonical_lexicon_tsv();

}  // namespace counterprobe
