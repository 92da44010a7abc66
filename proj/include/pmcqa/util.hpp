#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pmcqa {

std::string to_lower(std::string_view s);

// Splits on runs of whitespace; never returns empty tokens.
std::vector<std::string> split_whitespace(std::string_view s);

// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string> split_char(std::string_view s, char delim);

// Lowercase + whitespace-tokenize, the normalization applied to questions and
// answers at load time.
std::vector<std::string> normalize_tokens(std::string_view s);

// normalize_tokens joined with single spaces; canonical answer identity.
std::string normalize_answer(std::string_view s);

// Shortest round-trip decimal form via std::to_chars; used for every float we
// serialize so that equal doubles always produce equal bytes.
std::string format_double(double v);

// Strict double parse of a whole token. Throws FormatError mentioning `what`.
double parse_double(std::string_view token, const std::string& what);

// Strict whole-token integer parse. Throws FormatError mentioning `what`.
long long parse_int(std::string_view token, const std::string& what);

// FNV-1a 64-bit, used for content hashes in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Whole-file read/write. Throw IoError on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace pmcqa
