#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace faqpilot::text {

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
bool is_blank(std::string_view s) noexcept;
bool contains_icase(std::string_view haystack, std::string_view needle);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// 64-bit FNV-1a. Used for stable hashing (embedding buckets, cache keys);
/// never for anything security-relevant.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t value);

/// Lowercase, strip punctuation, collapse whitespace. Used to compare
/// question phrasings independent of casing and trailing punctuation.
std::string normalize_question(std::string_view s);

}  // namespace faqpilot::text
