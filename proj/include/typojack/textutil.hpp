#pragma once

#include <optional>
#include <string>
#include <vector>

namespace typojack::text {

std::string to_lower(const std::string& s);

bool contains_ci(const std::string& haystack, const std::string& needle);

/// Case-insensitive find; npos when absent.
std::size_t find_ci(const std::string& haystack, const std::string& needle,
                    std::size_t from = 0);

/// Whole-word, case-insensitive match (word = [A-Za-z0-9_]+ boundaries).
bool contains_word_ci(const std::string& haystack, const std::string& word);

struct EmailMatch {
  std::size_t pos = 0;
  std::string value;
};

/// First email-like token at or after `from`.
std::optional<EmailMatch> find_email(const std::string& s, std::size_t from = 0);

/// First real number in the text (sign and decimals allowed).
std::optional<double> extract_first_number(const std::string& s);

std::vector<std::string> split_lines(const std::string& s);

/// Value of the first line starting with `label`, stripped of the label.
std::optional<std::string> line_value(const std::string& body,
                                      const std::string& label);

std::string trim(const std::string& s);

}  // namespace typojack::text
