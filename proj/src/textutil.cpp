#include "typojack/textutil.hpp"

#include <algorithm>
#include <cctype>

namespace typojack::text {

namespace {
bool is_word_char(unsigned char c) {
  return std::isalnum(c) != 0 || c == '_';
}
bool is_email_local(unsigned char c) {
  return std::isalnum(c) || c == '.' || c == '_' || c == '%' || c == '+' ||
         c == '-';
}
bool is_email_domain(unsigned char c) {
  return std::isalnum(c) || c == '.' || c == '-';
}
}  // namespace

std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::size_t find_ci(const std::string& haystack, const std::string& needle,
                    std::size_t from) {
  if (needle.empty() || haystack.size() < needle.size()) {
    return std::string::npos;
  }
  return to_lower(haystack).find(to_lower(needle), from);
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
  return find_ci(haystack, needle) != std::string::npos;
}

bool contains_word_ci(const std::string& haystack, const std::string& word) {
  std::string h = to_lower(haystack);
  std::string w = to_lower(word);
  std::size_t pos = 0;
  while ((pos = h.find(w, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !is_word_char(h[pos - 1]);
    std::size_t end = pos + w.size();
    bool right_ok = end >= h.size() || !is_word_char(h[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

std::optional<EmailMatch> find_email(const std::string& s, std::size_t from) {
  for (std::size_t at = s.find('@', from); at != std::string::npos;
       at = s.find('@', at + 1)) {
    std::size_t start = at;
    while (start > 0 && is_email_local(s[start - 1])) --start;
    if (start == at) continue;  // no local part
    std::size_t end = at + 1;
    while (end < s.size() && is_email_domain(s[end])) ++end;
    std::string domain = s.substr(at + 1, end - at - 1);
    std::size_t dot = domain.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 2 > domain.size()) {
      continue;  // need a tld of at least 2 chars
    }
    bool tld_alpha = true;
    for (std::size_t i = dot + 1; i < domain.size(); ++i) {
      if (!std::isalpha(static_cast<unsigned char>(domain[i]))) {
        tld_alpha = false;
        break;
      }
    }
    if (!tld_alpha || domain.size() - dot - 1 < 2) continue;
    return EmailMatch{start, s.substr(start, end - start)};
  }
  return std::nullopt;
}

std::optional<double> extract_first_number(const std::string& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    unsigned char c = s[i];
    bool starts_digit = std::isdigit(c) != 0;
    bool starts_signed = (c == '-' || c == '+') && i + 1 < s.size() &&
                         std::isdigit(static_cast<unsigned char>(s[i + 1]));
    bool starts_dot = c == '.' && i + 1 < s.size() &&
                      std::isdigit(static_cast<unsigned char>(s[i + 1]));
    if (!starts_digit && !starts_signed && !starts_dot) continue;
    try {
      std::size_t consumed = 0;
      double v = std::stod(s.substr(i), &consumed);
      if (consumed > 0) return v;
    } catch (...) {
    }
  }
  return std::nullopt;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<std::string> line_value(const std::string& body,
                                      const std::string& label) {
  for (const std::string& line : split_lines(body)) {
    if (line.rfind(label, 0) == 0) {
      return line.substr(label.size());
    }
  }
  return std::nullopt;
}

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace typojack::text
