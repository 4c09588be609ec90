#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace c4mas::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

inline std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < s.size()) lines.push_back(s.substr(start));
      break;
    }
    auto line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

/// Removes every whitespace character; aliases never carry internal blanks.
inline std::string normalize_alias(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (!is_space(c)) out.push_back(c);
  return out;
}

/// If the text is wrapped in a markdown code fence (```yaml ... ```), returns
/// the fenced body; otherwise the trimmed text. Non-empty results end in
/// exactly one newline.
inline std::string strip_code_fence(std::string_view raw) {
  auto s = trim_view(raw);
  if (s.empty()) return {};
  if (s.substr(0, 3) != "```") {
    auto open = s.find("\n```");
    if (open == std::string_view::npos) return std::string(s) + "\n";
    s = s.substr(open + 1);
  }
  auto first_nl = s.find('\n');
  if (first_nl == std::string_view::npos) return {};
  auto body = s.substr(first_nl + 1);
  auto close = body.rfind("```");
  if (close != std::string_view::npos) body = body.substr(0, close);
  auto inner = trim(body);
  return inner.empty() ? inner : inner + "\n";
}

/// Character/4 heuristic used when a backend does not report token usage.
inline std::uint64_t estimate_tokens(std::string_view s) {
  return (static_cast<std::uint64_t>(s.size()) + 3) / 4;
}

inline std::string format_fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

/// FNV-1a, used for content fingerprints in run manifests.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace c4mas::text
