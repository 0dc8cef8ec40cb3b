#include "dsia/action.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include "dsia/errors.hpp"

namespace dsia {

bool Call::operator<(const Call& other) const {
  return std::tie(room, device, capability, params) <
         std::tie(other.room, other.device, other.capability, other.params);
}

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_bare_word(std::string_view s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s.front())) != 0) return false;
  return std::all_of(s.begin(), s.end(), is_word_char);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())) != 0) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())) != 0) s.remove_suffix(1);
  return s;
}

// Skips a quoted run starting at `i` (which holds the quote). Returns the
// index one past the closing quote, or npos if unterminated.
std::size_t skip_quoted(std::string_view s, std::size_t i) {
  const char quote = s[i];
  for (++i; i < s.size(); ++i) {
    if (s[i] == '\\') {
      ++i;
    } else if (s[i] == quote) {
      return i + 1;
    }
  }
  return std::string_view::npos;
}

// Finds the first balanced {...} region and returns its interior.
std::optional<std::string_view> extract_block(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    std::size_t i = start;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '"' || c == '\'') {
        const std::size_t next = skip_quoted(text, i);
        if (next == std::string_view::npos) break;
        i = next;
        continue;
      }
      if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) return text.substr(start + 1, i - start - 1);
      }
      ++i;
    }
  }
  return std::nullopt;
}

// Splits on commas outside quotes, parentheses and braces.
std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '"' || c == '\'') {
      const std::size_t next = skip_quoted(s, i);
      if (next == std::string_view::npos) break;
      i = next;
      continue;
    }
    if (c == '(' || c == '{' || c == '[') {
      ++depth;
    } else if (c == ')' || c == '}' || c == ']') {
      --depth;
    } else if (c == ',' && depth == 0) {
      parts.push_back(s.substr(begin, i - begin));
      begin = i + 1;
    }
    ++i;
  }
  parts.push_back(s.substr(begin));
  return parts;
}

std::optional<std::string> unquote(std::string_view s) {
  if (s.size() < 2 || s.front() != s.back() || (s.front() != '"' && s.front() != '\'')) {
    return std::nullopt;
  }
  if (skip_quoted(s, 0) != s.size()) return std::nullopt;
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char c = s[i];
    if (c == '\\' && i + 2 < s.size()) {
      c = s[++i];
      if (c == 'n') c = '\n';
      else if (c == 't') c = '\t';
    }
    out.push_back(c);
  }
  return out;
}

std::optional<Literal> parse_literal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '"' || s.front() == '\'') {
    auto str = unquote(s);
    if (!str) return std::nullopt;
    return Literal{std::move(*str)};
  }
  if (s == "true") return Literal{true};
  if (s == "false") return Literal{false};
  if (is_bare_word(s)) return Literal{std::string(s)};

  std::string_view digits = s;
  if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
  const bool looks_real = digits.find_first_of(".eE") != std::string_view::npos;
  if (!looks_real) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec == std::errc{} && ptr == digits.data() + digits.size()) return Literal{v};
  }
  double d = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
  if (ec == std::errc{} && ptr == digits.data() + digits.size() && std::isfinite(d)) {
    return Literal{d};
  }
  return std::nullopt;
}

struct ItemResult {
  std::optional<AtomicAction> action;
  std::string message;
};

ItemResult parse_item(std::string_view raw) {
  const std::string_view item = trim(raw);
  if (item.empty()) return {std::nullopt, "empty item"};
  if (item == kErrorTokenText) return {AtomicAction{ErrorToken{}}, {}};

  const std::size_t open = item.find('(');
  if (open == std::string_view::npos || item.back() != ')') {
    return {std::nullopt, "expected room.device.method(...)"};
  }
  std::string_view path = trim(item.substr(0, open));
  std::vector<std::string> segments;
  while (true) {
    const std::size_t dot = path.find('.');
    std::string_view seg = trim(path.substr(0, dot));
    if (seg.empty() || !std::all_of(seg.begin(), seg.end(), is_word_char)) {
      return {std::nullopt, "bad identifier in target path"};
    }
    segments.emplace_back(normalize_identifier(seg));
    if (dot == std::string_view::npos) break;
    path.remove_prefix(dot + 1);
  }
  if (segments.size() != 3) return {std::nullopt, "target path needs exactly room.device.method"};

  Call call{segments[0], segments[1], segments[2], {}};
  const std::string_view args = trim(item.substr(open + 1, item.size() - open - 2));
  if (!args.empty()) {
    for (std::string_view arg : split_top_level(args)) {
      auto literal = parse_literal(trim(arg));
      if (!literal) return {std::nullopt, "bad argument '" + std::string(trim(arg)) + "'"};
      call.params.push_back(std::move(*literal));
    }
  }
  return {AtomicAction{std::move(call)}, {}};
}

}  // namespace

std::string normalize_identifier(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc) != 0 || c == '-' || c == '_') {
      if (!out.empty() && out.back() != '_') out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

bool is_identifier(std::string_view text) { return is_bare_word(text); }

ParsedSequence parse_sequence(std::string_view text) {
  const auto block = extract_block(text);
  if (!block) throw ParseError("no instruction block");

  ParsedSequence out;
  if (trim(*block).empty()) return out;
  const auto items = split_top_level(*block);
  out.actions.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto parsed = parse_item(items[i]);
    if (parsed.action) {
      out.actions.push_back(std::move(*parsed.action));
    } else {
      out.actions.emplace_back(ErrorToken{});
      out.errors.push_back({i, std::string(trim(items[i])), std::move(parsed.message)});
    }
  }
  return out;
}

std::string render_literal(const Literal& value) {
  struct Visitor {
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
    std::string operator()(double v) const {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      std::string s(buf, ptr);
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    std::string operator()(const std::string& v) const {
      if (is_bare_word(v) && v != "true" && v != "false") return v;
      std::string s = "\"";
      for (char c : v) {
        if (c == '"' || c == '\\') s.push_back('\\');
        if (c == '\n') {
          s += "\\n";
          continue;
        }
        s.push_back(c);
      }
      s.push_back('"');
      return s;
    }
  };
  return std::visit(Visitor{}, value);
}

std::string render_action(const AtomicAction& action) {
  const Call* call = as_call(action);
  if (call == nullptr) return std::string(kErrorTokenText);
  std::string s = call->room + "." + call->device + "." + call->capability + "(";
  for (std::size_t i = 0; i < call->params.size(); ++i) {
    if (i != 0) s += ", ";
    s += render_literal(call->params[i]);
  }
  s += ")";
  return s;
}

std::string render_sequence(const ActionSequence& sequence) {
  std::string s = "{";
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (i != 0) s += ", ";
    s += render_action(sequence[i]);
  }
  s += "}";
  return s;
}

Literal canonical_literal(const Literal& value) {
  if (const double* d = std::get_if<double>(&value)) {
    constexpr double kLimit = 9.2e18;
    if (std::isfinite(*d) && std::trunc(*d) == *d && std::fabs(*d) < kLimit) {
      return Literal{static_cast<std::int64_t>(*d)};
    }
  }
  return value;
}

AtomicAction normalize_action(const AtomicAction& action) {
  const Call* call = as_call(action);
  if (call == nullptr) return action;
  Call out{normalize_identifier(call->room), normalize_identifier(call->device),
           normalize_identifier(call->capability), {}};
  out.params.reserve(call->params.size());
  for (const auto& p : call->params) out.params.push_back(canonical_literal(p));
  return out;
}

ActionSequence normalize_sequence(const ActionSequence& sequence) {
  ActionSequence out;
  out.reserve(sequence.size());
  for (const auto& a : sequence) out.push_back(normalize_action(a));
  return out;
}

}  // namespace dsia
