#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dsia {

// A DSL argument. Bare words `true` / `false` parse as booleans.
using Literal = std::variant<std::int64_t, double, bool, std::string>;

// One grounded tool call: <room>.<device>.<capability>(params...).
struct Call {
  std::string room;
  std::string device;
  std::string capability;
  std::vector<Literal> params;

  bool operator==(const Call&) const = default;
  bool operator<(const Call& other) const;
};

// The error token, written `error_input` on the wire.
struct ErrorToken {
  bool operator==(const ErrorToken&) const = default;
  bool operator<(const ErrorToken&) const { return false; }
};

using AtomicAction = std::variant<Call, ErrorToken>;
using ActionSequence = std::vector<AtomicAction>;

inline constexpr std::string_view kErrorTokenText = "error_input";

inline bool is_error(const AtomicAction& a) { return std::holds_alternative<ErrorToken>(a); }
inline const Call* as_call(const AtomicAction& a) { return std::get_if<Call>(&a); }

struct ItemError {
  std::size_t index;
  std::string text;
  std::string message;
};

// Result of parsing model output. Malformed items are kept in place as
// ErrorTokens and reported in `errors`.
struct ParsedSequence {
  ActionSequence actions;
  std::vector<ItemError> errors;
};

// Lowercase, spaces and dashes to underscores, runs collapsed, trimmed.
std::string normalize_identifier(std::string_view text);
bool is_identifier(std::string_view text);

// Throws ParseError when the text holds no balanced `{...}` block.
ParsedSequence parse_sequence(std::string_view text);

std::string render_literal(const Literal& value);
std::string render_action(const AtomicAction& action);
std::string render_sequence(const ActionSequence& sequence);

Literal canonical_literal(const Literal& value);
AtomicAction normalize_action(const AtomicAction& action);
ActionSequence normalize_sequence(const ActionSequence& sequence);

}  // namespace dsia
