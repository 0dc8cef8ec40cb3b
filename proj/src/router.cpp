#include "dsia/router.hpp"

#include <optional>

#include <json.hpp>

#include "dsia/errors.hpp"

namespace dsia {

using nlohmann::json;

std::string_view to_string(Route route) {
  switch (route) {
    case Route::valid: return "C_valid";
    case Route::invalid: return "C_invalid";
    case Route::mixed: return "C_mixed";
    case Route::ambiguous: return "C_ambiguous";
  }
  return "C_invalid";
}

Route derive_route(std::span<const OperationVerdict> operations) {
  bool any_invalid = false;
  bool any_usable = false;
  bool any_ambiguous = false;
  for (const auto& op : operations) {
    if (!op.valid) {
      any_invalid = true;
    } else {
      any_usable = true;
      any_ambiguous = any_ambiguous || op.ambiguous;
    }
  }
  if (!any_usable) return Route::invalid;
  if (any_invalid) return Route::mixed;
  return any_ambiguous ? Route::ambiguous : Route::valid;
}

std::string build_stage1_prompt(std::string_view instruction, const HomeState& state) {
  std::string p;
  p += kStage1Role;
  p += "\n\n<home_state>\n";
  p += render_state_text(state);
  p += "</home_state>\n\n";
  p += "Check these THREE things for each operation:\n";
  p += "1. Room existence: Does the mentioned room exist?\n";
  p += "2. Device existence: Does the device exist in that room?\n";
  p += "3. Action support: Does the device support the requested action/attribute?\n\n";
  p += "Output a JSON object containing an array of operations (with valid and reason fields) "
       "and a global all_valid boolean flag.\n";
  p += "If a device reference matches several devices and their current states do not single "
       "one out, mark that operation with \"ambiguous\": true and list the matching devices as "
       "\"candidates\" (room.device).\n\n";
  p += kUserCommandMarker;
  p += "\n";
  p += instruction;
  p += "\n";
  return p;
}

namespace {

// First balanced {...} region that parses as a JSON object.
std::optional<json> first_json_object(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        json doc = json::parse(text.substr(start, i - start + 1), nullptr, false);
        if (!doc.is_discarded() && doc.is_object()) return doc;
        break;
      }
    }
  }
  return std::nullopt;
}

std::string string_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it != obj.end() && it->is_string() ? it->get<std::string>() : std::string();
}

bool bool_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it != obj.end() && it->is_boolean() && it->get<bool>();
}

}  // namespace

IntentAnalysis parse_analysis(std::string_view model_output) {
  auto doc = first_json_object(model_output);
  if (!doc) throw AnalysisError("unparseable stage-1 output");
  auto ops = doc->find("operations");
  if (ops == doc->end() || !ops->is_array()) {
    throw AnalysisError("unparseable stage-1 output: missing operations array");
  }

  IntentAnalysis analysis;
  analysis.raw_output = std::string(model_output);
  for (const auto& op : *ops) {
    if (!op.is_object()) throw AnalysisError("unparseable stage-1 output: operation not an object");
    OperationVerdict v;
    v.description = string_field(op, "description");
    v.valid = bool_field(op, "valid");
    v.ambiguous = bool_field(op, "ambiguous");
    v.reason = string_field(op, "reason");
    v.device_type = string_field(op, "device_type");
    if (auto c = op.find("candidates"); c != op.end() && c->is_array()) {
      for (const auto& item : *c) {
        if (item.is_string()) v.candidates.push_back(item.get<std::string>());
      }
    }
    if (v.reason.empty() && (!v.valid || v.ambiguous)) v.reason = "no reason given";
    analysis.operations.push_back(std::move(v));
  }
  analysis.route = derive_route(analysis.operations);
  analysis.all_valid = analysis.route == Route::valid;
  for (const auto& v : analysis.operations) {
    if (v.reason.empty()) continue;
    if (!analysis.reasoning.empty()) analysis.reasoning += "\n";
    analysis.reasoning += v.reason;
  }
  return analysis;
}

IntentAnalysis route_instruction(std::string_view instruction, const HomeState& state,
                                 LanguageBackend& backend, UsageMeter* meter) {
  CompletionResult completion = backend.complete(build_stage1_prompt(instruction, state));
  if (meter != nullptr) meter->record(completion.usage);
  IntentAnalysis analysis;
  try {
    analysis = parse_analysis(completion.text);
  } catch (const AnalysisError& e) {
    analysis = IntentAnalysis{};
    analysis.route = Route::invalid;
    analysis.fail_safe = true;
    analysis.reasoning = e.what();
    analysis.raw_output = completion.text;
  }
  analysis.usage = completion.usage;
  return analysis;
}

}  // namespace dsia
