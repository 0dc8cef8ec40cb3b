#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsia/backend.hpp"
#include "dsia/home.hpp"

namespace dsia {

enum class Route { valid, invalid, mixed, ambiguous };

// "C_valid" | "C_invalid" | "C_mixed" | "C_ambiguous"
std::string_view to_string(Route route);

struct OperationVerdict {
  std::string description;
  bool valid = false;
  bool ambiguous = false;
  std::string reason;
  // Optional extension fields, used to phrase clarification questions.
  std::string device_type;
  std::vector<std::string> candidates;
};

struct IntentAnalysis {
  Route route = Route::invalid;
  std::vector<OperationVerdict> operations;
  std::string reasoning;
  bool all_valid = false;
  // Set when the model output could not be parsed and the router fell back
  // to C_invalid.
  bool fail_safe = false;
  std::string raw_output;
  TokenUsage usage;
};

inline constexpr std::string_view kStage1Role =
    "You are a smart home intent analyzer. Your task is to strictly evaluate if the user's "
    "command can be executed based on the provided environment state.";
inline constexpr std::string_view kUserCommandMarker = "User command:";
inline constexpr std::string_view kClarifiedPrefix = "User clarified: ";

// Pure function of the verdicts. Zero verdicts routes to C_invalid.
Route derive_route(std::span<const OperationVerdict> operations);

std::string build_stage1_prompt(std::string_view instruction, const HomeState& state);

// Throws AnalysisError when the text holds no JSON object with an
// `operations` array. The model's all_valid is overridden by the derived route.
IntentAnalysis parse_analysis(std::string_view model_output);

// Backend errors propagate; unparseable output yields a fail-safe C_invalid.
IntentAnalysis route_instruction(std::string_view instruction, const HomeState& state,
                                 LanguageBackend& backend, UsageMeter* meter = nullptr);

}  // namespace dsia
