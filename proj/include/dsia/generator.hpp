#pragma once

#include <string>
#include <vector>

#include "dsia/action.hpp"
#include "dsia/backend.hpp"
#include "dsia/home.hpp"

namespace dsia {

struct FewShotExample {
  std::string instruction;
  std::string gold_output;
};

struct GenerationRequest {
  std::string instruction;
  HomeState state;
  // Empty when Stage 1 is disabled; the block is then omitted.
  std::string stage1_reasoning;
  std::vector<FewShotExample> examples;
};

struct Generation {
  ParsedSequence parsed;
  CompletionResult completion;
};

inline constexpr std::string_view kStage2Role =
    "You are 'Al', a helpful AI Assistant that controls the devices in a house. Complete the "
    "following task as instructed or answer the following question with the information "
    "provided only.";
inline constexpr std::string_view kUserInstructionsMarker = "<User instructions:>";
inline constexpr std::string_view kMachineInstructionsMarker = "<Machine instructions:>";

// One example each for valid-single, invalid-single, valid-multi and
// mixed-multi instructions.
std::vector<FewShotExample> default_few_shot_bank();

std::string build_stage2_prompt(const GenerationRequest& request);

// Throws ParseError if the completion has no instruction block; backend
// errors propagate.
Generation generate_candidates(const GenerationRequest& request, LanguageBackend& backend,
                               UsageMeter* meter = nullptr);

}  // namespace dsia
