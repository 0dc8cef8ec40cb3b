#include "dsia/generator.hpp"

namespace dsia {

std::vector<FewShotExample> default_few_shot_bank() {
  return {
      {"Turn on the light in the kitchen.", "{kitchen.light.turn_on()}"},
      {"Turn on the oven in the garage.", "{error_input}"},
      {"Turn off the tv in the living room and lock the smart lock at the entrance.",
       "{living_room.tv.turn_off(), entrance.smart_lock.lock()}"},
      {"Turn on the kitchen light and the oven.", "{kitchen.light.turn_on(), error_input}"},
  };
}

std::string build_stage2_prompt(const GenerationRequest& request) {
  std::string p;
  p += kStage2Role;
  p += "\nThe current status of the device and the methods it possesses are provided below, "
       "please only use the methods provided.\n";
  p += "Output \"error_input\" when operating non-existent attributes and devices. Only output "
       "machine instructions and enclose them in {}.\n\n";

  p += "<home_state>\n";
  p += "The following provides the status of all devices in each room of the current "
       "household, the adjustable attributes...\n";
  p += render_state_text(request.state);
  p += "</home_state>\n\n";

  p += "<device_method>\n";
  p += "The following provides the methods to control each device in the current household:\n";
  p += render_methods_text(request.state);
  p += "</device_method>\n\n";

  if (!request.examples.empty()) {
    p += "The following are examples of user instructions and machine instructions:\n";
    for (const auto& ex : request.examples) {
      p += "User: " + ex.instruction + "\n";
      p += "Output: " + ex.gold_output + "\n";
    }
    p += "\n";
  }

  if (!request.stage1_reasoning.empty()) {
    p += "Stage-1 analysis:\n";
    p += request.stage1_reasoning;
    p += "\n\n";
  }

  p += "-------------------------------\n";
  p += "Here are the user instructions you need to reply to.\n";
  p += kUserInstructionsMarker;
  p += "\n";
  p += request.instruction;
  p += "\n";
  p += kMachineInstructionsMarker;
  p += "\n";
  return p;
}

Generation generate_candidates(const GenerationRequest& request, LanguageBackend& backend,
                               UsageMeter* meter) {
  Generation out;
  out.completion = backend.complete(build_stage2_prompt(request));
  if (meter != nullptr) meter->record(out.completion.usage);
  out.parsed = parse_sequence(out.completion.text);
  return out;
}

}  // namespace dsia
