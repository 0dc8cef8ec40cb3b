#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dsia/action.hpp"
#include "dsia/backend.hpp"
#include "dsia/home.hpp"

// Deterministic stand-ins for the language model. They read exactly what a
// model would see (the prompt), plus the structured intent side channel that
// synthetic instructions carry.
namespace dsia::oracle {

// Rebuilds a HomeState from a render_state_text block. Write rules are not
// part of the rendering, so the result is only good for existence and
// capability questions. Non-device lines are skipped.
HomeState read_state_text(std::string_view text);

// One operation of the embedded intent. Either room+device are given
// (explicit reference) or only a device type / id (underspecified).
struct IntentOp {
  std::optional<std::string> room;
  std::optional<std::string> device;
  std::optional<std::string> type;
  std::string method;
  std::vector<Literal> args;
  nlohmann::json effect = nlohmann::json::object();  // attribute -> value after the call
};

struct EmbeddedIntent {
  std::vector<IntentOp> ops;
  std::vector<std::string> picks;           // "room.device" chosen by a clarification
  std::vector<std::string> clarifications;  // free-text answers, side channel stripped
};

// Throws BackendError when no intent is embedded or it is malformed.
EmbeddedIntent read_intent(std::string_view prompt);

nlohmann::json to_json(const IntentOp& op);
IntentOp op_from_json(const nlohmann::json& doc);

enum class Resolution { grounded, ungrounded, ambiguous };

struct ResolvedOp {
  Resolution resolution = Resolution::ungrounded;
  std::optional<Call> call;  // the action a faithful generator would draft
  std::string reason;
  std::string device_type;
  std::vector<std::string> candidates;  // "room.device"
};

// Applies picks, clarification mentions and state-based disambiguation.
ResolvedOp resolve(const IntentOp& op, const HomeState& state, const EmbeddedIntent& context);

// Stage-1 JSON answer / Stage-2 machine-instruction answer for a prompt.
std::string answer_stage1(const HomeState& state, const EmbeddedIntent& intent);
ActionSequence draft_stage2(const HomeState& state, const EmbeddedIntent& intent);

class RuleOracleBackend : public LanguageBackend {
 public:
  CompletionResult complete(std::string_view prompt) override;
  std::string name() const override { return "rule_oracle"; }
};

struct NoiseConfig {
  double rate = 0.0;
  std::uint64_t seed = 0;
  NoiseTarget target = NoiseTarget::device;
  bool forced_grounding = true;
};

// Rule oracle whose Stage-2 drafts are perturbed per Call atom with
// probability `rate`: grounded atoms are hallucinated onto absent entities,
// ungrounded atoms are force-grounded onto the nearest existing device.
class NoisyOracleBackend : public LanguageBackend {
 public:
  explicit NoisyOracleBackend(NoiseConfig config) : config_(config) {}
  CompletionResult complete(std::string_view prompt) override;
  std::string name() const override { return "noisy_oracle"; }

  // Exposed for calibration tests: perturbs a drafted sequence.
  ActionSequence perturb(const ActionSequence& draft, const HomeState& state,
                         std::string_view prompt, std::size_t* mutated = nullptr) const;

 private:
  NoiseConfig config_;
};

}  // namespace dsia::oracle
