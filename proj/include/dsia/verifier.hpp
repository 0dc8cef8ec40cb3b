#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dsia/action.hpp"
#include "dsia/home.hpp"

namespace dsia {

// Outcome of the room -> device -> capability cascade for one action.
struct VerificationResult {
  AtomicAction action;
  bool level_room = false;
  bool level_device = false;
  bool level_capability = false;
  bool passed = false;
  // `missing_room:<r>` | `missing_device:<r>.<d>` | `missing_capability:<r>.<d>.<f>`
  // | `bad_params:<r>.<d>.<f>:<detail>` | `error_token`
  std::optional<std::string> failure_reason;
};

struct FilterOutcome {
  ActionSequence final;
  std::vector<VerificationResult> results;
  std::set<std::string> error_set;
};

// The three levels take a Call; passing the error token is a ContractError.
bool verify_room(const AtomicAction& action, const HomeState& state);
bool verify_device(const AtomicAction& action, const HomeState& state);
// Also requires the device to exist.
bool verify_capability(const AtomicAction& action, const HomeState& state);

// Arity, kind and range check. Returns a description of the first mismatch.
std::optional<std::string> check_params(const Capability& capability,
                                        const std::vector<Literal>& params);

VerificationResult verify_action(const AtomicAction& action, const HomeState& state);

// Replaces every failing element with the error token at the same index.
// Nothing is executed here.
FilterOutcome filter_sequence(const ActionSequence& raw, const HomeState& state);

}  // namespace dsia
