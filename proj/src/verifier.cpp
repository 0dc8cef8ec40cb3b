#include "dsia/verifier.hpp"

#include <cmath>

#include "dsia/errors.hpp"

namespace dsia {

namespace {

const Call& require_call(const AtomicAction& action, const char* level) {
  const Call* call = as_call(action);
  if (call == nullptr) throw ContractError(std::string(level) + ": error token is not verifiable");
  return *call;
}

std::optional<double> numeric_value(const Literal& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

bool enum_allows(const ParamSpec& spec, const Literal& v) {
  for (const auto& allowed : spec.values) {
    if (const auto* s = std::get_if<std::string>(&v); s && allowed.is_string() &&
                                                      allowed.get<std::string>() == *s) {
      return true;
    }
    if (auto n = numeric_value(v); n && allowed.is_number() && allowed.get<double>() == *n) {
      return true;
    }
    if (const auto* b = std::get_if<bool>(&v); b && allowed.is_boolean() &&
                                               allowed.get<bool>() == *b) {
      return true;
    }
  }
  return false;
}

}  // namespace

bool verify_room(const AtomicAction& action, const HomeState& state) {
  const Call& call = require_call(action, "verify_room");
  return state.find_room(call.room) != nullptr;
}

bool verify_device(const AtomicAction& action, const HomeState& state) {
  const Call& call = require_call(action, "verify_device");
  const Room* room = state.find_room(call.room);
  return room != nullptr && room->devices.contains(call.device);
}

std::optional<std::string> check_params(const Capability& capability,
                                        const std::vector<Literal>& params) {
  if (params.size() != capability.params.size()) {
    return "expected " + std::to_string(capability.params.size()) + " argument(s), got " +
           std::to_string(params.size());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamSpec& spec = capability.params[i];
    const Literal value = canonical_literal(params[i]);
    const std::string shown = spec.name + "=" + render_literal(value);
    switch (spec.kind) {
      case ParamKind::integer:
      case ParamKind::number: {
        if (spec.kind == ParamKind::integer && !std::holds_alternative<std::int64_t>(value)) {
          return shown + " is not an integer";
        }
        auto n = numeric_value(value);
        if (!n) return shown + " is not a number";
        if ((spec.min && *n < *spec.min) || (spec.max && *n > *spec.max)) {
          return shown + " out of range";
        }
        break;
      }
      case ParamKind::string:
        if (!std::holds_alternative<std::string>(value)) return shown + " is not a string";
        break;
      case ParamKind::boolean:
        if (!std::holds_alternative<bool>(value)) return shown + " is not a boolean";
        break;
      case ParamKind::enumeration:
        if (!enum_allows(spec, value)) return shown + " is not an allowed value";
        break;
    }
  }
  return std::nullopt;
}

bool verify_capability(const AtomicAction& action, const HomeState& state) {
  const Call& call = require_call(action, "verify_capability");
  const Room* room = state.find_room(call.room);
  if (room == nullptr || !room->devices.contains(call.device)) {
    throw ContractError("verify_capability: device " + call.room + "." + call.device + " absent");
  }
  const Capability* cap = room->devices.at(call.device).find_capability(call.capability);
  return cap != nullptr && !check_params(*cap, call.params);
}

VerificationResult verify_action(const AtomicAction& action, const HomeState& state) {
  VerificationResult r;
  r.action = action;
  const Call* call = as_call(action);
  if (call == nullptr) {
    r.failure_reason = "error_token";
    return r;
  }
  const Room* room = state.find_room(call->room);
  if (room == nullptr) {
    r.failure_reason = "missing_room:" + call->room;
    return r;
  }
  r.level_room = true;
  auto it = room->devices.find(call->device);
  if (it == room->devices.end()) {
    r.failure_reason = "missing_device:" + call->room + "." + call->device;
    return r;
  }
  r.level_device = true;
  const std::string target = call->room + "." + call->device + "." + call->capability;
  const Capability* cap = it->second.find_capability(call->capability);
  if (cap == nullptr) {
    r.failure_reason = "missing_capability:" + target;
    return r;
  }
  if (auto bad = check_params(*cap, call->params)) {
    r.failure_reason = "bad_params:" + target + ":" + *bad;
    return r;
  }
  r.level_capability = true;
  r.passed = true;
  return r;
}

FilterOutcome filter_sequence(const ActionSequence& raw, const HomeState& state) {
  FilterOutcome out;
  out.final.reserve(raw.size());
  out.results.reserve(raw.size());
  for (const auto& action : raw) {
    auto result = verify_action(action, state);
    if (result.passed) {
      out.final.push_back(action);
    } else {
      out.final.emplace_back(ErrorToken{});
      if (const Call* call = as_call(action)) out.error_set.insert(call->device);
    }
    out.results.push_back(std::move(result));
  }
  return out;
}

}  // namespace dsia
