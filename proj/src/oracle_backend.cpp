#include "dsia/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <random>

#include "dsia/catalog.hpp"
#include "dsia/errors.hpp"
#include "dsia/generator.hpp"
#include "dsia/router.hpp"
#include "dsia/verifier.hpp"

namespace dsia::oracle {

using nlohmann::json;

namespace {

constexpr std::string_view kIntentOpen = "<!--dsia:";
constexpr std::string_view kIntentClose = "-->";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits on `sep` outside (), [] nesting.
std::vector<std::string_view> split_nested(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[') ++depth;
    else if (c == ')' || c == ']') --depth;
    else if (depth == 0 && s.substr(i, sep.size()) == sep) {
      out.push_back(s.substr(begin, i - begin));
      begin = i + sep.size();
      i += sep.size() - 1;
    }
  }
  if (begin <= s.size()) out.push_back(s.substr(begin));
  return out;
}

AttributeValue read_value(std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  json n = json::parse(text, nullptr, false);
  if (!n.is_discarded() && n.is_number()) return n;
  return std::string(text);
}

ParamSpec read_param(std::string_view text) {
  ParamSpec p;
  const std::size_t colon = text.find(':');
  if (colon == std::string_view::npos) throw BackendError("bad parameter '" + std::string(text) + "'");
  p.name = std::string(text.substr(0, colon));
  std::string_view rest = text.substr(colon + 1);
  const std::size_t bracket = rest.find('[');
  const std::string_view kind = rest.substr(0, bracket);
  auto parsed = param_kind_from_string(kind);
  if (!parsed) throw BackendError("bad parameter kind '" + std::string(kind) + "'");
  p.kind = *parsed;
  if (bracket != std::string_view::npos) {
    std::string_view inner = rest.substr(bracket + 1);
    if (!inner.empty() && inner.back() == ']') inner.remove_suffix(1);
    if (p.kind == ParamKind::enumeration) {
      for (auto v : split_nested(inner, "|")) p.values.push_back(read_value(v));
    } else if (const std::size_t dots = inner.find(".."); dots != std::string_view::npos) {
      auto lo = inner.substr(0, dots);
      auto hi = inner.substr(dots + 2);
      if (!lo.empty()) p.min = read_value(lo).get<double>();
      if (!hi.empty()) p.max = read_value(hi).get<double>();
    }
  }
  return p;
}

Capability read_method(std::string_view text) {
  const std::size_t open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    throw BackendError("bad method '" + std::string(text) + "'");
  }
  Capability cap;
  cap.name = std::string(text.substr(0, open));
  const std::string_view params = trim(text.substr(open + 1, text.size() - open - 2));
  if (!params.empty()) {
    for (auto p : split_nested(params, ", ")) cap.params.push_back(read_param(trim(p)));
  }
  return cap;
}

std::string mention_form(std::string_view text) {
  std::string out = "_";
  for (char c : strip_intent(text)) {
    const auto uc = static_cast<unsigned char>(c);
    out.push_back(std::isalnum(uc) != 0 ? static_cast<char>(std::tolower(uc)) : '_');
  }
  out.push_back('_');
  std::string collapsed;
  for (char c : out) {
    if (c == '_' && !collapsed.empty() && collapsed.back() == '_') continue;
    collapsed.push_back(c);
  }
  return collapsed;
}

bool mentions(const std::string& haystack, const std::string& id) {
  return haystack.find("_" + id + "_") != std::string::npos;
}

std::vector<Literal> literals_from_json(const json& doc) {
  std::vector<Literal> out;
  if (!doc.is_array()) return out;
  for (const auto& v : doc) {
    if (v.is_boolean()) out.emplace_back(v.get<bool>());
    else if (v.is_number_integer()) out.emplace_back(v.get<std::int64_t>());
    else if (v.is_number()) out.emplace_back(v.get<double>());
    else if (v.is_string()) out.emplace_back(v.get<std::string>());
    else throw BackendError("malformed embedded intent: bad argument");
  }
  return out;
}

std::string_view block_between(std::string_view text, std::string_view open, std::string_view close) {
  const std::size_t a = text.find(open);
  if (a == std::string_view::npos) return {};
  const std::size_t b = text.find(close, a + open.size());
  if (b == std::string_view::npos) return {};
  return text.substr(a + open.size(), b - a - open.size());
}

std::string qualified(const std::string& room, const std::string& device) {
  return room + "." + device;
}

}  // namespace

HomeState read_state_text(std::string_view text) {
  std::set<std::string> catalog;
  std::map<std::string, Room> rooms;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;

    const std::size_t colon = line.find(": ");
    const std::size_t type_at = line.find(" (type=");
    const std::size_t methods_at = line.rfind(") methods: [");
    if (colon == std::string_view::npos || type_at == std::string_view::npos ||
        methods_at == std::string_view::npos || line.back() != ']' || colon > type_at) {
      continue;
    }
    Device device;
    const std::string room_name(line.substr(0, colon));
    device.id = std::string(line.substr(colon + 2, type_at - colon - 2));
    std::string_view inside = line.substr(type_at + 7, methods_at - type_at - 7);
    const std::size_t semi = inside.find("; ");
    device.type = std::string(inside.substr(0, semi));
    if (semi != std::string_view::npos) {
      for (auto kv : split_nested(inside.substr(semi + 2), ", ")) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string_view::npos) continue;
        device.attributes[std::string(kv.substr(0, eq))] = read_value(kv.substr(eq + 1));
      }
    }
    std::string_view methods = line.substr(methods_at + 12);
    methods.remove_suffix(1);
    if (!trim(methods).empty()) {
      for (auto m : split_nested(methods, ", ")) device.capabilities.push_back(read_method(trim(m)));
    }
    catalog.insert(device.type);
    Room& room = rooms[room_name];
    room.name = room_name;
    const std::string id = device.id;
    room.devices.emplace(id, std::move(device));
  }
  try {
    return HomeState("oracle_view", std::move(catalog), std::move(rooms), 0);
  } catch (const SnapshotError& e) {
    throw BackendError(std::string("unreadable state block: ") + e.what());
  }
}

json to_json(const IntentOp& op) {
  json doc = {{"method", op.method}};
  if (op.room) doc["room"] = *op.room;
  if (op.device) doc["device"] = *op.device;
  if (op.type) doc["type"] = *op.type;
  json args = json::array();
  for (const auto& a : op.args) args.push_back(std::visit([](const auto& v) { return json(v); }, a));
  doc["args"] = std::move(args);
  if (!op.effect.empty()) doc["effect"] = op.effect;
  return doc;
}

IntentOp op_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("method") || !doc["method"].is_string()) {
    throw BackendError("malformed embedded intent: operation needs a method");
  }
  IntentOp op;
  op.method = doc["method"].get<std::string>();
  for (const char* key : {"room", "device", "type"}) {
    if (auto it = doc.find(key); it != doc.end() && it->is_string()) {
      std::optional<std::string>& slot = std::string_view(key) == "room"     ? op.room
                                         : std::string_view(key) == "device" ? op.device
                                                                             : op.type;
      slot = it->get<std::string>();
    }
  }
  if (auto it = doc.find("args"); it != doc.end()) op.args = literals_from_json(*it);
  if (auto it = doc.find("effect"); it != doc.end() && it->is_object()) op.effect = *it;
  if (!op.device && !op.type) throw BackendError("malformed embedded intent: no device or type");
  return op;
}

EmbeddedIntent read_intent(std::string_view prompt) {
  EmbeddedIntent intent;
  bool have_ops = false;
  for (std::size_t open = prompt.find(kIntentOpen); open != std::string_view::npos;
       open = prompt.find(kIntentOpen, open + 1)) {
    const std::size_t body = open + kIntentOpen.size();
    const std::size_t close = prompt.find(kIntentClose, body);
    if (close == std::string_view::npos) throw BackendError("malformed embedded intent: unterminated");
    json doc = json::parse(prompt.substr(body, close - body), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw BackendError("malformed embedded intent: bad JSON");
    if (auto ops = doc.find("ops"); ops != doc.end() && !have_ops) {
      if (!ops->is_array()) throw BackendError("malformed embedded intent: ops is not an array");
      for (const auto& op : *ops) intent.ops.push_back(op_from_json(op));
      have_ops = true;
    }
    if (auto pick = doc.find("pick"); pick != doc.end() && pick->is_string()) {
      intent.picks.push_back(pick->get<std::string>());
    }
  }
  if (!have_ops) throw BackendError("malformed embedded intent: none found in prompt");

  for (std::size_t at = prompt.find(kClarifiedPrefix); at != std::string_view::npos;
       at = prompt.find(kClarifiedPrefix, at + 1)) {
    const std::size_t begin = at + kClarifiedPrefix.size();
    const std::size_t end = prompt.find('\n', begin);
    intent.clarifications.push_back(std::string(prompt.substr(begin, end - begin)));
  }
  return intent;
}

ResolvedOp resolve(const IntentOp& op, const HomeState& state, const EmbeddedIntent& context) {
  ResolvedOp out;
  out.device_type = op.type.value_or(op.device.value_or(""));

  auto ground_explicit = [&](const std::string& room, const std::string& device) {
    Call call{room, device, op.method, op.args};
    const VerificationResult check = verify_action(call, state);
    out.call = call;
    out.resolution = check.passed ? Resolution::grounded : Resolution::ungrounded;
    out.reason = check.passed ? render_action(call) + " is executable"
                              : render_action(call) + " is not executable (" +
                                    check.failure_reason.value_or("") + ")";
    return out;
  };

  if (op.room && op.device) return ground_explicit(*op.room, *op.device);

  // Underspecified reference: collect every capable device that matches.
  std::vector<std::pair<std::string, const Device*>> candidates;
  for (const auto& [room_name, room] : state.rooms()) {
    if (op.room && *op.room != room_name) continue;
    for (const auto& [id, device] : room.devices) {
      if (op.device ? id != *op.device : device.type != *op.type) continue;
      const Capability* cap = device.find_capability(op.method);
      if (cap == nullptr || check_params(*cap, op.args)) continue;
      candidates.emplace_back(room_name, &device);
    }
  }

  for (const auto& pick : context.picks) {
    const std::size_t dot = pick.find('.');
    if (dot != std::string::npos) return ground_explicit(pick.substr(0, dot), pick.substr(dot + 1));
  }

  for (const auto& answer : context.clarifications) {
    const std::string text = mention_form(answer);
    std::vector<std::pair<std::string, const Device*>> by_room;
    std::vector<std::pair<std::string, const Device*>> by_device;
    std::vector<std::pair<std::string, const Device*>> by_both;
    for (const auto& c : candidates) {
      const bool r = mentions(text, c.first);
      const bool d = mentions(text, c.second->id);
      if (r) by_room.push_back(c);
      if (d) by_device.push_back(c);
      if (r && d) by_both.push_back(c);
    }
    for (auto* narrowed : {&by_both, &by_room, &by_device}) {
      if (narrowed->size() == 1) {
        candidates = *narrowed;
        break;
      }
    }
  }

  const std::string where = op.room ? "in " + *op.room : "in the home";
  if (candidates.empty()) {
    out.resolution = Resolution::ungrounded;
    out.reason = "no " + out.device_type + " " + where + " supports " + op.method;
    return out;
  }
  auto resolved = [&](const std::pair<std::string, const Device*>& c) {
    out.resolution = Resolution::grounded;
    out.call = Call{c.first, c.second->id, op.method, op.args};
    out.reason = render_action(*out.call) + " is executable";
    return out;
  };
  if (candidates.size() == 1) return resolved(candidates.front());

  std::vector<std::pair<std::string, const Device*>> effective;
  for (const auto& c : candidates) {
    bool changes = false;
    for (const auto& [attr, value] : op.effect.items()) {
      auto it = c.second->attributes.find(attr);
      if (it == c.second->attributes.end() || it->second != value) changes = true;
    }
    if (changes) effective.push_back(c);
  }
  if (effective.size() == 1) return resolved(effective.front());

  const auto& listed = effective.empty() ? candidates : effective;
  out.resolution = Resolution::ambiguous;
  for (const auto& c : listed) out.candidates.push_back(qualified(c.first, c.second->id));
  out.reason = "several " + out.device_type + " devices " + where + " match";
  return out;
}

std::string answer_stage1(const HomeState& state, const EmbeddedIntent& intent) {
  json ops = json::array();
  bool all_valid = true;
  for (const auto& op : intent.ops) {
    const ResolvedOp r = resolve(op, state, intent);
    json verdict;
    verdict["description"] = r.call ? render_action(*r.call) : op.method + " " + r.device_type;
    verdict["valid"] = r.resolution != Resolution::ungrounded;
    verdict["reason"] = r.reason;
    if (r.resolution == Resolution::ambiguous) {
      verdict["ambiguous"] = true;
      verdict["device_type"] = r.device_type;
      verdict["candidates"] = r.candidates;
    }
    all_valid = all_valid && r.resolution == Resolution::grounded;
    ops.push_back(std::move(verdict));
  }
  return json{{"operations", ops}, {"all_valid", all_valid && !ops.empty()}}.dump();
}

ActionSequence draft_stage2(const HomeState& state, const EmbeddedIntent& intent) {
  ActionSequence out;
  for (const auto& op : intent.ops) {
    const ResolvedOp r = resolve(op, state, intent);
    if (r.resolution != Resolution::ambiguous && r.call) {
      out.push_back(*r.call);
    } else {
      out.emplace_back(ErrorToken{});
    }
  }
  return out;
}

namespace {

enum class PromptStage { stage1, stage2 };

PromptStage detect_stage(std::string_view prompt) {
  if (prompt.starts_with(kStage1Role)) return PromptStage::stage1;
  if (prompt.starts_with(kStage2Role)) return PromptStage::stage2;
  throw BackendError("oracle: prompt is neither a stage-1 nor a stage-2 prompt");
}

HomeState state_from_prompt(std::string_view prompt) {
  return read_state_text(block_between(prompt, "<home_state>\n", "</home_state>"));
}

}  // namespace

CompletionResult RuleOracleBackend::complete(std::string_view prompt) {
  const PromptStage stage = detect_stage(prompt);
  const HomeState state = state_from_prompt(prompt);
  const EmbeddedIntent intent = read_intent(prompt);
  std::string text = stage == PromptStage::stage1 ? answer_stage1(state, intent)
                                                  : render_sequence(draft_stage2(state, intent));
  TokenUsage usage = approximate_usage(prompt, text);
  return {std::move(text), usage};
}

namespace {

// Deterministic uniform draws per (seed, prompt, atom index).
class AtomRng {
 public:
  AtomRng(std::uint64_t seed, std::string_view prompt_hash, std::size_t index) {
    std::vector<std::uint32_t> material = {static_cast<std::uint32_t>(seed),
                                           static_cast<std::uint32_t>(seed >> 32),
                                           static_cast<std::uint32_t>(index)};
    for (std::size_t i = 0; i + 8 <= prompt_hash.size() && i < 32; i += 8) {
      material.push_back(static_cast<std::uint32_t>(
          std::stoul(std::string(prompt_hash.substr(i, 8)), nullptr, 16)));
    }
    std::seed_seq seq(material.begin(), material.end());
    engine_.seed(seq);
  }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

std::set<std::string> device_ids(const HomeState& state) {
  std::set<std::string> ids;
  for (const auto& [_, room] : state.rooms()) {
    for (const auto& [id, __] : room.devices) ids.insert(id);
  }
  return ids;
}

template <typename Pred>
std::string pick_absent(const std::vector<std::string>& pool, Pred present, AtomRng& rng,
                        const std::string& fallback) {
  std::vector<std::string> absent;
  for (const auto& name : pool) {
    if (!present(name)) absent.push_back(name);
  }
  if (absent.empty()) return fallback;
  return absent[rng.below(absent.size())];
}

Call hallucinate(const Call& call, const HomeState& state, NoiseTarget target, AtomRng& rng) {
  Call out = call;
  switch (target) {
    case NoiseTarget::device: {
      const auto ids = device_ids(state);
      out.device = pick_absent(catalog::device_types(),
                               [&](const std::string& n) { return ids.contains(n); }, rng,
                               call.device + "_ghost");
      break;
    }
    case NoiseTarget::room:
      out.room = pick_absent(catalog::room_names(),
                             [&](const std::string& n) { return state.find_room(n) != nullptr; },
                             rng, call.room + "_ghost");
      break;
    case NoiseTarget::capability: {
      const Device& device = state.rooms().at(call.room).devices.at(call.device);
      std::vector<std::string> names;
      for (const auto& t : catalog::device_templates()) {
        for (const auto& m : t.methods) names.push_back(m["name"].get<std::string>());
      }
      std::sort(names.begin(), names.end());
      names.erase(std::unique(names.begin(), names.end()), names.end());
      out.capability = pick_absent(
          names, [&](const std::string& n) { return device.find_capability(n) != nullptr; }, rng,
          call.capability + "_ghost");
      break;
    }
  }
  return out;
}

// Snaps an unexecutable call onto the nearest device that can run it:
// same device id elsewhere, then the named room, then anywhere.
std::optional<Call> force_ground(const Call& call, const HomeState& state) {
  std::optional<Call> same_id;
  std::optional<Call> same_room;
  std::optional<Call> anywhere;
  for (const auto& [room_name, room] : state.rooms()) {
    for (const auto& [id, device] : room.devices) {
      const Capability* cap = device.find_capability(call.capability);
      if (cap == nullptr || check_params(*cap, call.params)) continue;
      Call candidate{room_name, id, call.capability, call.params};
      if (id == call.device && !same_id) same_id = candidate;
      if (room_name == call.room && !same_room) same_room = candidate;
      if (!anywhere) anywhere = candidate;
    }
  }
  if (same_id) return same_id;
  if (same_room) return same_room;
  return anywhere;
}

}  // namespace

ActionSequence NoisyOracleBackend::perturb(const ActionSequence& draft, const HomeState& state,
                                           std::string_view prompt, std::size_t* mutated) const {
  const std::string hash = prompt_digest(prompt);
  ActionSequence out = draft;
  std::size_t count = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Call* call = as_call(out[i]);
    if (call == nullptr) continue;
    AtomRng rng(config_.seed, hash, i);
    if (rng.uniform() >= config_.rate) continue;
    if (verify_action(*call, state).passed) {
      out[i] = hallucinate(*call, state, config_.target, rng);
      ++count;
    } else if (config_.forced_grounding) {
      if (auto grounded = force_ground(*call, state)) {
        out[i] = *grounded;
        ++count;
      }
    }
  }
  if (mutated != nullptr) *mutated = count;
  return out;
}

CompletionResult NoisyOracleBackend::complete(std::string_view prompt) {
  const PromptStage stage = detect_stage(prompt);
  const HomeState state = state_from_prompt(prompt);
  const EmbeddedIntent intent = read_intent(prompt);
  std::string text;
  if (stage == PromptStage::stage1) {
    text = answer_stage1(state, intent);
  } else {
    text = render_sequence(perturb(draft_stage2(state, intent), state, prompt));
  }
  TokenUsage usage = approximate_usage(prompt, text);
  return {std::move(text), usage};
}

}  // namespace dsia::oracle
