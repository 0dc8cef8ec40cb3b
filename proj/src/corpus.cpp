#include "dsia/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <set>

#include "dsia/catalog.hpp"
#include "dsia/errors.hpp"

namespace dsia::bench {

using nlohmann::json;

std::map<Category, int> category_counts(const CorpusParams& params) {
  if (params.n_tasks < 0) throw CorpusError("n_tasks must be >= 0");
  double sum = 0;
  for (const auto& [c, share] : params.mix) {
    if (share < 0) throw CorpusError("mix share for " + std::string(to_string(c)) + " is negative");
    sum += share;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw CorpusError("mix must sum to 1 (got " + std::to_string(sum) + ")");

  std::map<Category, int> counts;
  std::vector<std::pair<double, Category>> remainders;
  int assigned = 0;
  for (const auto& [c, share] : params.mix) {
    const double exact = share / sum * params.n_tasks;
    const int base = static_cast<int>(std::floor(exact + 1e-9));
    counts[c] = base;
    assigned += base;
    remainders.emplace_back(exact - base, c);
  }
  // Largest remainder first; ties go to the earlier category.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < params.n_tasks; ++i, ++assigned) {
    ++counts[remainders[i % remainders.size()].second];
  }
  return counts;
}

std::map<Category, double> parse_mix(std::string_view text) {
  std::map<Category, double> mix;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view field = text.substr(pos, comma - pos);
    pos = comma + 1;
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    if (field.empty()) continue;
    const std::size_t eq = field.find('=');
    if (eq == std::string_view::npos) throw CorpusError("mix entry '" + std::string(field) + "' needs CAT=share");
    auto category = category_from_string(field.substr(0, eq));
    if (!category) throw CorpusError("unknown category '" + std::string(field.substr(0, eq)) + "'");
    const std::string value(field.substr(eq + 1));
    double share = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), share);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      throw CorpusError("bad mix share '" + value + "'");
    }
    mix[*category] = share;
  }
  return mix;
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }
  bool coin() { return (engine_() & 1U) != 0; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

std::string words(std::string id) {
  std::replace(id.begin(), id.end(), '_', ' ');
  return id;
}

json all_types_json() {
  json out = json::array();
  for (const auto& t : catalog::device_types()) out.push_back(t);
  return out;
}

json device_json(const catalog::DeviceTemplate& t, Rng& rng) {
  json attrs = t.attributes;
  if (attrs.contains("power")) attrs["power"] = rng.coin() ? "ON" : "OFF";
  if (attrs.contains("lock_state")) attrs["lock_state"] = rng.coin() ? "LOCKED" : "UNLOCKED";
  return {{"type", t.type}, {"attributes", attrs}, {"methods", t.methods}};
}

std::vector<Literal> random_args(const json& method, Rng& rng) {
  std::vector<Literal> args;
  for (const auto& p : method["params"]) {
    const std::string kind = p["kind"];
    if (kind == "integer" || kind == "number") {
      args.emplace_back(static_cast<std::int64_t>(rng.between(p["min"].get<int>(), p["max"].get<int>())));
    } else if (kind == "enum") {
      args.emplace_back(rng.pick(p["values"].get<std::vector<std::string>>()));
    } else if (kind == "boolean") {
      args.emplace_back(rng.coin());
    } else {
      args.emplace_back(std::string("auto"));
    }
  }
  return args;
}

// A concrete sub-instruction: the phrase, the intent op and its gold atom.
struct Step {
  std::string phrase;
  json op;
  AtomicAction gold;
};

std::string phrase_for(const std::string& method, const std::vector<Literal>& args,
                       const std::string& device, const std::string& room) {
  const std::string target = "the " + words(device) + (room.empty() ? "" : " in the " + words(room));
  if (method == "turn_on") return "turn on " + target;
  if (method == "turn_off") return "turn off " + target;
  if (method.rfind("set_", 0) == 0 && args.size() == 1) {
    return "set the " + words(method.substr(4)) + " of " + target + " to " + render_literal(args[0]);
  }
  std::string out = words(method) + " " + target;
  if (!args.empty()) {
    out += " with";
    for (const auto& a : args) out += " " + render_literal(a);
  }
  return out;
}

Step explicit_step(const std::string& room, const std::string& device, const json& method, Rng& rng,
                   bool valid) {
  Step step;
  const std::string name = method["name"];
  std::vector<Literal> args = random_args(method, rng);
  step.phrase = phrase_for(name, args, device, room);
  json jargs = json::array();
  for (const auto& a : args) std::visit([&](const auto& v) { jargs.push_back(v); }, a);
  step.op = {{"room", room}, {"device", device}, {"method", name}, {"args", jargs}};
  if (valid) {
    step.gold = Call{room, device, name, std::move(args)};
  } else {
    step.gold = ErrorToken{};
  }
  return step;
}

struct GeneratedHome {
  std::string id;
  json snapshot;
};

const json& methods_of(const json& snapshot, const std::string& room, const std::string& device) {
  return snapshot["rooms"][room][device]["methods"];
}

Step valid_step(const GeneratedHome& home, Rng& rng, std::set<std::string>* used) {
  std::vector<std::tuple<std::string, std::string, std::size_t>> choices;
  for (const auto& [room, devices] : home.snapshot["rooms"].items()) {
    for (const auto& [device, doc] : devices.items()) {
      for (std::size_t m = 0; m < doc["methods"].size(); ++m) {
        const std::string key = room + "." + device + "." + doc["methods"][m]["name"].get<std::string>();
        if (used == nullptr || !used->contains(key)) choices.emplace_back(room, device, m);
      }
    }
  }
  if (choices.empty()) throw CorpusError("home " + home.id + " has too few device methods");
  const auto& [room, device, m] = rng.pick(choices);
  const json& method = methods_of(home.snapshot, room, device)[m];
  if (used != nullptr) used->insert(room + "." + device + "." + method["name"].get<std::string>());
  return explicit_step(room, device, method, rng, true);
}

Step invalid_step(const GeneratedHome& home, Rng& rng) {
  const json& rooms = home.snapshot["rooms"];
  const auto& templates = catalog::device_templates();

  std::vector<std::string> absent_rooms;
  for (const auto& r : catalog::room_names()) {
    if (!rooms.contains(r)) absent_rooms.push_back(r);
  }
  std::vector<std::pair<std::string, std::string>> absent_devices;  // room, type
  std::vector<std::tuple<std::string, std::string, const json*>> absent_methods;
  for (const auto& [room, devices] : rooms.items()) {
    for (const auto& t : templates) {
      if (!devices.contains(t.type)) absent_devices.emplace_back(room, t.type);
    }
    for (const auto& [device, doc] : devices.items()) {
      std::set<std::string> have;
      for (const auto& m : doc["methods"]) have.insert(m["name"].get<std::string>());
      std::set<std::string> seen;
      for (const auto& t : templates) {
        for (const auto& m : t.methods) {
          const std::string name = m["name"];
          if (have.contains(name) || !seen.insert(name).second) continue;
          absent_methods.emplace_back(room, device, &m);
        }
      }
    }
  }

  std::vector<int> kinds;
  if (!absent_rooms.empty()) kinds.push_back(0);
  if (!absent_devices.empty()) kinds.push_back(1);
  if (!absent_methods.empty()) kinds.push_back(2);
  if (kinds.empty()) throw CorpusError("home " + home.id + " leaves nothing absent to reference");

  switch (rng.pick(kinds)) {
    case 0: {
      const auto& t = templates[rng.below(templates.size())];
      return explicit_step(rng.pick(absent_rooms), t.type, t.methods[rng.below(t.methods.size())], rng,
                           false);
    }
    case 1: {
      const auto& [room, type] = rng.pick(absent_devices);
      const auto* t = catalog::find_template(type);
      return explicit_step(room, type, t->methods[rng.below(t->methods.size())], rng, false);
    }
    default: {
      const auto& [room, device, method] = rng.pick(absent_methods);
      return explicit_step(room, device, *method, rng, false);
    }
  }
}

std::string join_phrases(const std::vector<Step>& steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i != 0) out += i + 1 == steps.size() ? " and " : ", ";
    out += steps[i].phrase;
  }
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + ".";
}

std::string intent_instruction(const std::string& text, const std::vector<Step>& steps) {
  json ops = json::array();
  for (const auto& s : steps) ops.push_back(s.op);
  return embed_intent(text, {{"ops", ops}});
}

GeneratedHome make_home(const std::string& id, const CorpusParams& params, Rng& rng) {
  std::vector<std::string> rooms = catalog::room_names();
  rng.shuffle(rooms);
  rooms.resize(static_cast<std::size_t>(rng.between(params.rooms_min, params.rooms_max)));
  json rooms_doc = json::object();
  for (const auto& room : rooms) {
    std::vector<std::size_t> types(catalog::device_templates().size());
    for (std::size_t i = 0; i < types.size(); ++i) types[i] = i;
    rng.shuffle(types);
    types.resize(static_cast<std::size_t>(rng.between(params.devices_min, params.devices_max)));
    json devices = json::object();
    for (std::size_t t : types) {
      const auto& tmpl = catalog::device_templates()[t];
      devices[tmpl.type] = device_json(tmpl, rng);
    }
    rooms_doc[room] = std::move(devices);
  }
  return {id, {{"home_id", id}, {"catalog", all_types_json()}, {"rooms", rooms_doc}}};
}

const std::vector<std::string>& interactive_types() {
  static const std::vector<std::string> types = {"lamp", "light", "fan", "speaker"};
  return types;
}

// Two same-type devices, either side by side in one room or one each in two
// rooms. The instruction names only the type.
std::pair<GeneratedHome, TaskRecord> interactive_task(const std::string& task_id, Rng& rng) {
  const std::string type = rng.pick(interactive_types());
  const auto* tmpl = catalog::find_template(type);
  const bool same_room = rng.coin();
  const bool requires_clarification = rng.coin();

  struct Slot {
    std::string room;
    std::string id;
    std::string answer;
  };
  std::vector<Slot> slots;
  if (same_room) {
    slots = {{"bedroom", type + "_a", words(type) + " A, please."},
             {"bedroom", type + "_b", words(type) + " B, please."}};
  } else {
    slots = {{"bedroom", type, "The one in the bedroom."},
             {"living_room", type, "The one in the living room."}};
  }

  json rooms = {{"bedroom", json::object()}, {"living_room", json::object()}, {"kitchen", json::object()}};
  rooms["kitchen"]["fridge"] = device_json(*catalog::find_template("fridge"), rng);
  rooms["living_room"]["tv"] = device_json(*catalog::find_template("tv"), rng);

  const std::size_t target = rng.below(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    json dev = device_json(*tmpl, rng);
    const bool off = requires_clarification || i == target;
    dev["attributes"]["power"] = off ? "OFF" : "ON";
    rooms[slots[i].room][slots[i].id] = std::move(dev);
  }

  GeneratedHome home{"ihome_" + task_id, {}};
  home.snapshot = {{"home_id", home.id}, {"catalog", all_types_json()}, {"rooms", rooms}};

  const Slot& chosen = slots[target];
  const std::string gold = render_sequence({Call{chosen.room, chosen.id, "turn_on", {}}});
  const json op = {{"type", type}, {"method", "turn_on"}, {"args", json::array()}, {"effect", {{"power", "ON"}}}};

  TaskRecord task;
  task.task_id = task_id;
  task.home_id = home.id;
  task.instruction = embed_intent("Turn on the " + words(type) + ".", {{"ops", json::array({op})}});
  task.category = Category::INTERACTIVE;
  task.gold = gold;
  Interaction interaction;
  interaction.requires_clarification = requires_clarification;
  if (requires_clarification) {
    interaction.simulated_answer = chosen.answer;
    interaction.gold_after_answer = gold;
  }
  task.interaction = std::move(interaction);
  return {std::move(home), std::move(task)};
}

void check_params(const CorpusParams& p, const std::map<Category, int>& counts) {
  const int n_rooms = static_cast<int>(catalog::room_names().size());
  const int n_types = static_cast<int>(catalog::device_templates().size());
  if (p.rooms_min < 1 || p.rooms_min > p.rooms_max || p.rooms_max > n_rooms) {
    throw CorpusError("rooms range must satisfy 1 <= min <= max <= " + std::to_string(n_rooms));
  }
  if (p.devices_min < 1 || p.devices_min > p.devices_max || p.devices_max > n_types) {
    throw CorpusError("devices range must satisfy 1 <= min <= max <= " + std::to_string(n_types));
  }
  int needs_home = 0;
  for (const auto& [c, n] : counts) {
    if (c != Category::INTERACTIVE) needs_home += n;
  }
  if (needs_home > 0 && p.n_homes < 1) throw CorpusError("n_homes must be >= 1");
}

}  // namespace

Dataset generate_corpus(const CorpusParams& params) {
  const std::map<Category, int> counts = category_counts(params);
  check_params(params, counts);
  Rng rng(params.seed);

  std::vector<GeneratedHome> homes;
  for (int h = 0; h < params.n_homes; ++h) {
    homes.push_back(make_home("home_" + std::to_string(h), params, rng));
  }

  std::vector<Category> order;
  for (const auto& [c, n] : counts) order.insert(order.end(), static_cast<std::size_t>(n), c);
  rng.shuffle(order);

  std::vector<GeneratedHome> extra_homes;
  Dataset dataset;
  const int width = static_cast<int>(std::to_string(std::max<std::size_t>(order.size(), 1)).size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::string task_id = std::to_string(i);
    task_id = "t" + std::string(static_cast<std::size_t>(width) - task_id.size(), '0') + task_id;
    const Category category = order[i];

    if (category == Category::INTERACTIVE) {
      auto [home, task] = interactive_task(task_id, rng);
      extra_homes.push_back(std::move(home));
      dataset.tasks.push_back(std::move(task));
      continue;
    }

    const GeneratedHome& home = homes[rng.below(homes.size())];
    std::vector<Step> steps;
    std::set<std::string> used;
    switch (category) {
      case Category::VS: steps.push_back(valid_step(home, rng, nullptr)); break;
      case Category::IS: steps.push_back(invalid_step(home, rng)); break;
      case Category::VM: {
        const int n = rng.between(2, 3);
        for (int k = 0; k < n; ++k) steps.push_back(valid_step(home, rng, &used));
        break;
      }
      case Category::IM:
        steps.push_back(invalid_step(home, rng));
        steps.push_back(invalid_step(home, rng));
        break;
      case Category::MM:
        steps.push_back(valid_step(home, rng, nullptr));
        steps.push_back(invalid_step(home, rng));
        if (rng.coin()) std::swap(steps[0], steps[1]);
        break;
      case Category::INTERACTIVE: break;
    }

    TaskRecord task;
    task.task_id = task_id;
    task.home_id = home.id;
    task.category = category;
    task.instruction = intent_instruction(join_phrases(steps), steps);
    if (is_invalid(category)) {
      task.gold = render_sequence({ErrorToken{}});
    } else {
      ActionSequence gold;
      for (const auto& s : steps) gold.push_back(s.gold);
      task.gold = render_sequence(gold);
    }
    dataset.tasks.push_back(std::move(task));
  }

  for (auto* list : {&homes, &extra_homes}) {
    for (const auto& h : *list) {
      try {
        dataset.homes.emplace(h.id, load_snapshot(h.snapshot));
      } catch (const SnapshotError& e) {
        throw CorpusError("generated home " + h.id + " is invalid: " + e.what());
      }
    }
  }
  return dataset;
}

}  // namespace dsia::bench
