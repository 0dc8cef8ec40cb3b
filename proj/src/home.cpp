#include "dsia/home.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dsia/errors.hpp"
#include "dsia/verifier.hpp"

namespace dsia {

using nlohmann::json;

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::integer: return "integer";
    case ParamKind::number: return "number";
    case ParamKind::string: return "string";
    case ParamKind::boolean: return "boolean";
    case ParamKind::enumeration: return "enum";
  }
  return "string";
}

std::optional<ParamKind> param_kind_from_string(std::string_view text) {
  if (text == "integer") return ParamKind::integer;
  if (text == "number") return ParamKind::number;
  if (text == "string") return ParamKind::string;
  if (text == "boolean") return ParamKind::boolean;
  if (text == "enum") return ParamKind::enumeration;
  return std::nullopt;
}

const Capability* Device::find_capability(std::string_view name) const {
  for (const auto& c : capabilities) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

void validate_capability(const Capability& cap, const Device& device, const std::string& path) {
  if (cap.name.empty()) throw SnapshotError(path + ".name", "capability name is empty");
  std::set<std::string> param_names;
  for (std::size_t i = 0; i < cap.params.size(); ++i) {
    const auto& p = cap.params[i];
    const std::string ppath = path + ".params[" + std::to_string(i) + "]";
    if (p.name.empty()) throw SnapshotError(ppath + ".name", "parameter name is empty");
    if (!param_names.insert(p.name).second) {
      throw SnapshotError(ppath + ".name", "duplicate parameter '" + p.name + "'");
    }
    if (p.kind == ParamKind::enumeration && p.values.empty()) {
      throw SnapshotError(ppath + ".values", "enum parameter needs at least one allowed value");
    }
    if (p.min && p.max && *p.min > *p.max) {
      throw SnapshotError(ppath, "min exceeds max");
    }
  }
  for (const auto& w : cap.writes) {
    if (w.from_param && !param_names.contains(*w.from_param)) {
      throw SnapshotError(path + ".writes." + w.attribute,
                          "writes unknown parameter '" + *w.from_param + "'");
    }
    if (!device.attributes.contains(w.attribute)) {
      throw SnapshotError(path + ".writes." + w.attribute,
                          "writable attribute '" + w.attribute + "' missing from attributes");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SnapshotError(path + "." + key, "missing field");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw SnapshotError(path + "." + key, "expected string");
  return v.get<std::string>();
}

ParamSpec parse_param(const json& doc, const std::string& path) {
  if (!doc.is_object()) throw SnapshotError(path, "expected object");
  ParamSpec p;
  p.name = normalize_identifier(require_string(doc, "name", path));
  const std::string kind = require_string(doc, "kind", path);
  auto parsed = param_kind_from_string(kind);
  if (!parsed) throw SnapshotError(path + ".kind", "unknown parameter kind '" + kind + "'");
  p.kind = *parsed;
  for (const char* bound : {"min", "max"}) {
    if (auto it = doc.find(bound); it != doc.end()) {
      if (!it->is_number()) throw SnapshotError(path + "." + bound, "expected number");
      (std::string_view(bound) == "min" ? p.min : p.max) = it->get<double>();
    }
  }
  if (auto it = doc.find("values"); it != doc.end()) {
    if (!it->is_array()) throw SnapshotError(path + ".values", "expected array");
    p.values.assign(it->begin(), it->end());
  }
  return p;
}

Capability parse_method(const json& doc, const std::string& path) {
  if (!doc.is_object()) throw SnapshotError(path, "expected object");
  Capability cap;
  cap.name = normalize_identifier(require_string(doc, "name", path));
  if (auto it = doc.find("params"); it != doc.end()) {
    if (!it->is_array()) throw SnapshotError(path + ".params", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      cap.params.push_back(parse_param((*it)[i], path + ".params[" + std::to_string(i) + "]"));
    }
  }
  if (auto it = doc.find("writes"); it != doc.end()) {
    if (!it->is_object()) throw SnapshotError(path + ".writes", "expected object");
    for (const auto& [attr, value] : it->items()) {
      WriteRule rule{normalize_identifier(attr), std::nullopt, nullptr};
      if (value.is_string() && value.get<std::string>().rfind("param:", 0) == 0) {
        rule.from_param = normalize_identifier(value.get<std::string>().substr(6));
      } else {
        rule.literal = value;
      }
      cap.writes.push_back(std::move(rule));
    }
  }
  return cap;
}

Device parse_device(const std::string& id, const json& doc, const std::string& path) {
  if (!doc.is_object()) throw SnapshotError(path, "expected object");
  Device device;
  device.id = id;
  device.type = normalize_identifier(require_string(doc, "type", path));
  if (auto it = doc.find("attributes"); it != doc.end()) {
    if (!it->is_object()) throw SnapshotError(path + ".attributes", "expected object");
    for (const auto& [k, v] : it->items()) {
      if (!device.attributes.emplace(normalize_identifier(k), v).second) {
        throw SnapshotError(path + ".attributes." + k, "duplicate attribute");
      }
    }
  }
  if (auto it = doc.find("methods"); it != doc.end()) {
    if (!it->is_array()) throw SnapshotError(path + ".methods", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      device.capabilities.push_back(
          parse_method((*it)[i], path + ".methods[" + std::to_string(i) + "]"));
    }
  }
  return device;
}

json literal_to_json(const Literal& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

std::string render_number(double v) {
  if (std::trunc(v) == v && std::fabs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  return json(v).dump();
}

std::string render_param(const ParamSpec& p) {
  std::string s = p.name + ":" + std::string(to_string(p.kind));
  if (p.kind == ParamKind::enumeration) {
    s += "[";
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      if (i != 0) s += "|";
      s += render_value(p.values[i]);
    }
    s += "]";
  } else if (p.min || p.max) {
    s += "[" + (p.min ? render_number(*p.min) : std::string()) + ".." +
         (p.max ? render_number(*p.max) : std::string()) + "]";
  }
  return s;
}

}  // namespace

HomeState::HomeState(std::string home_id, std::set<std::string> catalog,
                     std::map<std::string, Room> rooms, std::uint64_t version)
    : home_id_(std::move(home_id)),
      catalog_(std::move(catalog)),
      rooms_(std::move(rooms)),
      version_(version) {
  for (const auto& [room_name, room] : rooms_) {
    const std::string rpath = "rooms." + room_name;
    if (room_name.empty() || room_name != normalize_identifier(room_name)) {
      throw SnapshotError(rpath, "room name is not a normalized identifier");
    }
    if (room.name != room_name) throw SnapshotError(rpath, "room name does not match its key");
    for (const auto& [device_id, device] : room.devices) {
      const std::string dpath = rpath + "." + device_id;
      if (device_id.empty() || device.id != device_id) {
        throw SnapshotError(dpath, "device id does not match its key");
      }
      if (!catalog_.contains(device.type)) {
        throw SnapshotError(dpath + ".type", "unknown device type '" + device.type + "'");
      }
      std::set<std::string> names;
      for (std::size_t i = 0; i < device.capabilities.size(); ++i) {
        const auto& cap = device.capabilities[i];
        const std::string cpath = dpath + ".methods[" + std::to_string(i) + "]";
        if (!names.insert(cap.name).second) {
          throw SnapshotError(cpath + ".name", "duplicate capability '" + cap.name + "'");
        }
        validate_capability(cap, device, cpath);
      }
    }
  }
}

std::size_t HomeState::device_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, room] : rooms_) n += room.devices.size();
  return n;
}

const Room* HomeState::find_room(std::string_view name) const {
  auto it = rooms_.find(std::string(name));
  return it == rooms_.end() ? nullptr : &it->second;
}

HomeState load_snapshot(const json& document) {
  if (!document.is_object()) throw SnapshotError("", "snapshot must be a JSON object");
  std::string home_id;
  if (auto it = document.find("home_id"); it != document.end()) {
    if (!it->is_string()) throw SnapshotError("home_id", "expected string");
    home_id = it->get<std::string>();
  }
  std::set<std::string> catalog;
  const json& cat = require(document, "catalog", "");
  if (!cat.is_array()) throw SnapshotError("catalog", "expected array");
  for (std::size_t i = 0; i < cat.size(); ++i) {
    if (!cat[i].is_string()) {
      throw SnapshotError("catalog[" + std::to_string(i) + "]", "expected string");
    }
    catalog.insert(normalize_identifier(cat[i].get<std::string>()));
  }

  std::map<std::string, Room> rooms;
  const json& rooms_doc = require(document, "rooms", "");
  if (!rooms_doc.is_object()) throw SnapshotError("rooms", "expected object");
  for (const auto& [raw_room, room_doc] : rooms_doc.items()) {
    const std::string room_name = normalize_identifier(raw_room);
    const std::string rpath = "rooms." + raw_room;
    if (room_name.empty()) throw SnapshotError(rpath, "empty room name");
    if (!room_doc.is_object()) throw SnapshotError(rpath, "expected object");
    Room room{room_name, {}};
    for (const auto& [raw_device, device_doc] : room_doc.items()) {
      const std::string device_id = normalize_identifier(raw_device);
      const std::string dpath = rpath + "." + raw_device;
      if (device_id.empty()) throw SnapshotError(dpath, "empty device id");
      Device device = parse_device(device_id, device_doc, dpath);
      if (!room.devices.emplace(device_id, std::move(device)).second) {
        throw SnapshotError(dpath, "duplicate device id '" + device_id + "'");
      }
    }
    if (!rooms.emplace(room_name, std::move(room)).second) {
      throw SnapshotError(rpath, "duplicate room '" + room_name + "'");
    }
  }
  return HomeState(std::move(home_id), std::move(catalog), std::move(rooms), 0);
}

HomeState load_snapshot_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SnapshotError("", std::string("invalid JSON: ") + e.what());
  }
  return load_snapshot(doc);
}

HomeState load_snapshot_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SnapshotError("", "cannot open snapshot file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_snapshot_text(ss.str());
}

json to_snapshot_json(const HomeState& state) {
  json rooms = json::object();
  for (const auto& [room_name, room] : state.rooms()) {
    json devices = json::object();
    for (const auto& [id, device] : room.devices) {
      json methods = json::array();
      for (const auto& cap : device.capabilities) {
        json params = json::array();
        for (const auto& p : cap.params) {
          json pj = {{"name", p.name}, {"kind", to_string(p.kind)}};
          if (p.min) pj["min"] = *p.min;
          if (p.max) pj["max"] = *p.max;
          if (!p.values.empty()) pj["values"] = p.values;
          params.push_back(std::move(pj));
        }
        json writes = json::object();
        for (const auto& w : cap.writes) {
          writes[w.attribute] = w.from_param ? json("param:" + *w.from_param) : w.literal;
        }
        methods.push_back({{"name", cap.name}, {"params", params}, {"writes", writes}});
      }
      json attrs = json::object();
      for (const auto& [k, v] : device.attributes) attrs[k] = v;
      devices[id] = {{"type", device.type}, {"attributes", attrs}, {"methods", methods}};
    }
    rooms[room_name] = std::move(devices);
  }
  return {{"home_id", state.home_id()}, {"catalog", state.catalog()}, {"rooms", rooms}};
}

std::optional<Device> lookup_device(const HomeState& state, std::string_view room,
                                    std::string_view device) {
  const Room* r = state.find_room(room);
  if (r == nullptr) return std::nullopt;
  auto it = r->devices.find(std::string(device));
  if (it == r->devices.end()) return std::nullopt;
  return it->second;
}

std::optional<std::vector<Capability>> capabilities_of(const HomeState& state,
                                                       std::string_view room,
                                                       std::string_view device) {
  auto d = lookup_device(state, room, device);
  if (!d) return std::nullopt;
  return d->capabilities;
}

HomeState apply_action(const HomeState& state, const AtomicAction& action) {
  const Call* call = as_call(action);
  if (call == nullptr || !verify_action(action, state).passed) {
    throw ContractError("unverified action: " + render_action(action));
  }
  HomeState next = state;
  Device& device = next.rooms_.at(call->room).devices.at(call->device);
  const Capability& cap = *device.find_capability(call->capability);
  for (const auto& w : cap.writes) {
    if (w.from_param) {
      for (std::size_t i = 0; i < cap.params.size(); ++i) {
        if (cap.params[i].name == *w.from_param) {
          device.attributes[w.attribute] = literal_to_json(canonical_literal(call->params[i]));
        }
      }
    } else {
      device.attributes[w.attribute] = w.literal;
    }
  }
  next.version_ = state.version_ + 1;
  return next;
}

std::string render_value(const AttributeValue& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_float()) return render_number(value.get<double>());
  return value.dump();
}

std::string render_capability(const Capability& capability) {
  std::string s = capability.name + "(";
  for (std::size_t i = 0; i < capability.params.size(); ++i) {
    if (i != 0) s += ", ";
    s += render_param(capability.params[i]);
  }
  return s + ")";
}

namespace {
std::string render_method_list(const Device& device) {
  std::string s = "[";
  for (std::size_t i = 0; i < device.capabilities.size(); ++i) {
    if (i != 0) s += ", ";
    s += render_capability(device.capabilities[i]);
  }
  return s + "]";
}
}  // namespace

std::string render_state_text(const HomeState& state) {
  std::string out;
  for (const auto& [room_name, room] : state.rooms()) {
    for (const auto& [id, device] : room.devices) {
      out += room_name + ": " + id + " (type=" + device.type;
      bool first = true;
      for (const auto& [k, v] : device.attributes) {
        out += first ? "; " : ", ";
        first = false;
        out += k + "=" + render_value(v);
      }
      out += ") methods: " + render_method_list(device) + "\n";
    }
  }
  return out;
}

std::string render_methods_text(const HomeState& state) {
  std::string out;
  for (const auto& [room_name, room] : state.rooms()) {
    for (const auto& [id, device] : room.devices) {
      out += room_name + "." + id + ": " + render_method_list(device) + "\n";
    }
  }
  return out;
}

}  // namespace dsia
