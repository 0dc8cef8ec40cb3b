#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsia/action.hpp"
#include "dsia/backend.hpp"
#include "dsia/home.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(DSIA_TEST_DATA) / name;
}

inline dsia::HomeState fixture(const std::string& name) {
  return dsia::load_snapshot_file(data_path(name + ".json"));
}

inline std::string with_intent(const std::string& text, const nlohmann::json& ops) {
  return dsia::embed_intent(text, {{"ops", ops}});
}

inline const std::string kRunningInstruction =
    "Turn on the bedroom reading lamp, set the kitchen dehumidifier to 50%, and lock the front door.";

inline std::string running_instruction() {
  return with_intent(kRunningInstruction,
                     nlohmann::json::array({
                         {{"room", "bedroom"}, {"device", "reading_lamp"}, {"method", "turn_on"}, {"args", nlohmann::json::array()}},
                         {{"room", "kitchen"}, {"device", "dehumidifier"}, {"method", "set_humidity"}, {"args", {50}}},
                         {{"room", "entrance"}, {"device", "smart_lock"}, {"method", "lock"}, {"args", nlohmann::json::array()}},
                     }));
}

inline std::string store_room_instruction() {
  return with_intent("Set the intensity of the dehumidifiers to 0 in the store room.",
                     nlohmann::json::array({{{"room", "store_room"},
                                             {"device", "dehumidifiers"},
                                             {"method", "set_intensity"},
                                             {"args", {0}}}}));
}

inline std::string lamp_instruction() {
  return with_intent("Turn on the lamp.", nlohmann::json::array({{{"type", "lamp"},
                                                                  {"method", "turn_on"},
                                                                  {"args", nlohmann::json::array()},
                                                                  {"effect", {{"power", "ON"}}}}}));
}

// Small vocabulary so random actions hit present and absent names alike.
inline const std::vector<std::string> kRooms = {"kitchen", "bedroom", "garage", "attic", "hall"};
inline const std::vector<std::string> kDevices = {"lamp", "fan", "oven", "lock", "tv"};
inline const std::vector<std::string> kMethods = {"turn_on", "turn_off", "set_level", "lock", "set_mode"};

template <typename Rng>
std::size_t below(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

// Random home over the small vocabulary. Each device gets a random subset of
// methods; set_level takes an integer 0..10 and set_mode an enum.
template <typename Rng>
nlohmann::json random_home_doc(Rng& rng) {
  using nlohmann::json;
  json rooms = json::object();
  for (const auto& room : kRooms) {
    if (below(rng, 3) == 0) continue;
    json devices = json::object();
    for (const auto& device : kDevices) {
      if (below(rng, 2) == 0) continue;
      json methods = json::array();
      json attrs = {{"power", "OFF"}, {"level", 0}, {"mode", "eco"}};
      for (const auto& m : kMethods) {
        if (below(rng, 2) == 0) continue;
        if (m == "set_level") {
          methods.push_back({{"name", m}, {"params", {{{"name", "level"}, {"kind", "integer"}, {"min", 0}, {"max", 10}}}},
                             {"writes", {{"level", "param:level"}}}});
        } else if (m == "set_mode") {
          methods.push_back({{"name", m},
                             {"params", {{{"name", "mode"}, {"kind", "enum"}, {"values", {"eco", "boost"}}}}},
                             {"writes", {{"mode", "param:mode"}}}});
        } else {
          methods.push_back({{"name", m}, {"params", json::array()}, {"writes", {{"power", m == "turn_off" ? "OFF" : "ON"}}}});
        }
      }
      devices[device] = {{"type", "gadget"}, {"attributes", attrs}, {"methods", methods}};
    }
    rooms[room] = devices;
  }
  return {{"home_id", "random"}, {"catalog", {"gadget"}}, {"rooms", rooms}};
}

template <typename Rng>
dsia::Call random_call(Rng& rng) {
  dsia::Call call{kRooms[below(rng, kRooms.size())], kDevices[below(rng, kDevices.size())],
                  kMethods[below(rng, kMethods.size())], {}};
  switch (below(rng, 6)) {
    case 0: break;
    case 1: call.params.emplace_back(static_cast<std::int64_t>(below(rng, 14)) - 2); break;
    case 2: call.params.emplace_back(std::string(below(rng, 2) == 0 ? "eco" : "turbo")); break;
    case 3: call.params.emplace_back(static_cast<double>(below(rng, 12)) + (below(rng, 2) == 0 ? 0.0 : 0.5)); break;
    case 4: call.params.emplace_back(true); break;
    default:
      call.params.emplace_back(std::int64_t{1});
      call.params.emplace_back(std::int64_t{2});
  }
  if (call.capability == "turn_on" || call.capability == "turn_off" || call.capability == "lock") {
    if (below(rng, 2) == 0) call.params.clear();
  }
  return call;
}

// Independent membership oracle over the snapshot document: enumerate every
// (room, device, method) triple, then check arity, kind and range directly
// against the declared params.
struct BruteForce {
  struct Entry {
    std::string room, device, method;
    nlohmann::json params;
  };
  std::vector<Entry> entries;

  explicit BruteForce(const nlohmann::json& doc) {
    for (const auto& [room, devices] : doc["rooms"].items()) {
      for (const auto& [device, d] : devices.items()) {
        for (const auto& m : d["methods"]) entries.push_back({room, device, m["name"], m["params"]});
      }
    }
  }

  static bool param_ok(const nlohmann::json& spec, const dsia::Literal& v) {
    const std::string kind = spec["kind"];
    double x = 0;
    if (kind == "integer") {
      if (const auto* i = std::get_if<std::int64_t>(&v)) x = static_cast<double>(*i);
      else if (const auto* d = std::get_if<double>(&v); d && *d == static_cast<double>(static_cast<std::int64_t>(*d))) x = *d;
      else return false;
    } else if (kind == "number") {
      if (const auto* i = std::get_if<std::int64_t>(&v)) x = static_cast<double>(*i);
      else if (const auto* d = std::get_if<double>(&v)) x = *d;
      else return false;
    } else if (kind == "enum") {
      const auto* s = std::get_if<std::string>(&v);
      if (s == nullptr) return false;
      for (const auto& allowed : spec["values"]) {
        if (allowed == *s) return true;
      }
      return false;
    } else if (kind == "boolean") {
      return std::holds_alternative<bool>(v);
    } else {
      return std::holds_alternative<std::string>(v);
    }
    if (spec.contains("min") && x < spec["min"].get<double>()) return false;
    if (spec.contains("max") && x > spec["max"].get<double>()) return false;
    return true;
  }

  bool passes(const dsia::Call& c) const {
    for (const auto& e : entries) {
      if (e.room != c.room || e.device != c.device || e.method != c.capability) continue;
      if (e.params.size() != c.params.size()) return false;
      for (std::size_t i = 0; i < c.params.size(); ++i) {
        if (!param_ok(e.params[i], c.params[i])) return false;
      }
      return true;
    }
    return false;
  }
};

}  // namespace testing
