#include "dsia/catalog.hpp"

namespace dsia::catalog {

using nlohmann::json;

namespace {

json power_methods() {
  return json::array({
      {{"name", "turn_on"}, {"params", json::array()}, {"writes", {{"power", "ON"}}}},
      {{"name", "turn_off"}, {"params", json::array()}, {"writes", {{"power", "OFF"}}}},
  });
}

json setter(const std::string& attr, int min, int max) {
  return {{"name", "set_" + attr},
          {"params", json::array({{{"name", attr}, {"kind", "integer"}, {"min", min}, {"max", max}}})},
          {"writes", {{attr, "param:" + attr}}}};
}

json enum_setter(const std::string& attr, std::vector<std::string> values) {
  return {{"name", "set_" + attr},
          {"params", json::array({{{"name", attr}, {"kind", "enum"}, {"values", values}}})},
          {"writes", {{attr, "param:" + attr}}}};
}

json toggle(const std::string& name, const std::string& attr, const json& value) {
  return {{"name", name}, {"params", json::array()}, {"writes", {{attr, value}}}};
}

json with(json methods, std::initializer_list<json> extra) {
  for (const auto& m : extra) methods.push_back(m);
  return methods;
}

std::vector<DeviceTemplate> build() {
  std::vector<DeviceTemplate> t;
  t.push_back({"lamp", {{"power", "OFF"}, {"brightness", 60}},
               with(power_methods(), {setter("brightness", 0, 100)})});
  t.push_back({"light", {{"power", "OFF"}, {"brightness", 80}},
               with(power_methods(), {setter("brightness", 0, 100)})});
  t.push_back({"smart_lock", {{"lock_state", "UNLOCKED"}},
               {toggle("lock", "lock_state", "LOCKED"), toggle("unlock", "lock_state", "UNLOCKED")}});
  t.push_back({"oven", {{"power", "OFF"}, {"temperature", 180}},
               with(power_methods(), {setter("temperature", 50, 250)})});
  t.push_back({"fridge", {{"temperature", 4}}, {setter("temperature", 1, 8)}});
  t.push_back({"dehumidifier", {{"power", "OFF"}, {"intensity", 2}, {"humidity", 50}},
               with(power_methods(), {setter("intensity", 0, 5), setter("humidity", 30, 80)})});
  t.push_back({"air_conditioner", {{"power", "OFF"}, {"temperature", 24}, {"mode", "auto"}},
               with(power_methods(), {setter("temperature", 16, 30),
                                      enum_setter("mode", {"auto", "cool", "heat", "fan"})})});
  t.push_back({"tv", {{"power", "OFF"}, {"volume", 20}, {"channel", 1}},
               with(power_methods(), {setter("volume", 0, 100), setter("channel", 1, 999)})});
  t.push_back({"curtain", {{"position", 0}},
               {toggle("open", "position", 100), toggle("close", "position", 0),
                setter("position", 0, 100)}});
  t.push_back({"fan", {{"power", "OFF"}, {"speed", 1}}, with(power_methods(), {setter("speed", 1, 3)})});
  t.push_back({"heater", {{"power", "OFF"}, {"temperature", 20}},
               with(power_methods(), {setter("temperature", 10, 30)})});
  t.push_back({"humidifier", {{"power", "OFF"}, {"humidity", 45}},
               with(power_methods(), {setter("humidity", 30, 80)})});
  t.push_back({"air_purifier", {{"power", "OFF"}, {"mode", "auto"}},
               with(power_methods(), {enum_setter("mode", {"auto", "sleep", "turbo"})})});
  t.push_back({"washing_machine", {{"state", "IDLE"}},
               {toggle("start", "state", "RUNNING"), toggle("stop", "state", "IDLE")}});
  t.push_back({"speaker", {{"power", "OFF"}, {"volume", 30}},
               with(power_methods(), {setter("volume", 0, 100)})});
  t.push_back({"robot_vacuum", {{"state", "DOCKED"}},
               {toggle("start_cleaning", "state", "CLEANING"), toggle("dock", "state", "DOCKED")}});
  return t;
}

}  // namespace

const std::vector<DeviceTemplate>& device_templates() {
  static const std::vector<DeviceTemplate> templates = build();
  return templates;
}

const DeviceTemplate* find_template(const std::string& type) {
  for (const auto& t : device_templates()) {
    if (t.type == type) return &t;
  }
  return nullptr;
}

std::vector<std::string> device_types() {
  std::vector<std::string> out;
  for (const auto& t : device_templates()) out.push_back(t.type);
  return out;
}

const std::vector<std::string>& room_names() {
  static const std::vector<std::string> names = {
      "living_room", "bedroom",   "kitchen",      "bathroom",    "study_room", "entrance",
      "garage",      "balcony",   "dining_room",  "guest_room",  "store_room", "laundry_room",
      "kids_room",   "attic",     "basement",     "corridor",
  };
  return names;
}

}  // namespace dsia::catalog
