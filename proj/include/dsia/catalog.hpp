#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace dsia::catalog {

// A device type the synthetic homes are built from, in snapshot-schema form.
struct DeviceTemplate {
  std::string type;
  nlohmann::json attributes;
  nlohmann::json methods;
};

const std::vector<DeviceTemplate>& device_templates();
const DeviceTemplate* find_template(const std::string& type);
std::vector<std::string> device_types();

// Room names the generator draws from. Homes use a subset, so the rest are
// guaranteed absent.
const std::vector<std::string>& room_names();

}  // namespace dsia::catalog
