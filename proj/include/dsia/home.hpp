#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dsia/action.hpp"

namespace dsia {

using AttributeValue = nlohmann::json;

enum class ParamKind { integer, number, string, boolean, enumeration };

std::string_view to_string(ParamKind kind);
std::optional<ParamKind> param_kind_from_string(std::string_view text);

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::string;
  std::optional<double> min;
  std::optional<double> max;
  std::vector<AttributeValue> values;  // enum only

  bool operator==(const ParamSpec&) const = default;
};

// How a capability changes one attribute: copy a parameter, or write a
// fixed literal.
struct WriteRule {
  std::string attribute;
  std::optional<std::string> from_param;
  AttributeValue literal;

  bool operator==(const WriteRule&) const = default;
};

struct Capability {
  std::string name;
  std::vector<ParamSpec> params;
  std::vector<WriteRule> writes;

  bool operator==(const Capability&) const = default;
};

struct Device {
  std::string id;
  std::string type;
  std::vector<Capability> capabilities;  // declaration order
  std::map<std::string, AttributeValue> attributes;

  const Capability* find_capability(std::string_view name) const;
  bool operator==(const Device&) const = default;
};

struct Room {
  std::string name;
  std::map<std::string, Device> devices;

  bool operator==(const Room&) const = default;
};

// Immutable environment snapshot. Mutation goes through apply_action, which
// returns a new value with the version bumped.
class HomeState {
 public:
  HomeState() = default;
  // Validates every invariant; throws SnapshotError.
  HomeState(std::string home_id, std::set<std::string> catalog, std::map<std::string, Room> rooms,
            std::uint64_t version = 0);

  const std::string& home_id() const noexcept { return home_id_; }
  const std::set<std::string>& catalog() const noexcept { return catalog_; }
  const std::map<std::string, Room>& rooms() const noexcept { return rooms_; }
  std::uint64_t version() const noexcept { return version_; }
  std::size_t device_count() const noexcept;

  const Room* find_room(std::string_view name) const;

  // Structural equality; the version counter is ignored.
  bool same_content(const HomeState& other) const {
    return home_id_ == other.home_id_ && catalog_ == other.catalog_ && rooms_ == other.rooms_;
  }

 private:
  friend HomeState apply_action(const HomeState& state, const AtomicAction& action);

  std::string home_id_;
  std::set<std::string> catalog_;
  std::map<std::string, Room> rooms_;
  std::uint64_t version_ = 0;
};

HomeState load_snapshot(const nlohmann::json& document);
HomeState load_snapshot_text(std::string_view text);
HomeState load_snapshot_file(const std::filesystem::path& path);
nlohmann::json to_snapshot_json(const HomeState& state);

std::optional<Device> lookup_device(const HomeState& state, std::string_view room,
                                    std::string_view device);
std::optional<std::vector<Capability>> capabilities_of(const HomeState& state, std::string_view room,
                                                       std::string_view device);

// Executes a call that already passed verification. Throws ContractError
// ("unverified action") for the error token or any call failing the cascade.
HomeState apply_action(const HomeState& state, const AtomicAction& action);

std::string render_value(const AttributeValue& value);
std::string render_capability(const Capability& capability);
// One line per device, rooms then devices in name order.
std::string render_state_text(const HomeState& state);
// Methods-only view: `<room>.<device>: [m1(...), m2(...)]` per line.
std::string render_methods_text(const HomeState& state);

}  // namespace dsia
