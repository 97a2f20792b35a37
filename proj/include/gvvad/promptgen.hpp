#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gvvad {

/// The four description elements. Each location carries the calm activity
/// used for its normal-event description (parallel to `locations`).
struct ElementInventory {
  std::vector<std::string> viewpoints;
  std::vector<std::string> locations;
  std::vector<std::string> normal_activities;
  std::vector<std::string> subjects;
  std::vector<std::string> anomalous_events;

  std::size_t product_size() const {
    return viewpoints.size() * locations.size() * subjects.size() * anomalous_events.size();
  }
  /// Throws ValidationError on empty lists, duplicates, or text that would
  /// break the tab-separated repository format.
  void validate() const;

  /// A small built-in surveillance inventory.
  static ElementInventory standard();
};

struct ElementTuple {
  std::string viewpoint;
  std::string location;
  std::string subject;
  std::string event;

  friend bool operator==(const ElementTuple&, const ElementTuple&) = default;
};

struct DescriptionPair {
  /// Position of the tuple in the viewpoint-major enumeration of the product.
  std::uint64_t index = 0;
  std::string anomalous_text;
  std::string normal_text;
  ElementTuple elements;

  friend bool operator==(const DescriptionPair&, const DescriptionPair&) = default;
};

/// Inventory text file: header `gvvad-inventory v1`, then lines
/// `viewpoint\t<v>`, `location\t<name>\t<normal activity>`, `subject\t<s>`,
/// `event\t<e>`. Blank and `#` lines are ignored.
ElementInventory load_inventory(const std::filesystem::path& path);
void save_inventory(const ElementInventory& inventory, const std::filesystem::path& path);

/// Renders every tuple of the product, or a seeded sample of exactly `limit`
/// tuples without replacement, in ascending index order.
std::vector<DescriptionPair> build_repository(const ElementInventory& inventory,
                                              std::optional<std::size_t> limit, std::uint64_t seed);

std::string render_anomalous(const ElementTuple& t);
std::string render_normal(const ElementTuple& t, const std::string& normal_activity);

void export_repository(const std::vector<DescriptionPair>& pairs, const std::filesystem::path& path);
/// Imports a repository file. Externally written descriptions are accepted
/// as long as they follow the record layout.
std::vector<DescriptionPair> import_repository(const std::filesystem::path& path);

}  // namespace gvvad
