#include "gvvad/promptgen.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include "gvvad/errors.hpp"
#include "gvvad/rng.hpp"
#include "text_util.hpp"

namespace gvvad {

namespace fs = std::filesystem;

namespace {

void check_list(const std::vector<std::string>& items, const std::string& name, bool unique = true) {
  if (items.empty()) throw ValidationError("inventory: " + name + " list is empty");
  std::unordered_set<std::string> seen;
  for (const auto& s : items) {
    if (s.empty()) throw ValidationError("inventory: empty " + name + " entry");
    if (s.find_first_of("\t\n\r") != std::string::npos) {
      throw ValidationError("inventory: " + name + " entry contains a tab or newline");
    }
    if (unique && !seen.insert(s).second) throw ValidationError("inventory: duplicate " + name + " '" + s + "'");
  }
}

}  // namespace

void ElementInventory::validate() const {
  check_list(viewpoints, "viewpoint");
  check_list(locations, "location");
  check_list(subjects, "subject");
  check_list(anomalous_events, "event");
  check_list(normal_activities, "normal activity", false);
  if (normal_activities.size() != locations.size()) {
    throw ValidationError("inventory: every location needs exactly one normal activity");
  }
}

ElementInventory ElementInventory::standard() {
  ElementInventory inv;
  inv.viewpoints = {"surveillance camera", "overhead camera", "dashboard camera"};
  inv.locations = {"train station", "parking lot", "shopping mall", "city street", "convenience store"};
  inv.normal_activities = {
      "waiting calmly on the platform while checking a phone",
      "walking slowly back to a parked car",
      "browsing shop windows at an easy pace",
      "crossing at the signal with the flow of pedestrians",
      "paying at the counter and leaving quietly",
  };
  inv.subjects = {"passenger", "man", "woman", "teenager"};
  inv.anomalous_events = {"collapsing",       "fighting",          "stealing a bag",
                          "setting a fire",   "smashing a window", "being hit by a car"};
  return inv;
}

std::string render_anomalous(const ElementTuple& t) {
  return "From the " + t.location + " " + t.viewpoint + ", a " + t.subject + " is seen " + t.event +
         ", causing brief panic as people nearby react.";
}

std::string render_normal(const ElementTuple& t, const std::string& normal_activity) {
  return "From the " + t.location + " " + t.viewpoint + ", a " + t.subject + " is " + normal_activity +
         ", and the scene stays peaceful.";
}

ElementInventory load_inventory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open inventory: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || detail::trim(line) != "gvvad-inventory v1") {
    throw ValidationError(path.string() + ":1: expected header 'gvvad-inventory v1'");
  }
  ++line_no;
  ElementInventory inv;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || detail::trim(line).front() == '#') continue;
    const auto f = detail::split(line, '\t');
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (f[0] == "location") {
      if (f.size() != 3) throw ValidationError(where + "location needs a name and a normal activity");
      inv.locations.push_back(f[1]);
      inv.normal_activities.push_back(f[2]);
      continue;
    }
    if (f.size() != 2) throw ValidationError(where + "expected '<kind>\\t<value>'");
    if (f[0] == "viewpoint") inv.viewpoints.push_back(f[1]);
    else if (f[0] == "subject") inv.subjects.push_back(f[1]);
    else if (f[0] == "event") inv.anomalous_events.push_back(f[1]);
    else throw ValidationError(where + "unknown element kind '" + f[0] + "'");
  }
  inv.validate();
  return inv;
}

void save_inventory(const ElementInventory& inv, const fs::path& path) {
  inv.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "gvvad-inventory v1\n";
  for (const auto& v : inv.viewpoints) out << "viewpoint\t" << v << '\n';
  for (std::size_t i = 0; i < inv.locations.size(); ++i) {
    out << "location\t" << inv.locations[i] << '\t' << inv.normal_activities[i] << '\n';
  }
  for (const auto& s : inv.subjects) out << "subject\t" << s << '\n';
  for (const auto& e : inv.anomalous_events) out << "event\t" << e << '\n';
}

std::vector<DescriptionPair> build_repository(const ElementInventory& inv, std::optional<std::size_t> limit,
                                              std::uint64_t seed) {
  inv.validate();
  const std::uint64_t total = inv.product_size();

  std::vector<std::uint64_t> indices;
  if (!limit) {
    indices.resize(total);
    for (std::uint64_t i = 0; i < total; ++i) indices[i] = i;
  } else {
    if (*limit == 0) throw ValidationError("repository limit must be at least 1");
    if (*limit > total) {
      throw ValidationError("repository limit " + std::to_string(*limit) + " exceeds the " +
                            std::to_string(total) + " available element combinations");
    }
    // Floyd's sampling: exactly `limit` distinct indices.
    Rng rng(seed);
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = total - *limit; j < total; ++j) {
      const auto t = rng.below(j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    indices.assign(chosen.begin(), chosen.end());
  }

  const std::uint64_t n_loc = inv.locations.size();
  const std::uint64_t n_sub = inv.subjects.size();
  const std::uint64_t n_evt = inv.anomalous_events.size();

  std::vector<DescriptionPair> pairs;
  pairs.reserve(indices.size());
  for (const auto index : indices) {
    const auto e = index % n_evt;
    const auto s = (index / n_evt) % n_sub;
    const auto l = (index / (n_evt * n_sub)) % n_loc;
    const auto v = index / (n_evt * n_sub * n_loc);
    DescriptionPair p;
    p.index = index;
    p.elements = {inv.viewpoints[v], inv.locations[l], inv.subjects[s], inv.anomalous_events[e]};
    p.anomalous_text = render_anomalous(p.elements);
    p.normal_text = render_normal(p.elements, inv.normal_activities[l]);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void export_repository(const std::vector<DescriptionPair>& pairs, const fs::path& path) {
  if (pairs.empty()) throw ValidationError("cannot export an empty repository");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "gvvad-prompts v1\n";
  for (const auto& p : pairs) {
    out << p.index << '\t' << p.elements.viewpoint << '\t' << p.elements.location << '\t' << p.elements.subject
        << '\t' << p.elements.event << '\t' << p.anomalous_text << '\t' << p.normal_text << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<DescriptionPair> import_repository(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open repository: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "gvvad-prompts v1") {
    throw ValidationError(path.string() + ":1: expected header 'gvvad-prompts v1'");
  }
  std::vector<DescriptionPair> pairs;
  std::unordered_set<std::uint64_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    const auto f = detail::split(line, '\t');
    if (f.size() != 7) throw ValidationError(where + "expected 7 tab-separated fields");
    const auto index = detail::parse_uint(f[0]);
    if (!index) throw ValidationError(where + "invalid index '" + f[0] + "'");
    if (!seen.insert(*index).second) throw ValidationError(where + "duplicate index " + f[0]);
    DescriptionPair p;
    p.index = *index;
    p.elements = {f[1], f[2], f[3], f[4]};
    p.anomalous_text = f[5];
    p.normal_text = f[6];
    if (p.anomalous_text.empty() || p.normal_text.empty() || p.anomalous_text == p.normal_text) {
      throw ValidationError(where + "descriptions must be non-empty and distinct");
    }
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw ValidationError(path.string() + ": repository has no records");
  return pairs;
}

}  // namespace gvvad
