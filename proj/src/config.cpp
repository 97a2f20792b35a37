#include "gvvad/config.hpp"

#include <fstream>
#include <sstream>

#include "gvvad/errors.hpp"
#include "text_util.hpp"

namespace gvvad {

namespace fs = std::filesystem;

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::default_value: return "default";
    case Provenance::file: return "file";
    case Provenance::flag: return "flag";
  }
  return "?";
}

void RunConfig::declare(const std::string& key, std::string default_value) {
  if (index_.contains(key)) return;
  index_.emplace(key, entries_.size());
  entries_.push_back({key, std::move(default_value), Provenance::default_value});
}

void RunConfig::declare(const std::vector<std::pair<std::string, std::string>>& keys) {
  for (const auto& [k, v] : keys) declare(k, v);
}

void RunConfig::set(const std::string& key, std::string value, Provenance from) {
  const auto it = index_.find(key);
  if (it == index_.end()) throw ValidationError("unknown configuration key '" + key + "'");
  entries_[it->second].value = std::move(value);
  entries_[it->second].from = from;
}

std::vector<std::pair<std::string, std::string>> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(std::string(detail::trim(text.substr(0, eq))),
                     std::string(detail::trim(text.substr(eq + 1))));
  }
  return out;
}

void RunConfig::load_file(const fs::path& path) {
  for (auto& [k, v] : read_key_values(path)) {
    if (!knows(k)) throw ValidationError(path.string() + ": unknown configuration key '" + k + "'");
    set(k, std::move(v), Provenance::file);
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("override must be key=value: '" + assignment + "'");
  set(std::string(detail::trim(assignment.substr(0, eq))),
      std::string(detail::trim(assignment.substr(eq + 1))), Provenance::flag);
}

const RunConfig::Entry& RunConfig::entry(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw ValidationError("unknown configuration key '" + key + "'");
  return entries_[it->second];
}

const std::string& RunConfig::get(const std::string& key) const { return entry(key).value; }

Provenance RunConfig::provenance(const std::string& key) const { return entry(key).from; }

double RunConfig::get_double(const std::string& key) const {
  const auto v = detail::parse_double(get(key));
  if (!v) throw ValidationError("key '" + key + "' expects a number, got '" + get(key) + "'");
  return *v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const auto v = detail::parse_uint(get(key));
  if (!v) throw ValidationError("key '" + key + "' expects a non-negative integer, got '" + get(key) + "'");
  return *v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ValidationError("key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  if (detail::trim(get(key)).empty()) return out;
  for (const auto& item : detail::split(get(key), ',')) out.emplace_back(detail::trim(item));
  return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    const auto v = detail::parse_double(item);
    if (!v) throw ValidationError("key '" + key + "' expects a list of numbers, got '" + get(key) + "'");
    out.push_back(*v);
  }
  return out;
}

std::string RunConfig::resolved_text(const std::string& command) const {
  std::ostringstream os;
  os << "# gvvad resolved configuration, command: " << command << '\n';
  for (const auto& e : entries_) os << e.key << '=' << e.value << '\n';
  os << "# provenance\n";
  for (const auto& e : entries_) os << "#   " << e.key << " <- " << to_string(e.from) << '\n';
  return os.str();
}

void RunConfig::write_resolved(const fs::path& out_dir, const std::string& command) const {
  std::ofstream out(out_dir / "resolved.cfg", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (out_dir / "resolved.cfg").string());
  out << resolved_text(command);
}

}  // namespace gvvad
