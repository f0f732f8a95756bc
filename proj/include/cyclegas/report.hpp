// Report plumbing: tolerance checks, atomic file output, CSV tables.

#ifndef CYCLEGAS_REPORT_HPP
#define CYCLEGAS_REPORT_HPP

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

namespace cyclegas {

using json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string comparison = "<=";  // value <=/>= threshold
};

inline Check check_le(const std::string& name, double value, double threshold) {
  return {name, value, threshold, value <= threshold, "<="};
}

inline Check check_ge(const std::string& name, double value, double threshold) {
  return {name, value, threshold, value >= threshold, ">="};
}

inline Check check_true(const std::string& name, bool ok) {
  return {name, ok ? 1.0 : 0.0, 1.0, ok, ">="};
}

inline json checks_to_json(const std::vector<Check>& checks) {
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"value", c.value},
                   {"comparison", c.comparison},
                   {"threshold", c.threshold},
                   {"pass", c.pass}});
  return arr;
}

inline bool all_pass(const std::vector<Check>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

// Locale-independent formatting for CSV cells.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Write via a temp file and rename, so readers never observe partial output.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << content;
    if (!out.good()) throw std::runtime_error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("rename to " + path.string() + ": " + ec.message());
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < header.size(); ++i)
      s += (i ? "," : "") + header[i];
    s += "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i)
        s += (i ? "," : "") + fmt_double(row[i]);
      s += "\n";
    }
    return s;
  }
};

}  // namespace cyclegas

#endif  // CYCLEGAS_REPORT_HPP
