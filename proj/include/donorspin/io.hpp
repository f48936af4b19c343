#pragma once

// CSV and config-file I/O. Every emitted table starts with a single
// machine-readable comment line carrying the tool name, library version, the
// fully resolved configuration, the RNG seed when one was used, and an FNV-1a
// hash of the data body, so any output file can be traced back to the exact
// run that produced it. Readers skip comment lines and raise IngestError on
// malformed content.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "donorspin/constants.hpp"
#include "donorspin/errors.hpp"
#include "donorspin/specfit.hpp"

namespace donorspin {

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // 64-bit offset basis
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;  // 64-bit FNV prime
  }
  return h;
}

// Shortest round-trippable-ish decimal rendering used across all CSV output.
inline std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct Provenance {
  std::string tool;
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
};

inline std::string provenance_line(const Provenance& prov, const std::string& body) {
  nlohmann::json j;
  j["tool"] = prov.tool;
  j["version"] = library_version;
  j["config"] = prov.config;
  if (prov.seed) j["seed"] = *prov.seed;
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a64(body)));
  j["content_hash"] = hash;
  return "# " + j.dump();
}

inline std::string csv_body(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
                            const std::vector<std::string>& extra_comments = {}) {
  std::ostringstream os;
  for (const auto& c : extra_comments) os << "# " << c << "\n";
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw std::invalid_argument("csv: row width does not match header");
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << format_g(row[k]);
    os << "\n";
  }
  return os.str();
}

inline std::string csv_document(const Provenance& prov, const std::vector<std::string>& header,
                                const std::vector<std::vector<double>>& rows,
                                const std::vector<std::string>& extra_comments = {}) {
  const std::string body = csv_body(header, rows, extra_comments);
  return provenance_line(prov, body) + "\n" + body;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw IngestError("cannot open for writing: " + path);
  f << content;
  if (!f) throw IngestError("write failed: " + path);
}

inline void write_csv(const std::string& path, const Provenance& prov, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows,
                      const std::vector<std::string>& extra_comments = {}) {
  write_text_file(path, csv_document(prov, header, rows, extra_comments));
}

struct CsvTable {
  std::vector<std::string> comments;  // '#' lines, stripped of the marker
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw IngestError("csv: missing column '" + name + "'");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
  const std::string t = trim(s);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) throw IngestError("cannot parse number '" + s + "' in " + context);
  return v;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& context) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = detail::trim(line);
    if (s.empty()) continue;
    if (s[0] == '#') {
      t.comments.push_back(detail::trim(s.substr(1)));
      continue;
    }
    const auto cells = detail::split_csv_line(s);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw IngestError(context + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " columns, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(detail::parse_double(c, context + ":" + std::to_string(lineno)));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw IngestError(context + ": no header row found");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IngestError("cannot open: " + path);
  return parse_csv(f, path);
}

// Two-column (field, signal) trace, e.g. a measured or simulated spectrum.
inline Trace read_trace(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 2) throw IngestError(path + ": trace needs at least two columns");
  Trace tr;
  for (const auto& row : t.rows) {
    tr.B.push_back(row[0]);
    tr.signal.push_back(row[1]);
  }
  if (tr.B.size() < 2) throw IngestError(path + ": trace needs at least two data rows");
  return tr;
}

// key = value config file; '#' comments and blank lines ignored.
inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IngestError("cannot open: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw IngestError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string val = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw IngestError(path + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = val;
  }
  return kv;
}

}  // namespace donorspin
