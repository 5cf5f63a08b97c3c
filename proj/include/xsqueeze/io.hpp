// io.hpp
// Table and grid writers (CSV / JSON), file digests, and the run manifest.
// Numbers are written in shortest round-trip form, so identical values give
// byte-identical files regardless of locale.

#pragma once

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "errors.hpp"
#include "phase_space.hpp"

namespace xsq {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";

enum class OutputFormat { csv, json };

inline const char* to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

inline OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw config_error("format must be csv or json, got '" + s + "'");
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

// JSON cannot hold nan/inf; they become null.
inline json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Column-oriented table: header + rows of numbers or text cells.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    push(std::move(cells));
  }

  void push(std::vector<std::string> cells) {
    if (cells.size() != columns.size()) throw std::logic_error("table row width does not match header");
    rows.push_back(std::move(cells));
  }
};

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline bool numeric_cell(const std::string& s, double& v) {
  if (s == "nan" || s == "inf" || s == "-inf") return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw io_error("write failed for " + path.string());
}

}  // namespace detail

inline std::string table_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + detail::csv_escape(t.columns[i]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::csv_escape(row[i]);
    out += '\n';
  }
  return out;
}

// {"columns": [...], "rows": [[...], ...]} with numeric cells as numbers.
inline json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (const auto& cell : row) {
      double v;
      if (detail::numeric_cell(cell, v)) r.push_back(v);
      else if (cell == "nan" || cell == "inf" || cell == "-inf") r.push_back(nullptr);
      else r.push_back(cell);
    }
    rows.push_back(std::move(r));
  }
  return json{{"columns", t.columns}, {"rows", std::move(rows)}};
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Debug record of a Fock-basis state: {dim, re[], im[]}.
inline json state_json(const MotionalState& s) {
  json re = json::array(), im = json::array();
  for (std::size_t n = 0; n < s.dim(); ++n) {
    re.push_back(s[n].real());
    im.push_back(s[n].imag());
  }
  return json{{"dim", s.dim()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline MotionalState state_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re") || !j.contains("im"))
    throw config_error("state record needs dim, re and im");
  const auto dim = j.at("dim").get<std::size_t>();
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (!re.is_array() || !im.is_array() || re.size() != dim || im.size() != dim)
    throw config_error("state record arrays must both have length dim");
  cvec c(static_cast<Index>(dim));
  for (std::size_t n = 0; n < dim; ++n) c(static_cast<Index>(n)) = complex(re[n].get<double>(), im[n].get<double>());
  return MotionalState(std::move(c));
}

// Grid CSV: header "x\p" followed by the p values; each row starts with x.
inline std::string grid_csv(const std::vector<double>& xs, const std::vector<double>& ps, const Eigen::MatrixXd& v) {
  std::string out = "x\\p";
  for (double p : ps) out += "," + format_number(p);
  out += '\n';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out += format_number(xs[i]);
    for (std::size_t j = 0; j < ps.size(); ++j)
      out += "," + format_number(v(static_cast<Index>(i), static_cast<Index>(j)));
    out += '\n';
  }
  return out;
}

inline json grid_json(const std::vector<double>& xs, const std::vector<double>& ps, const Eigen::MatrixXd& v,
                      const json& metadata) {
  json values = json::array();
  for (Index i = 0; i < v.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < v.cols(); ++j) row.push_back(json_number(v(i, j)));
    values.push_back(std::move(row));
  }
  return json{{"metadata", metadata}, {"x", xs}, {"p", ps}, {"values", std::move(values)}};
}

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string() + " for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw io_error("sha256 initialisation failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

// Collects data products of one run directory; writes them and records digests.
class RunWriter {
 public:
  RunWriter(fs::path dir, OutputFormat format) : dir_(std::move(dir)), format_(format) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw io_error("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  const fs::path& dir() const { return dir_; }
  OutputFormat format() const { return format_; }

  // Writes `stem`.csv or `stem`.json according to the run format.
  void table(const std::string& stem, const std::string& kind, const Table& t) {
    if (format_ == OutputFormat::csv) file(stem + ".csv", kind, table_csv(t));
    else file(stem + ".json", kind, dump(table_json(t)));
  }

  void grid(const std::string& stem, const std::string& kind, const std::vector<double>& xs,
            const std::vector<double>& ps, const Eigen::MatrixXd& v, const json& metadata) {
    if (format_ == OutputFormat::csv) {
      file(stem + ".csv", kind, grid_csv(xs, ps, v));
      file(stem + ".meta.json", kind + "-metadata", dump(metadata));
    } else {
      file(stem + ".json", kind, dump(grid_json(xs, ps, v, metadata)));
    }
  }

  void document(const std::string& name, const std::string& kind, const json& j) { file(name, kind, dump(j)); }

  void file(const std::string& name, const std::string& kind, const std::string& contents) {
    const fs::path path = dir_ / name;
    detail::write_text(path, contents);
    files_.push_back(json{{"name", name},
                          {"kind", kind},
                          {"format", path.extension() == ".csv" ? "csv" : "json"},
                          {"bytes", contents.size()},
                          {"sha256", sha256_file(path)}});
  }

  const json& files() const { return files_; }

 private:
  fs::path dir_;
  OutputFormat format_;
  json files_ = json::array();
};

}  // namespace xsq
