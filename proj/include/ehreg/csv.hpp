#pragma once

// Numeric CSV tables, dataset ingestion and atomic file output.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehreg/errors.hpp"
#include "ehreg/model.hpp"

namespace ehreg {

/// Thrown for unreadable or unwritable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;

  Eigen::Index column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return static_cast<Eigen::Index>(k);
    }
    return -1;
  }
  bool has(const std::string& name) const { return column(name) >= 0; }
  Eigen::VectorXd col(const std::string& name) const {
    const auto k = column(name);
    if (k < 0) throw ValidationError({"CSV has no column '" + name + "'"});
    return values.col(k);
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source = "CSV") {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError({source + ": empty file"});
  t.header = detail::split_csv_line(line);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> errs;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size()) {
      errs.push_back(source + " line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                     " fields, got " + std::to_string(cells.size()));
      if (errs.size() >= 10) break;
      continue;
    }
    std::vector<double> r;
    r.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        r.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        errs.push_back(source + " line " + std::to_string(lineno) + ": non-numeric value '" + c + "'");
        r.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    rows.push_back(std::move(r));
  }
  if (!errs.empty()) throw ValidationError(errs);
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string to_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
  std::ostringstream os;
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << "\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index k = 0; k < values.cols(); ++k) os << (k ? "," : "") << format_double(values(i, k));
    os << "\n";
  }
  return os.str();
}

/// Writes to a temporary sibling, then renames over the target.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

/// How CSV columns map onto a Dataset.
struct DatasetColumns {
  std::string response = "y";
  std::vector<std::string> covariates;  // empty: every column not claimed below
  std::optional<std::string> group;
  std::optional<std::pair<std::string, std::string>> coords;
  std::vector<std::string> ignore{"outlier"};
  bool add_intercept = true;
};

inline Dataset dataset_from_table(const CsvTable& t, const DatasetColumns& cols) {
  Dataset d;
  d.y = t.col(cols.response);
  std::vector<std::string> claimed = cols.ignore;
  claimed.push_back(cols.response);
  if (cols.group) claimed.push_back(*cols.group);
  if (cols.coords) {
    claimed.push_back(cols.coords->first);
    claimed.push_back(cols.coords->second);
  }
  std::vector<std::string> covs = cols.covariates;
  if (covs.empty()) {
    for (const auto& h : t.header) {
      if (std::find(claimed.begin(), claimed.end(), h) == claimed.end()) covs.push_back(h);
    }
  }
  const bool has_intercept = std::find(covs.begin(), covs.end(), "intercept") != covs.end();
  const bool add = cols.add_intercept && !has_intercept;
  const auto n = t.values.rows();
  d.X.resize(n, static_cast<Eigen::Index>(covs.size()) + (add ? 1 : 0));
  Eigen::Index c = 0;
  if (add) {
    d.X.col(c++).setOnes();
    d.covariate_names.push_back("intercept");
  }
  for (const auto& name : covs) {
    d.X.col(c++) = t.col(name);
    d.covariate_names.push_back(name);
  }
  if (cols.group) {
    const Eigen::VectorXd g = t.col(*cols.group);
    std::map<double, int> ids;
    for (Eigen::Index i = 0; i < n; ++i) ids.emplace(g[i], 0);
    int next = 0;
    for (auto& [key, id] : ids) id = next++;
    for (Eigen::Index i = 0; i < n; ++i) d.groups.push_back(ids.at(g[i]));
  }
  if (cols.coords) {
    d.coords.resize(n, 2);
    d.coords.col(0) = t.col(cols.coords->first);
    d.coords.col(1) = t.col(cols.coords->second);
  }
  return d;
}

/// Draw matrix with one row per retained iteration, columns in
/// ChainOutput::column_names() order.
inline Eigen::MatrixXd flatten_draws(const ChainOutput& out) {
  Eigen::Index cols = 0;
  for (const auto& name : out.order) cols += out.at(name).cols();
  Eigen::MatrixXd m(out.retained(), cols);
  Eigen::Index c = 0;
  for (const auto& name : out.order) {
    const auto& b = out.at(name);
    m.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return m;
}

}  // namespace ehreg
