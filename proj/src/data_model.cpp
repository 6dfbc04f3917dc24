#include "data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace sace {

std::size_t CrtDataset::n_individuals() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.individuals.size();
  return n;
}

std::size_t CrtDataset::covariate_dim() const {
  for (const auto& c : clusters) {
    if (!c.individuals.empty()) return c.individuals.front().covariates.size();
  }
  return 0;
}

std::size_t CrtDataset::cluster_covariate_dim() const {
  return clusters.empty() ? 0 : clusters.front().cluster_covariates.size();
}

std::string ValidationReport::summary() const {
  if (passed()) return "pass";
  std::ostringstream out;
  out << violations.size() << " violation(s):";
  for (const auto& v : violations) {
    out << " [" << (v.cluster_id.empty() ? "dataset" : v.cluster_id) << "] " << v.rule;
    if (!v.detail.empty()) out << " (" << v.detail << ")";
    out << ";";
  }
  return out.str();
}

ValidationReport validate_dataset(const CrtDataset& data) {
  ValidationReport report;
  auto add = [&](const std::string& id, const std::string& rule, const std::string& detail) {
    report.violations.push_back({id, rule, detail});
  };

  if (data.clusters.empty()) {
    add("", "empty-dataset", "no clusters");
    return report;
  }

  const std::size_t xdim = data.covariate_dim();
  const std::size_t cdim = data.cluster_covariate_dim();
  bool any_treated = false, any_control = false;

  for (const auto& c : data.clusters) {
    if (c.treatment == 1) {
      any_treated = true;
    } else if (c.treatment == 0) {
      any_control = true;
    } else {
      add(c.id, "non-binary-treatment", "treatment = " + std::to_string(c.treatment));
    }
    if (c.individuals.empty()) {
      add(c.id, "empty-cluster", "cluster size must be >= 1");
      continue;
    }
    if (c.cluster_covariates.size() != cdim) {
      add(c.id, "cluster-covariate-dimension-mismatch",
          "expected " + std::to_string(cdim) + " got " +
              std::to_string(c.cluster_covariates.size()));
    }
    for (double v : c.cluster_covariates) {
      if (!std::isfinite(v)) {
        add(c.id, "nonfinite-value", "cluster covariate");
        break;
      }
    }
    for (std::size_t j = 0; j < c.individuals.size(); ++j) {
      const auto& ind = c.individuals[j];
      const std::string where = "individual " + std::to_string(j + 1);
      if (ind.survival != 0 && ind.survival != 1) {
        add(c.id, "non-binary-survival", where);
      }
      if (ind.survival == 0 && ind.outcome.has_value()) {
        add(c.id, "outcome-without-survival", where);
      }
      if (ind.survival == 1 && !ind.outcome.has_value()) {
        add(c.id, "missing-survivor-outcome", where);
      }
      if (ind.outcome.has_value() && !std::isfinite(*ind.outcome)) {
        add(c.id, "nonfinite-value", where + " outcome");
      }
      if (ind.covariates.size() != xdim) {
        add(c.id, "covariate-dimension-mismatch",
            where + ": expected " + std::to_string(xdim) + " got " +
                std::to_string(ind.covariates.size()));
      }
      for (double v : ind.covariates) {
        if (!std::isfinite(v)) {
          add(c.id, "nonfinite-value", where + " covariate");
          break;
        }
      }
    }
  }
  if (!(any_treated && any_control)) {
    add("", "single-arm dataset", "both treatment arms must be present");
  }
  return report;
}

DesignSpec DesignSpec::all_covariates(const CrtDataset& data) {
  DesignSpec spec;
  for (std::size_t i = 0; i < data.covariate_dim(); ++i) {
    spec.individual_covariate_indices.push_back(i);
  }
  for (std::size_t i = 0; i < data.cluster_covariate_dim(); ++i) {
    spec.cluster_covariate_indices.push_back(i);
  }
  return spec;
}

DesignMatrices build_design(const CrtDataset& data, const DesignSpec& spec,
                            std::optional<int> arm) {
  if (arm && !spec.include_treatment) {
    throw ConfigError("counterfactual designs require a treatment column");
  }
  if (arm && *arm != 0 && *arm != 1) {
    throw ConfigError("counterfactual arm must be 0 or 1");
  }
  const std::size_t xdim = data.covariate_dim();
  const std::size_t cdim = data.cluster_covariate_dim();
  for (std::size_t idx : spec.individual_covariate_indices) {
    if (idx >= xdim) {
      throw ConfigError("individual covariate index " + std::to_string(idx) +
                        " out of bounds (dimension " + std::to_string(xdim) + ")");
    }
  }
  for (std::size_t idx : spec.cluster_covariate_indices) {
    if (idx >= cdim) {
      throw ConfigError("cluster covariate index " + std::to_string(idx) +
                        " out of bounds (dimension " + std::to_string(cdim) + ")");
    }
  }

  DesignMatrices out;
  out.dimension = spec.dimension();
  out.per_cluster.reserve(data.clusters.size());
  for (const auto& c : data.clusters) {
    Eigen::MatrixXd D(c.individuals.size(), out.dimension);
    const double a = arm ? static_cast<double>(*arm) : static_cast<double>(c.treatment);
    for (std::size_t j = 0; j < c.individuals.size(); ++j) {
      std::size_t col = 0;
      if (spec.intercept) D(j, col++) = 1.0;
      if (spec.include_treatment) D(j, col++) = a;
      for (std::size_t idx : spec.individual_covariate_indices) {
        D(j, col++) = c.individuals[j].covariates[idx];
      }
      for (std::size_t idx : spec.cluster_covariate_indices) {
        D(j, col++) = c.cluster_covariates[idx];
      }
    }
    out.per_cluster.push_back(std::move(D));
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& cell, std::size_t row, std::size_t col) {
  const std::string s = strip(cell);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw InputError("malformed numeric cell at row " + std::to_string(row) + ", column " +
                     std::to_string(col + 1) + ": '" + cell + "'");
  }
  return v;
}

int parse_binary(const std::string& cell, std::size_t row, std::size_t col,
                 const std::string& name) {
  const double v = parse_double(cell, row, col);
  if (v != 0.0 && v != 1.0) {
    throw InputError(name + " must be 0 or 1 at row " + std::to_string(row) + ", column " +
                     std::to_string(col + 1));
  }
  return static_cast<int>(v);
}

// numeric suffix of names like "x12" / "c3"; npos when absent or malformed
std::size_t name_suffix(const std::string& name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return std::string::npos;
  std::size_t value = 0;
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return std::string::npos;
    value = value * 10 + (name[i] - '0');
  }
  return value;
}

CrtDataset parse_rows(const std::vector<std::vector<std::string>>& rows, const ColumnMap& map) {
  CrtDataset data;
  std::map<std::string, std::size_t> cluster_index;
  const std::size_t ncols =
      4 + map.x_columns.size() + map.c_columns.size();  // for error reporting only

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    const std::size_t row_no = r + 2;  // header is row 1
    std::size_t needed = std::max({map.cluster_id, map.treatment, map.survival, map.outcome});
    for (std::size_t c : map.x_columns) needed = std::max(needed, c);
    for (std::size_t c : map.c_columns) needed = std::max(needed, c);
    if (fields.size() <= needed) {
      throw InputError("row " + std::to_string(row_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected at least " +
                       std::to_string(std::max(needed + 1, ncols)));
    }

    const std::string id = strip(fields[map.cluster_id]);
    if (id.empty()) {
      throw InputError("empty cluster_id at row " + std::to_string(row_no));
    }
    const int treatment = parse_binary(fields[map.treatment], row_no, map.treatment, "treatment");
    const int survival = parse_binary(fields[map.survival], row_no, map.survival, "survival");

    Individual ind;
    ind.survival = survival;
    const std::string outcome_cell = strip(fields[map.outcome]);
    if (!outcome_cell.empty()) {
      if (survival == 0) {
        throw InputError("outcome present with survival=0 at row " + std::to_string(row_no) +
                         " (truncated outcomes must be empty)");
      }
      ind.outcome = parse_double(outcome_cell, row_no, map.outcome);
    } else if (survival == 1) {
      throw InputError("survivor with empty outcome at row " + std::to_string(row_no));
    }
    for (std::size_t c : map.x_columns) {
      ind.covariates.push_back(parse_double(fields[c], row_no, c));
    }
    std::vector<double> cluster_covs;
    for (std::size_t c : map.c_columns) {
      cluster_covs.push_back(parse_double(fields[c], row_no, c));
    }

    auto it = cluster_index.find(id);
    if (it == cluster_index.end()) {
      cluster_index.emplace(id, data.clusters.size());
      Cluster cluster;
      cluster.id = id;
      cluster.treatment = treatment;
      cluster.cluster_covariates = cluster_covs;
      cluster.individuals.push_back(std::move(ind));
      data.clusters.push_back(std::move(cluster));
    } else {
      Cluster& cluster = data.clusters[it->second];
      if (cluster.treatment != treatment) {
        throw InputError("inconsistent treatment within cluster '" + id + "' at row " +
                         std::to_string(row_no));
      }
      if (cluster.cluster_covariates != cluster_covs) {
        throw InputError("inconsistent cluster covariate within cluster '" + id + "' at row " +
                         std::to_string(row_no));
      }
      cluster.individuals.push_back(std::move(ind));
    }
  }
  return data;
}

CrtDataset parse_csv_stream(std::istream& in, const ColumnMap* schema) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV: missing header row");
  std::vector<std::string> header;
  for (auto& h : split_csv_line(line)) header.push_back(strip(h));
  const ColumnMap map = schema ? *schema : ColumnMap::from_header(header);

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (strip(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw InputError("CSV contains a header but no data rows");
  return parse_rows(rows, map);
}

}  // namespace

ColumnMap ColumnMap::from_header(const std::vector<std::string>& header) {
  ColumnMap map;
  bool has_id = false, has_treatment = false, has_survival = false, has_outcome = false;
  std::vector<std::pair<std::size_t, std::size_t>> xs, cs;  // (suffix, column)
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& name = header[i];
    if (name == "cluster_id") {
      map.cluster_id = i;
      has_id = true;
    } else if (name == "treatment") {
      map.treatment = i;
      has_treatment = true;
    } else if (name == "survival") {
      map.survival = i;
      has_survival = true;
    } else if (name == "outcome") {
      map.outcome = i;
      has_outcome = true;
    } else if (std::size_t k = name_suffix(name, 'x'); k != std::string::npos) {
      xs.emplace_back(k, i);
    } else if (std::size_t k = name_suffix(name, 'c'); k != std::string::npos) {
      cs.emplace_back(k, i);
    } else {
      throw InputError("unrecognized CSV column '" + name + "'");
    }
  }
  if (!has_id) throw InputError("CSV header is missing required column 'cluster_id'");
  if (!has_treatment) throw InputError("CSV header is missing required column 'treatment'");
  if (!has_survival) throw InputError("CSV header is missing required column 'survival'");
  if (!has_outcome) throw InputError("CSV header is missing required column 'outcome'");
  std::sort(xs.begin(), xs.end());
  std::sort(cs.begin(), cs.end());
  for (auto& [k, i] : xs) map.x_columns.push_back(i);
  for (auto& [k, i] : cs) map.c_columns.push_back(i);
  return map;
}

CrtDataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file: " + path);
  return parse_csv_stream(in, nullptr);
}

CrtDataset read_csv(const std::string& path, const ColumnMap& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file: " + path);
  return parse_csv_stream(in, &schema);
}

CrtDataset parse_csv_text(const std::string& text) {
  std::istringstream in(text);
  return parse_csv_stream(in, nullptr);
}

std::string write_csv_text(const CrtDataset& data) {
  const std::size_t xdim = data.covariate_dim();
  const std::size_t cdim = data.cluster_covariate_dim();
  std::ostringstream out;
  out << "cluster_id,treatment,survival,outcome";
  for (std::size_t i = 1; i <= xdim; ++i) out << ",x" << i;
  for (std::size_t i = 1; i <= cdim; ++i) out << ",c" << i;
  out << "\n";
  char buf[40];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& c : data.clusters) {
    for (const auto& ind : c.individuals) {
      out << c.id << "," << c.treatment << "," << ind.survival << ",";
      if (ind.outcome) out << fmt(*ind.outcome);
      for (double v : ind.covariates) out << "," << fmt(v);
      for (double v : c.cluster_covariates) out << "," << fmt(v);
      out << "\n";
    }
  }
  return out.str();
}

void write_csv(const std::string& path, const CrtDataset& data) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open file for writing: " + path);
  out << write_csv_text(data);
}

}  // namespace sace
