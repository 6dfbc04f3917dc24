#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace sace {

struct Individual {
  int survival = 0;                 // S_ij
  std::optional<double> outcome;    // Y_ij, present iff survival == 1
  std::vector<double> covariates;   // X_ij
};

struct Cluster {
  std::string id;
  int treatment = 0;  // A_i, constant within the cluster
  std::vector<Individual> individuals;
  std::vector<double> cluster_covariates;  // observable C_i
};

// Observed data from a parallel-arm cluster-randomized trial. Immutable
// after construction by convention; all operations take it by const ref.
struct CrtDataset {
  std::vector<Cluster> clusters;

  std::size_t n_clusters() const { return clusters.size(); }
  std::size_t n_individuals() const;
  std::size_t covariate_dim() const;          // individual-level, 0 if empty
  std::size_t cluster_covariate_dim() const;  // cluster-level
};

struct Violation {
  std::string cluster_id;  // empty for dataset-level rules
  std::string rule;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool passed() const { return violations.empty(); }
  std::string summary() const;
};

// Report-style check of every dataset invariant: the truncation contract
// (outcome present iff survival), within-cluster treatment constancy, both
// arms present, covariate dimension consistency, nonempty finite clusters.
ValidationReport validate_dataset(const CrtDataset& data);

// Regressor layout for D_ij = (1, A_i, X-subset, C-subset).
struct DesignSpec {
  bool intercept = true;
  bool include_treatment = true;
  std::vector<std::size_t> individual_covariate_indices;
  std::vector<std::size_t> cluster_covariate_indices;

  std::size_t dimension() const {
    return (intercept ? 1 : 0) + (include_treatment ? 1 : 0) +
           individual_covariate_indices.size() + cluster_covariate_indices.size();
  }
  // index of the treatment column, for counterfactual substitution
  std::size_t treatment_column() const { return intercept ? 1 : 0; }

  static DesignSpec all_covariates(const CrtDataset& data);
};

struct DesignMatrices {
  std::vector<Eigen::MatrixXd> per_cluster;  // n_i x p, rows in input order
  std::size_t dimension = 0;
};

// Builds per-cluster design matrices. `arm` empty keeps each cluster's
// observed A_i; 0 or 1 substitutes the counterfactual treatment.
DesignMatrices build_design(const CrtDataset& data, const DesignSpec& spec,
                            std::optional<int> arm);

// Column positions resolved from a CSV header:
// cluster_id, treatment, survival, outcome, x1..xk, c1..cm.
struct ColumnMap {
  std::size_t cluster_id = 0;
  std::size_t treatment = 0;
  std::size_t survival = 0;
  std::size_t outcome = 0;
  std::vector<std::size_t> x_columns;
  std::vector<std::size_t> c_columns;

  static ColumnMap from_header(const std::vector<std::string>& header);
};

// UTF-8, comma-delimited, '.' decimal separator, header required. Empty
// outcome cells map to an absent outcome; an outcome paired with survival=0
// is a hard error, as are malformed numerics (reported with row/column) and
// cluster covariates that vary within a cluster.
CrtDataset read_csv(const std::string& path);
CrtDataset read_csv(const std::string& path, const ColumnMap& schema);
CrtDataset parse_csv_text(const std::string& text);

void write_csv(const std::string& path, const CrtDataset& data);
std::string write_csv_text(const CrtDataset& data);

}  // namespace sace
