#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "data_model.hpp"
#include "support/fixtures.hpp"

using namespace sace;

namespace {

bool has_rule(const ValidationReport& report, const std::string& rule) {
  for (const auto& v : report.violations) {
    if (v.rule == rule) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("minimal two-arm dataset passes validation") {
  CHECK(validate_dataset(fixtures::small_two_arm()).passed());
}

TEST_CASE("outcome recorded for a non-survivor is flagged") {
  CrtDataset data = fixtures::small_two_arm();
  data.clusters[0].individuals[1].outcome = 3.2;  // survival is 0
  const ValidationReport report = validate_dataset(data);
  CHECK_FALSE(report.passed());
  CHECK(has_rule(report, "outcome-without-survival"));
}

TEST_CASE("survivor without an outcome is flagged") {
  CrtDataset data = fixtures::small_two_arm();
  data.clusters[0].individuals[0].outcome.reset();
  CHECK(has_rule(validate_dataset(data), "missing-survivor-outcome"));
}

TEST_CASE("all clusters on one arm is flagged") {
  CrtDataset data = fixtures::small_two_arm();
  for (auto& c : data.clusters) c.treatment = 1;
  const ValidationReport report = validate_dataset(data);
  CHECK(has_rule(report, "single-arm dataset"));
}

TEST_CASE("covariate dimension mismatches and empty clusters are flagged") {
  CrtDataset data = fixtures::small_two_arm();
  data.clusters[1].individuals[0].covariates.push_back(9.9);
  CHECK(has_rule(validate_dataset(data), "covariate-dimension-mismatch"));

  CrtDataset empty = fixtures::small_two_arm();
  empty.clusters[0].individuals.clear();
  CHECK(has_rule(validate_dataset(empty), "empty-cluster"));
}

TEST_CASE("design rows assemble as (1, A, X, C)") {
  const CrtDataset data = fixtures::small_two_arm();
  DesignSpec spec = DesignSpec::all_covariates(data);
  CHECK(spec.dimension() == 5);  // intercept, treatment, x1, x2, c1

  const DesignMatrices observed = build_design(data, spec, std::nullopt);
  // cluster c1 is treated: row = (1, 1, 0.5, -0.2, 1.0)
  CHECK(observed.per_cluster[0](0, 0) == 1.0);
  CHECK(observed.per_cluster[0](0, 1) == 1.0);
  CHECK(observed.per_cluster[0](0, 2) == 0.5);
  CHECK(observed.per_cluster[0](0, 3) == -0.2);
  CHECK(observed.per_cluster[0](0, 4) == 1.0);

  const DesignMatrices control = build_design(data, spec, 0);
  CHECK(control.per_cluster[0](0, 1) == 0.0);  // counterfactual treatment column
  CHECK(control.per_cluster[0](0, 2) == 0.5);  // everything else unchanged
}

TEST_CASE("observed-arm design equals the matching counterfactual design") {
  const CrtDataset data = fixtures::synthetic_trial(6, 11);
  const DesignSpec spec = DesignSpec::all_covariates(data);
  const DesignMatrices observed = build_design(data, spec, std::nullopt);
  const DesignMatrices d0 = build_design(data, spec, 0);
  const DesignMatrices d1 = build_design(data, spec, 1);
  for (std::size_t i = 0; i < data.clusters.size(); ++i) {
    const DesignMatrices& match = data.clusters[i].treatment == 1 ? d1 : d0;
    CHECK((observed.per_cluster[i] - match.per_cluster[i]).norm() == 0.0);
  }
}

TEST_CASE("design dimension is invariant across clusters") {
  const CrtDataset data = fixtures::synthetic_trial(5, 3);
  const DesignSpec spec = DesignSpec::all_covariates(data);
  const DesignMatrices dm = build_design(data, spec, std::nullopt);
  for (const auto& d : dm.per_cluster) {
    CHECK(static_cast<std::size_t>(d.cols()) == spec.dimension());
  }
}

TEST_CASE("out-of-bounds covariate index is a configuration error") {
  const CrtDataset data = fixtures::small_two_arm();
  DesignSpec spec = DesignSpec::all_covariates(data);
  spec.individual_covariate_indices.push_back(7);
  CHECK_THROWS_AS(build_design(data, spec, std::nullopt), ConfigError);
}

TEST_CASE("CSV row parsing follows the schema") {
  const std::string csv =
      "cluster_id,treatment,survival,outcome,x1,x2,c1\n"
      "c1,1,1,4.2,1.9,0.4,0\n"
      "c1,1,0,,1.9,0.4,0\n"
      "c2,0,1,2.5,0.3,0.1,1\n";
  const CrtDataset data = parse_csv_text(csv);
  CHECK(data.n_clusters() == 2);
  CHECK(data.clusters[0].individuals[0].outcome == 4.2);
  CHECK_FALSE(data.clusters[0].individuals[1].outcome.has_value());
  CHECK(data.clusters[0].individuals[1].survival == 0);
  CHECK(data.clusters[1].cluster_covariates[0] == 1.0);
}

TEST_CASE("outcome with survival=0 in a CSV is a hard error") {
  const std::string csv =
      "cluster_id,treatment,survival,outcome,x1\n"
      "c1,1,0,4.2,0.5\n"
      "c2,0,1,1.0,0.2\n";
  CHECK_THROWS_WITH_AS(parse_csv_text(csv), doctest::Contains("survival=0"), InputError);
}

TEST_CASE("malformed numerics report row and column") {
  const std::string csv =
      "cluster_id,treatment,survival,outcome,x1\n"
      "c1,1,1,abc,0.5\n";
  CHECK_THROWS_WITH_AS(parse_csv_text(csv), doctest::Contains("row 2"), InputError);
}

TEST_CASE("cluster covariates must repeat exactly within a cluster") {
  const std::string csv =
      "cluster_id,treatment,survival,outcome,x1,c1\n"
      "c1,1,1,4.2,0.5,1\n"
      "c1,1,1,3.0,0.4,0\n";
  CHECK_THROWS_WITH_AS(parse_csv_text(csv), doctest::Contains("cluster covariate"), InputError);
}

TEST_CASE("missing required column is an input error") {
  CHECK_THROWS_WITH_AS(parse_csv_text("cluster_id,treatment,survival,x1\nc1,1,1,0.5\n"),
                       doctest::Contains("outcome"), InputError);
}

TEST_CASE("CSV round-trip reproduces the dataset") {
  const CrtDataset data = fixtures::synthetic_trial(5, 21);
  const CrtDataset back = parse_csv_text(write_csv_text(data));
  REQUIRE(back.n_clusters() == data.n_clusters());
  for (std::size_t i = 0; i < data.clusters.size(); ++i) {
    const Cluster& a = data.clusters[i];
    const Cluster& b = back.clusters[i];
    CHECK(a.id == b.id);
    CHECK(a.treatment == b.treatment);
    CHECK(a.cluster_covariates == b.cluster_covariates);
    REQUIRE(a.individuals.size() == b.individuals.size());
    for (std::size_t j = 0; j < a.individuals.size(); ++j) {
      CHECK(a.individuals[j].survival == b.individuals[j].survival);
      CHECK(a.individuals[j].outcome == b.individuals[j].outcome);  // %.17g round-trips
      CHECK(a.individuals[j].covariates == b.individuals[j].covariates);
    }
  }
}

TEST_CASE("file round-trip via read_csv/write_csv") {
  const CrtDataset data = fixtures::synthetic_trial(3, 5);
  const std::string path = "roundtrip_test.csv";
  write_csv(path, data);
  const CrtDataset back = read_csv(path);
  CHECK(back.n_individuals() == data.n_individuals());
  CHECK(write_csv_text(back) == write_csv_text(data));
  std::remove(path.c_str());
}

TEST_CASE("read_csv with an explicit column map honors positions") {
  const std::string csv =
      "outcome,survival,treatment,cluster_id,x1\n"
      "4.0,1,1,a,0.1\n"
      "2.0,1,0,b,0.2\n";
  ColumnMap map;
  map.outcome = 0;
  map.survival = 1;
  map.treatment = 2;
  map.cluster_id = 3;
  map.x_columns = {4};
  const std::string path = "mapped_test.csv";
  {
    std::ofstream out(path);
    out << csv;
  }
  const CrtDataset data = read_csv(path, map);
  CHECK(data.clusters[0].id == "a");
  CHECK(data.clusters[0].individuals[0].outcome == 4.0);
  std::remove(path.c_str());
}

}  // TEST_SUITE
