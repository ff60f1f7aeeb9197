#pragma once

// Synthetic context-dependent ranking benchmarks with exact labels:
// medoid distance ranking and hypervolume-contribution ranking.

#include "ctxrank/dataset.hpp"
#include "ctxrank/ranking.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string_view>

namespace ctxrank {

enum class Problem { medoid, hypervolume };

std::string_view to_string(Problem p);
Problem parse_problem(std::string_view name);

struct GeneratorSpec {
  Problem problem = Problem::medoid;
  int n_instances = 1000;
  int n_objects = 5;
  int dim = 2;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument; hypervolume is restricted to dim in {2, 3}.
  void validate() const;
};

// Index of the point (column) minimizing the mean Euclidean distance to all
// points; ties go to the lowest index.
int medoid(const Eigen::MatrixXd& points);

// Ranking by ascending distance to the medoid (medoid first).
Ranking medoid_ranking(const Eigen::MatrixXd& points);

// Uniform point on the nonpositive orthant of the unit sphere S^{d-1}.
Eigen::VectorXd sample_neg_sphere(int dim, std::mt19937_64& rng);

// Exact measure of the union of boxes [p, ref] (minimization convention).
// Supports d = 2 (sorted sweep) and d = 3 (coordinate-compressed grid).
double hypervolume(const Eigen::MatrixXd& points, const Eigen::VectorXd& ref);

// Exclusive contribution hyp(P) - hyp(P \ {p_j}) of every point.
Eigen::VectorXd hv_contributions(const Eigen::MatrixXd& points, const Eigen::VectorXd& ref);

// Ranking by descending contribution (reference point at the origin).
Ranking hypervolume_ranking(const Eigen::MatrixXd& points);

// Instance number `index` of the generator, from its own RNG stream.
Instance generate_instance(const GeneratorSpec& spec, std::uint64_t index);

Dataset gen_medoid(const GeneratorSpec& spec);
Dataset gen_hypervolume(const GeneratorSpec& spec);
Dataset generate(const GeneratorSpec& spec);

}  // namespace ctxrank
