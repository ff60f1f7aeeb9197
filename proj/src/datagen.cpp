#include "ctxrank/datagen.hpp"

#include "ctxrank/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxrank {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(Problem p) { return p == Problem::medoid ? "medoid" : "hypervolume"; }

Problem parse_problem(std::string_view name) {
  if (name == "medoid") return Problem::medoid;
  if (name == "hypervolume") return Problem::hypervolume;
  throw std::invalid_argument("unknown problem '" + std::string(name) + "'");
}

void GeneratorSpec::validate() const {
  if (n_instances < 1) throw std::invalid_argument("n-instances must be positive");
  if (n_objects < 1) throw std::invalid_argument("n-objects must be positive");
  if (dim < 2) throw std::invalid_argument("dim must be at least 2");
  if (problem == Problem::hypervolume && dim != 2 && dim != 3)
    throw std::invalid_argument("hypervolume problem requires dim in {2, 3}, got " + std::to_string(dim));
}

int medoid(const MatrixXd& points) {
  const auto n = points.cols();
  if (n == 0) throw std::invalid_argument("medoid of an empty set");
  int best = 0;
  double best_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) sum += (points.col(i) - points.col(j)).norm();
    if (i == 0 || sum < best_sum) {
      best = static_cast<int>(i);
      best_sum = sum;
    }
  }
  return best;
}

Ranking medoid_ranking(const MatrixXd& points) {
  const int m = medoid(points);
  VectorXd neg_dist(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) neg_dist(j) = -(points.col(m) - points.col(j)).norm();
  return rank_from_scores(neg_dist);
}

VectorXd sample_neg_sphere(int dim, std::mt19937_64& rng) {
  if (dim < 2) throw std::invalid_argument("sphere dimension must be at least 2");
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd g(dim);
  double norm = 0.0;
  do {
    for (int k = 0; k < dim; ++k) g(k) = -std::abs(normal(rng));
    norm = g.norm();
  } while (!(norm > 0.0));
  return g / norm;
}

namespace {

void check_reference(const MatrixXd& points, const VectorXd& ref) {
  if (points.rows() != ref.size()) throw std::invalid_argument("hypervolume: reference dimension mismatch");
  if (ref.size() != 2 && ref.size() != 3) throw std::invalid_argument("hypervolume supports d in {2, 3} only");
  for (Eigen::Index j = 0; j < points.cols(); ++j)
    for (Eigen::Index k = 0; k < ref.size(); ++k)
      if (!(points(k, j) <= ref(k)))
        throw std::invalid_argument("hypervolume: point " + std::to_string(j) + " does not dominate the reference");
}

double sweep_2d(const MatrixXd& p, const VectorXd& ref) {
  std::vector<int> idx(p.cols());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return p(0, a) < p(0, b) || (p(0, a) == p(0, b) && p(1, a) < p(1, b));
  });
  double area = 0.0;
  double floor_y = ref(1);
  for (int j : idx) {
    if (p(1, j) < floor_y) {
      area += (ref(0) - p(0, j)) * (floor_y - p(1, j));
      floor_y = p(1, j);
    }
  }
  return area;
}

std::vector<double> axis_cuts(const MatrixXd& p, Eigen::Index axis, double ref) {
  std::vector<double> cuts;
  for (Eigen::Index j = 0; j < p.cols(); ++j) cuts.push_back(p(axis, j));
  cuts.push_back(ref);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

// Each (x, y) grid cell is covered in z from the lowest z among points
// dominating its lower corner up to ref_z.
double grid_3d(const MatrixXd& p, const VectorXd& ref) {
  const auto xs = axis_cuts(p, 0, ref(0));
  const auto ys = axis_cuts(p, 1, ref(1));
  double volume = 0.0;
  for (std::size_t a = 0; a + 1 < xs.size(); ++a)
    for (std::size_t b = 0; b + 1 < ys.size(); ++b) {
      double low_z = ref(2);
      for (Eigen::Index j = 0; j < p.cols(); ++j)
        if (p(0, j) <= xs[a] && p(1, j) <= ys[b]) low_z = std::min(low_z, p(2, j));
      volume += (xs[a + 1] - xs[a]) * (ys[b + 1] - ys[b]) * (ref(2) - low_z);
    }
  return volume;
}

MatrixXd without_column(const MatrixXd& p, Eigen::Index j) {
  MatrixXd out(p.rows(), p.cols() - 1);
  out.leftCols(j) = p.leftCols(j);
  out.rightCols(p.cols() - j - 1) = p.rightCols(p.cols() - j - 1);
  return out;
}

}  // namespace

double hypervolume(const MatrixXd& points, const VectorXd& ref) {
  check_reference(points, ref);
  if (points.cols() == 0) return 0.0;
  return ref.size() == 2 ? sweep_2d(points, ref) : grid_3d(points, ref);
}

namespace {

// 2-D contributions as exclusive strips when every point lies on the front
// (x strictly increasing, y strictly decreasing); empty otherwise. Points
// that mirror each other get bitwise-identical contributions this way.
std::optional<VectorXd> strips_2d(const MatrixXd& p, const VectorXd& ref) {
  std::vector<int> idx(p.cols());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return p(0, a) < p(0, b); });
  for (std::size_t k = 1; k < idx.size(); ++k)
    if (!(p(0, idx[k - 1]) < p(0, idx[k]) && p(1, idx[k - 1]) > p(1, idx[k]))) return std::nullopt;
  VectorXd delta(p.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double right = k + 1 < idx.size() ? p(0, idx[k + 1]) : ref(0);
    const double top = k > 0 ? p(1, idx[k - 1]) : ref(1);
    delta(idx[k]) = (right - p(0, idx[k])) * (top - p(1, idx[k]));
  }
  return delta;
}

}  // namespace

VectorXd hv_contributions(const MatrixXd& points, const VectorXd& ref) {
  check_reference(points, ref);
  if (ref.size() == 2)
    if (auto delta = strips_2d(points, ref)) return *delta;
  const double total = hypervolume(points, ref);
  VectorXd delta(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j)
    delta(j) = std::max(0.0, total - hypervolume(without_column(points, j), ref));
  return delta;
}

Ranking hypervolume_ranking(const MatrixXd& points) {
  return rank_from_scores(hv_contributions(points, VectorXd::Zero(points.rows())));
}

Instance generate_instance(const GeneratorSpec& spec, std::uint64_t index) {
  std::mt19937_64 rng(derive_seed(spec.seed, index));
  Instance inst;
  inst.objects.resize(spec.dim, spec.n_objects);
  if (spec.problem == Problem::medoid) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int j = 0; j < spec.n_objects; ++j)
      for (int k = 0; k < spec.dim; ++k) inst.objects(k, j) = unit(rng);
    inst.ranking = medoid_ranking(inst.objects);
  } else {
    for (int j = 0; j < spec.n_objects; ++j) {
      bool duplicate = true;
      while (duplicate) {
        inst.objects.col(j) = sample_neg_sphere(spec.dim, rng);
        duplicate = false;
        for (int i = 0; i < j; ++i)
          if (inst.objects.col(i) == inst.objects.col(j)) duplicate = true;
      }
    }
    inst.ranking = hypervolume_ranking(inst.objects);
  }
  return inst;
}

Dataset generate(const GeneratorSpec& spec) {
  spec.validate();
  Dataset data;
  data.dim = spec.dim;
  data.instances.reserve(spec.n_instances);
  for (int i = 0; i < spec.n_instances; ++i)
    data.instances.push_back(generate_instance(spec, static_cast<std::uint64_t>(i)));
  return data;
}

Dataset gen_medoid(const GeneratorSpec& spec) {
  if (spec.problem != Problem::medoid)
    throw std::invalid_argument("gen_medoid: generator is not set to the medoid problem");
  return generate(spec);
}

Dataset gen_hypervolume(const GeneratorSpec& spec) {
  if (spec.problem != Problem::hypervolume)
    throw std::invalid_argument("gen_hypervolume: generator is not set to the hypervolume problem");
  return generate(spec);
}

}  // namespace ctxrank
