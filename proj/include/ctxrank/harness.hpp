#pragma once

// Experiment orchestration shared by the CLI and the acceptance suite.

#include "ctxrank/datagen.hpp"
#include "ctxrank/dataset.hpp"
#include "ctxrank/rankers.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ctxrank::harness {

struct Hyperparams {
  Architecture arch;
  nn::TrainConfig train;
  LossKind loss = LossKind::hinge;
};

// Compiled-in defaults; config/defaults.json mirrors these.
Hyperparams default_hyperparams(RankerKind kind);

std::string hyperparams_to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const std::string& text, RankerKind kind);

// Reads {"feta": {...}, "fate": {...}, ...}; kinds absent from the file keep
// their compiled-in defaults.
std::map<RankerKind, Hyperparams> load_hyperparams(const std::filesystem::path& path);
std::string defaults_document();

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> values);

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};
Summary summarize(std::span<const double> values);

using Scorer = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

// Per-instance metrics; instances with fewer than two objects are skipped.
struct Evaluation {
  std::vector<double> accuracy;  // d_ACC
  std::vector<double> rank_accuracy;  // d_RA
  std::vector<double> spearman;  // d_Spear

  Summary acc() const { return summarize(accuracy); }
  Summary ra() const { return summarize(rank_accuracy); }
  Summary spear() const { return summarize(spearman); }
};

Evaluation evaluate(const Scorer& scorer, const Dataset& data);
Evaluation evaluate(const ScoringModel& model, const Dataset& data);

// Scores equal to minus the ground-truth position.
Evaluation evaluate_oracle(const Dataset& data);
// Independent standard-normal scores from `seed`.
Evaluation evaluate_random(const Dataset& data, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Deterministic in (n, train_fraction, master_seed, repetition).
Split split_indices(std::size_t n, double train_fraction, std::uint64_t master_seed, int repetition);
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

struct ExperimentConfig {
  GeneratorSpec generator;
  double train_fraction = 0.1;
  int repetitions = 5;
  std::vector<RankerKind> rankers{RankerKind::err, RankerKind::ranknet, RankerKind::feta, RankerKind::fate};
  std::map<RankerKind, Hyperparams> hyperparams;  // missing kinds use defaults
  std::uint64_t seed = 0;
};

struct RepetitionResult {
  int repetition = 0;
  RankerKind kind = RankerKind::fate;
  Summary acc, ra, spear;  // across test instances
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RepetitionResult> runs;  // ordered by (repetition, ranker)

  // Per-repetition means of one metric for one ranker.
  std::vector<double> metric(RankerKind kind, const std::string& name) const;
};

using Progress = std::function<void(const RepetitionResult&)>;

ExperimentReport run_experiment(const ExperimentConfig& config, const Progress& progress = {});

struct SizeResult {
  int size = 0;
  Summary ra;
  bool valid_rankings = true;
};

// Fresh instances of every size, scored with `model`.
std::vector<SizeResult> generalize(const ScoringModel& model, Problem problem, int dim, std::span<const int> sizes,
                                   int per_size, std::uint64_t seed);

// Least-squares slope of y against x.
double fitted_slope(std::span<const double> x, std::span<const double> y);

struct SearchTrial {
  int index = 0;
  Hyperparams hyperparams;
  double validation_ra = 0.0;
  bool diverged = false;
};

struct SearchResult {
  Hyperparams best;
  double best_validation_ra = 0.0;
  std::vector<SearchTrial> trials;
};

// Trial 0 evaluates `base` itself; later trials sample learning rate, penalties
// (log-uniform), momentum, batch size and hidden width around it.
SearchResult random_search(RankerKind kind, const Dataset& data, const Hyperparams& base, int budget,
                           std::uint64_t seed, double validation_fraction = 0.2);

// CSV documents; every one starts with '#' comment lines recording the config.
std::string evaluation_csv(const Evaluation& ev, const std::vector<std::string>& header);
std::string generalize_csv(const std::vector<SizeResult>& rows, const std::vector<std::string>& header);
std::string trace_csv(const std::vector<double>& trace, const std::vector<std::string>& header);
std::string experiment_csv(const ExperimentReport& report, const std::vector<std::string>& header);
std::string search_csv(const SearchResult& result, const std::vector<std::string>& header);

}  // namespace ctxrank::harness
