// ctxrank: generate benchmarks, train and evaluate context-dependent rankers,
// and verify the tabular FETA construction.

#include "ctxrank/datagen.hpp"
#include "ctxrank/dataset.hpp"
#include "ctxrank/decomposition.hpp"
#include "ctxrank/harness.hpp"
#include "ctxrank/rankers.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ctxrank;

constexpr int kExitMismatch = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitDiverged = 3;

struct TrainOverrides {
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<double> momentum;
  std::optional<int> batch_size;
  std::optional<double> l1;
  std::optional<double> l2;
  std::optional<double> ridge;
  std::optional<double> final_lr_ratio;

  void attach(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "Training epochs (default from config)");
    cmd->add_option("--lr", learning_rate, "Learning rate (default from config)");
    cmd->add_option("--momentum", momentum, "Nesterov momentum (default from config)");
    cmd->add_option("--batch-size", batch_size, "Tasks per mini-batch (default from config)");
    cmd->add_option("--l1", l1, "L1 penalty (default from config)");
    cmd->add_option("--l2", l2, "L2 penalty (default from config)");
    cmd->add_option("--ridge", ridge, "ERR ridge penalty (default from config)");
    cmd->add_option("--final-lr-ratio", final_lr_ratio,
                    "Cosine-decay the learning rate to this fraction by the last epoch (default from config)");
  }

  void apply(harness::Hyperparams& hp) const {
    if (epochs) hp.train.epochs = *epochs;
    if (learning_rate) hp.train.learning_rate = *learning_rate;
    if (momentum) hp.train.momentum = *momentum;
    if (batch_size) hp.train.batch_size = *batch_size;
    if (l1) hp.train.l1 = *l1;
    if (l2) hp.train.l2 = *l2;
    if (ridge) hp.arch.ridge = *ridge;
    if (final_lr_ratio) hp.train.final_lr_ratio = *final_lr_ratio;
  }
};

harness::Hyperparams hyperparams_for(RankerKind kind, const std::string& config_path) {
  if (config_path.empty()) return harness::default_hyperparams(kind);
  return harness::load_hyperparams(config_path).at(kind);
}

std::string seed_line(std::uint64_t seed) { return "seed=" + std::to_string(seed); }

std::vector<int> size_range(int lo, int hi) {
  std::vector<int> sizes;
  for (int s = lo; s <= hi; ++s) sizes.push_back(s);
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-dependent object ranking: FETA/FATE networks, baselines, benchmarks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // generate
  GeneratorSpec gen_spec;
  std::string gen_problem = "medoid";
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic benchmark dataset (JSONL)");
  gen->add_option("--problem", gen_problem, "medoid or hypervolume")->capture_default_str();
  gen->add_option("--n-instances", gen_spec.n_instances, "Number of ranking tasks")->capture_default_str();
  gen->add_option("--n-objects", gen_spec.n_objects, "Objects per task")->capture_default_str();
  gen->add_option("--dim", gen_spec.dim, "Feature dimension")->capture_default_str();
  gen->add_option("--seed", gen_spec.seed, "Master seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output path")->required();

  // train
  std::string train_model = "fate";
  std::string train_loss;
  std::string train_data;
  std::string train_out;
  std::string train_trace;
  std::string train_config;
  std::uint64_t train_seed = 0;
  TrainOverrides train_overrides;
  auto* train = app.add_subcommand("train", "Train a ranker and write the model file and loss trace");
  train->add_option("--model", train_model, "feta, fate, ranknet, listnet or err")->capture_default_str();
  train->add_option("--loss", train_loss, "hinge, pl, ranknet or listnet (default: per model)");
  train->add_option("--data", train_data, "Training dataset (JSONL)")->required();
  train->add_option("--out", train_out, "Model output path")->required();
  train->add_option("--trace", train_trace, "Loss trace CSV (default: <out>.trace.csv)");
  train->add_option("--config", train_config, "Hyperparameter JSON (default: built-in defaults)");
  train->add_option("--seed", train_seed, "Initialization and shuffling seed")->capture_default_str();
  train_overrides.attach(train);

  // evaluate
  std::string eval_model;
  std::string eval_data;
  std::string eval_out;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("evaluate", "Compute d_ACC, d_RA and d_Spear of a model on a dataset");
  eval->add_option("--model", eval_model, "Model file, or 'oracle' / 'random'")->required();
  eval->add_option("--data", eval_data, "Dataset (JSONL)")->required();
  eval->add_option("--out", eval_out, "Report CSV path (optional)");
  eval->add_option("--seed", eval_seed, "Seed for the 'random' model")->capture_default_str();

  // generalize
  std::string genz_model;
  std::string genz_problem = "medoid";
  std::string genz_out;
  std::vector<int> genz_sizes;
  int genz_min = 3;
  int genz_max = 24;
  int genz_per_size = 1000;
  int genz_dim = 2;
  std::uint64_t genz_seed = 0;
  auto* genz = app.add_subcommand("generalize", "Evaluate a model on fresh tasks of varying size");
  genz->add_option("--model", genz_model, "Model file")->required();
  genz->add_option("--problem", genz_problem, "medoid or hypervolume")->capture_default_str();
  genz->add_option("--sizes", genz_sizes, "Explicit task sizes (overrides --min-size/--max-size)")->delimiter(',');
  genz->add_option("--min-size", genz_min, "Smallest task size")->capture_default_str();
  genz->add_option("--max-size", genz_max, "Largest task size")->capture_default_str();
  genz->add_option("--n-instances", genz_per_size, "Instances per size")->capture_default_str();
  genz->add_option("--dim", genz_dim, "Feature dimension")->capture_default_str();
  genz->add_option("--seed", genz_seed, "Master seed")->capture_default_str();
  genz->add_option("--out", genz_out, "CSV output path")->required();

  // verify-feta
  int vf_n = 4;
  int vf_trials = 100;
  double vf_epsilon = 1.0;
  std::uint64_t vf_seed = 0;
  std::string vf_out;
  auto* vf = app.add_subcommand("verify-feta", "Construct and verify tabular FETA for random ranking functions");
  vf->add_option("--n-objects", vf_n, "Universe size N (1..8)")->capture_default_str();
  vf->add_option("--trials", vf_trials, "Random ranking functions")->capture_default_str();
  vf->add_option("--epsilon", vf_epsilon, "Construction step margin")->capture_default_str();
  vf->add_option("--seed", vf_seed, "Master seed")->capture_default_str();
  vf->add_option("--out", vf_out, "Report path (optional)");

  // search
  std::string search_model = "fate";
  std::string search_data;
  std::string search_out;
  std::string search_best;
  std::string search_config;
  int search_budget = 10;
  double search_validation = 0.2;
  std::uint64_t search_seed = 0;
  TrainOverrides search_overrides;
  auto* search = app.add_subcommand("search", "Seeded random hyperparameter search on validation d_RA");
  search->add_option("--model", search_model, "feta, fate, ranknet or listnet")->capture_default_str();
  search->add_option("--data", search_data, "Training dataset (JSONL)")->required();
  search->add_option("--budget", search_budget, "Number of trials")->capture_default_str();
  search->add_option("--validation-fraction", search_validation, "Held-out share")->capture_default_str();
  search->add_option("--config", search_config, "Base hyperparameter JSON (trial 0)");
  search->add_option("--seed", search_seed, "Master seed")->capture_default_str();
  search->add_option("--out", search_out, "Trial log CSV")->required();
  search->add_option("--best", search_best, "Best hyperparameters JSON (optional)");
  search_overrides.attach(search);

  // experiment
  GeneratorSpec exp_spec;
  exp_spec.n_instances = 100000;
  std::string exp_problem = "medoid";
  std::string exp_models = "err,ranknet,feta,fate";
  std::string exp_config;
  std::string exp_out;
  double exp_fraction = 0.1;
  int exp_reps = 5;
  std::uint64_t exp_seed = 0;
  auto* exp = app.add_subcommand("experiment", "Generate, split, train and evaluate several rankers");
  exp->add_option("--problem", exp_problem, "medoid or hypervolume")->capture_default_str();
  exp->add_option("--n-instances", exp_spec.n_instances, "Number of ranking tasks")->capture_default_str();
  exp->add_option("--n-objects", exp_spec.n_objects, "Objects per task")->capture_default_str();
  exp->add_option("--dim", exp_spec.dim, "Feature dimension")->capture_default_str();
  exp->add_option("--train-fraction", exp_fraction, "Training share")->capture_default_str();
  exp->add_option("--repetitions", exp_reps, "Random splits")->capture_default_str();
  exp->add_option("--models", exp_models, "Comma-separated model kinds")->capture_default_str();
  exp->add_option("--config", exp_config, "Hyperparameter JSON (default: built-in defaults)");
  exp->add_option("--seed", exp_seed, "Master seed")->capture_default_str();
  exp->add_option("--out", exp_out, "Report CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gen_spec.problem = parse_problem(gen_problem);
      gen_spec.validate();
      const Dataset data = generate(gen_spec);
      std::ostringstream buffer;
      write_dataset(buffer, data);
      write_file_atomic(gen_out, buffer.str());
      std::cout << "instances: " << data.size() << "\nchecksum: " << checksum_hex(buffer.str()) << '\n';
      return 0;
    }

    if (*train) {
      const auto kind = parse_ranker_kind(train_model);
      auto hp = hyperparams_for(kind, train_config);
      if (!train_loss.empty()) hp.loss = parse_loss_kind(train_loss);
      check_compatible(kind, hp.loss);
      train_overrides.apply(hp);
      hp.train.seed = train_seed;
      hp.train.validate();
      const Dataset data = load_dataset(train_data);
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = train_ranker(kind, data, hp.arch, hp.loss, hp.train);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      save_model(train_out, result.model);
      const std::string trace_path = train_trace.empty() ? train_out + ".trace.csv" : train_trace;
      write_file_atomic(trace_path, harness::trace_csv(result.loss_trace,
                                                        {"command=train", "model=" + train_model,
                                                         "data=" + train_data, seed_line(train_seed),
                                                         "hyperparams=" + harness::hyperparams_to_json(hp)}));
      std::cout << "trained " << train_model << " on " << data.size() << " instances in " << std::fixed
                << std::setprecision(2) << secs << " s\n";
      if (!result.loss_trace.empty())
        std::cout << "final training loss: " << std::setprecision(6) << result.loss_trace.back() << '\n';
      return 0;
    }

    if (*eval) {
      const Dataset data = load_dataset(eval_data);
      harness::Evaluation ev;
      if (eval_model == "oracle")
        ev = harness::evaluate_oracle(data);
      else if (eval_model == "random")
        ev = harness::evaluate_random(data, eval_seed);
      else
        ev = harness::evaluate(load_model(eval_model), data);
      auto print = [](const char* name, harness::Summary s) {
        std::cout << name << ": " << std::fixed << std::setprecision(4) << s.mean << " +- " << s.std << '\n';
      };
      print("d_acc", ev.acc());
      print("d_ra", ev.ra());
      print("d_spear", ev.spear());
      if (!eval_out.empty())
        write_file_atomic(eval_out, harness::evaluation_csv(ev, {"command=evaluate", "model=" + eval_model,
                                                                 "data=" + eval_data, seed_line(eval_seed)}));
      return 0;
    }

    if (*genz) {
      const auto problem = parse_problem(genz_problem);
      const std::vector<int> sizes = genz_sizes.empty() ? size_range(genz_min, genz_max) : genz_sizes;
      for (int s : sizes)
        if (s < 2) throw std::invalid_argument("task sizes must be at least 2");
      const auto model = load_model(genz_model);
      const auto rows = harness::generalize(model, problem, genz_dim, sizes, genz_per_size, genz_seed);
      for (const auto& r : rows)
        std::cout << "size " << r.size << ": d_ra " << std::fixed << std::setprecision(4) << r.ra.mean << " +- "
                  << r.ra.std << (r.valid_rankings ? "" : " (invalid rankings)") << '\n';
      write_file_atomic(genz_out,
                        harness::generalize_csv(rows, {"command=generalize", "model=" + genz_model,
                                                       "problem=" + genz_problem, "dim=" + std::to_string(genz_dim),
                                                       "n_instances=" + std::to_string(genz_per_size),
                                                       seed_line(genz_seed)}));
      return 0;
    }

    if (*vf) {
      if (vf_n < 1 || vf_n > decomposition::kMaxUniverse)
        throw std::invalid_argument("--n-objects must lie in [1, 8]");
      if (vf_trials < 0) throw std::invalid_argument("--trials must be nonnegative");
      std::mt19937_64 rng(vf_seed);
      long queries = 0;
      long mismatches = 0;
      double min_margin = 0.0;
      std::ostringstream details;
      for (int t = 0; t < vf_trials; ++t) {
        const auto rho = decomposition::random_ranking_function(vf_n, rng);
        const auto tables = decomposition::construct_feta_tables(rho, vf_epsilon);
        const auto report = decomposition::verify_reconstruction(rho, tables);
        queries += report.queries;
        mismatches += static_cast<long>(report.mismatches.size());
        min_margin = t == 0 ? report.min_margin : std::min(min_margin, report.min_margin);
        if (!report.ok()) {
          details << "trial " << t << ":\n";
          decomposition::write_report(details, report, vf_n);
        }
      }
      std::ostringstream summary;
      summary << "n_objects: " << vf_n << "\ntrials: " << vf_trials << "\nepsilon: " << vf_epsilon
              << "\nseed: " << vf_seed << "\nqueries: " << queries << "\nmismatches: " << mismatches
              << "\nmin_margin: " << min_margin << '\n'
              << details.str();
      std::cout << summary.str();
      if (!vf_out.empty()) write_file_atomic(vf_out, summary.str());
      return mismatches == 0 ? 0 : kExitMismatch;
    }

    if (*search) {
      const auto kind = parse_ranker_kind(search_model);
      if (kind == RankerKind::err) throw std::invalid_argument("search applies to network models only");
      auto base = hyperparams_for(kind, search_config);
      search_overrides.apply(base);
      base.train.validate();
      if (!(search_validation > 0.0 && search_validation < 1.0))
        throw std::invalid_argument("--validation-fraction must lie in (0,1)");
      const Dataset data = load_dataset(search_data);
      const auto result = harness::random_search(kind, data, base, search_budget, search_seed, search_validation);
      for (const auto& t : result.trials)
        std::cout << "trial " << t.index << ": validation d_ra "
                  << (t.diverged ? std::string("diverged") : std::to_string(t.validation_ra)) << '\n';
      std::cout << "best validation d_ra: " << result.best_validation_ra << '\n';
      write_file_atomic(search_out, harness::search_csv(result, {"command=search", "model=" + search_model,
                                                                 "data=" + search_data,
                                                                 "budget=" + std::to_string(search_budget),
                                                                 seed_line(search_seed)}));
      if (!search_best.empty()) write_file_atomic(search_best, harness::hyperparams_to_json(result.best) + "\n");
      return 0;
    }

    if (*exp) {
      harness::ExperimentConfig cfg;
      exp_spec.problem = parse_problem(exp_problem);
      exp_spec.seed = exp_seed;
      exp_spec.validate();
      cfg.generator = exp_spec;
      cfg.train_fraction = exp_fraction;
      cfg.repetitions = exp_reps;
      cfg.seed = exp_seed;
      cfg.rankers.clear();
      std::stringstream models(exp_models);
      for (std::string name; std::getline(models, name, ',');) cfg.rankers.push_back(parse_ranker_kind(name));
      if (!exp_config.empty()) cfg.hyperparams = harness::load_hyperparams(exp_config);
      const auto report = harness::run_experiment(cfg, [](const harness::RepetitionResult& r) {
        std::cout << "rep " << r.repetition << " " << to_string(r.kind) << ": d_ra " << std::fixed
                  << std::setprecision(4) << r.ra.mean << " d_spear " << r.spear.mean << " d_acc " << r.acc.mean
                  << " (train " << std::setprecision(1) << r.train_seconds << " s)" << std::endl;
      });
      write_file_atomic(exp_out, harness::experiment_csv(
                                     report, {"command=experiment", "problem=" + exp_problem,
                                              "n_instances=" + std::to_string(exp_spec.n_instances),
                                              "n_objects=" + std::to_string(exp_spec.n_objects),
                                              "dim=" + std::to_string(exp_spec.dim),
                                              "train_fraction=" + std::to_string(exp_fraction),
                                              "repetitions=" + std::to_string(exp_reps), "models=" + exp_models,
                                              "config=" + (exp_config.empty() ? "built-in" : exp_config),
                                              seed_line(exp_seed)}));
      return 0;
    }
  } catch (const nn::DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return 0;
}
