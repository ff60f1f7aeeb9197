#include "ctxrank/harness.hpp"

#include "ctxrank/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ctxrank::harness {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

Hyperparams default_hyperparams(RankerKind kind) {
  Hyperparams hp;
  hp.loss = default_loss(kind);
  hp.train.learning_rate = 0.01;
  hp.train.momentum = 0.9;
  hp.train.epochs = 100;
  hp.train.batch_size = 32;
  hp.train.l1 = 0.0;
  hp.train.l2 = 1e-6;
  hp.train.final_lr_ratio = 0.01;
  if (kind == RankerKind::fate) {
    // The mean-pooled embedding needs more width and a longer schedule than
    // the pairwise and latent models to resolve neighbour structure.
    hp.arch.embed_hidden = {64, 64};
    hp.arch.embedding_width = 64;
    hp.arch.hidden = {64, 64};
    hp.train.epochs = 300;
    hp.train.l2 = 1e-4;
  }
  return hp;
}

namespace {

json to_json(const Hyperparams& hp) {
  return json{{"loss", std::string(to_string(hp.loss))},
              {"hidden", hp.arch.hidden},
              {"zeroth_hidden", hp.arch.zeroth_hidden},
              {"embed_hidden", hp.arch.embed_hidden},
              {"embedding_width", hp.arch.embedding_width},
              {"listnet_k", hp.arch.listnet_k},
              {"ridge", hp.arch.ridge},
              {"standardize", hp.arch.standardize},
              {"learning_rate", hp.train.learning_rate},
              {"momentum", hp.train.momentum},
              {"epochs", hp.train.epochs},
              {"batch_size", hp.train.batch_size},
              {"l1", hp.train.l1},
              {"l2", hp.train.l2},
              {"final_lr_ratio", hp.train.final_lr_ratio}};
}

Hyperparams from_json(const json& j, RankerKind kind) {
  Hyperparams hp = default_hyperparams(kind);
  if (j.contains("loss")) hp.loss = parse_loss_kind(j.at("loss").get<std::string>());
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  read("hidden", hp.arch.hidden);
  read("zeroth_hidden", hp.arch.zeroth_hidden);
  read("embed_hidden", hp.arch.embed_hidden);
  read("embedding_width", hp.arch.embedding_width);
  read("listnet_k", hp.arch.listnet_k);
  read("ridge", hp.arch.ridge);
  read("standardize", hp.arch.standardize);
  read("learning_rate", hp.train.learning_rate);
  read("momentum", hp.train.momentum);
  read("epochs", hp.train.epochs);
  read("batch_size", hp.train.batch_size);
  read("l1", hp.train.l1);
  read("l2", hp.train.l2);
  read("final_lr_ratio", hp.train.final_lr_ratio);
  hp.train.validate();
  check_compatible(kind, hp.loss);
  return hp;
}

constexpr RankerKind kAllKinds[] = {RankerKind::feta, RankerKind::fate, RankerKind::ranknet, RankerKind::listnet,
                                    RankerKind::err};

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

void write_header(std::ostringstream& os, const std::vector<std::string>& header) {
  for (const auto& line : header) os << "# " << line << '\n';
}

}  // namespace

std::string hyperparams_to_json(const Hyperparams& hp) { return to_json(hp).dump(); }

Hyperparams hyperparams_from_json(const std::string& text, RankerKind kind) {
  return from_json(json::parse(text), kind);
}

std::map<RankerKind, Hyperparams> load_hyperparams(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  const json doc = json::parse(in);
  std::map<RankerKind, Hyperparams> out;
  for (auto kind : kAllKinds) {
    const std::string key(to_string(kind));
    out[kind] = doc.contains(key) ? from_json(doc.at(key), kind) : default_hyperparams(kind);
  }
  return out;
}

std::string defaults_document() {
  json doc = json::object();
  for (auto kind : kAllKinds) doc[std::string(to_string(kind))] = to_json(default_hyperparams(kind));
  return doc.dump(2) + "\n";
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

Summary summarize(std::span<const double> values) { return {mean(values), sample_std(values)}; }

Evaluation evaluate(const Scorer& scorer, const Dataset& data) {
  Evaluation ev;
  for (const auto& inst : data.instances) {
    if (inst.size() < 2) continue;
    const VectorXd s = scorer(inst.objects);
    if (s.size() != inst.size()) throw std::runtime_error("scorer returned the wrong number of scores");
    const Ranking predicted = rank_from_scores(s);
    ev.accuracy.push_back(zero_one_accuracy(inst.ranking, predicted));
    ev.rank_accuracy.push_back(ranking_accuracy(inst.ranking, s));
    ev.spearman.push_back(spearman(inst.ranking, predicted));
  }
  return ev;
}

Evaluation evaluate(const ScoringModel& model, const Dataset& data) {
  if (model.dim != data.dim)
    throw std::invalid_argument("model dimension " + std::to_string(model.dim) + " does not match dataset dimension " +
                                std::to_string(data.dim));
  return evaluate([&](const MatrixXd& x) { return score(model, x); }, data);
}

Evaluation evaluate_oracle(const Dataset& data) {
  Evaluation ev;
  for (const auto& inst : data.instances) {
    if (inst.size() < 2) continue;
    VectorXd s(inst.size());
    for (int i = 0; i < inst.size(); ++i) s(i) = -inst.ranking[i];
    const Ranking predicted = rank_from_scores(s);
    ev.accuracy.push_back(zero_one_accuracy(inst.ranking, predicted));
    ev.rank_accuracy.push_back(ranking_accuracy(inst.ranking, s));
    ev.spearman.push_back(spearman(inst.ranking, predicted));
  }
  return ev;
}

Evaluation evaluate_random(const Dataset& data, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  return evaluate(
      [&](const MatrixXd& x) {
        VectorXd s(x.cols());
        for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = normal(rng);
        return s;
      },
      data);
}

Split split_indices(std::size_t n, double train_fraction, std::uint64_t master_seed, int repetition) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must lie in (0,1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(master_seed, 0x5b1170000ULL + static_cast<std::uint64_t>(repetition)));
  for (std::size_t k = n; k > 1; --k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::swap(idx[k - 1], idx[pick(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  Split split;
  split.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.dim = data.dim;
  out.instances.reserve(indices.size());
  for (auto i : indices) out.instances.push_back(data.instances.at(i));
  return out;
}

std::vector<double> ExperimentReport::metric(RankerKind kind, const std::string& name) const {
  std::vector<double> out;
  for (const auto& r : runs) {
    if (r.kind != kind) continue;
    if (name == "ra")
      out.push_back(r.ra.mean);
    else if (name == "acc")
      out.push_back(r.acc.mean);
    else if (name == "spear")
      out.push_back(r.spear.mean);
    else
      throw std::invalid_argument("unknown metric '" + name + "'");
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const Progress& progress) {
  using clock = std::chrono::steady_clock;
  if (config.repetitions < 1) throw std::invalid_argument("repetitions must be positive");
  ExperimentReport report;
  report.config = config;
  const Dataset all = generate(config.generator);
  for (int rep = 0; rep < config.repetitions; ++rep) {
    const Split split = split_indices(all.size(), config.train_fraction, config.seed, rep);
    const Dataset train = subset(all, split.train);
    const Dataset test = subset(all, split.test);
    for (auto kind : config.rankers) {
      const auto found = config.hyperparams.find(kind);
      Hyperparams hp = found != config.hyperparams.end() ? found->second : default_hyperparams(kind);
      hp.train.seed = derive_seed(config.seed, 1000u * static_cast<unsigned>(rep) + static_cast<unsigned>(kind));

      RepetitionResult r;
      r.repetition = rep;
      r.kind = kind;
      const auto t0 = clock::now();
      const auto trained = train_ranker(kind, train, hp.arch, hp.loss, hp.train);
      const auto t1 = clock::now();
      const Evaluation ev = evaluate(trained.model, test);
      const auto t2 = clock::now();
      r.acc = ev.acc();
      r.ra = ev.ra();
      r.spear = ev.spear();
      r.train_seconds = std::chrono::duration<double>(t1 - t0).count();
      r.eval_seconds = std::chrono::duration<double>(t2 - t1).count();
      if (progress) progress(r);
      report.runs.push_back(r);
    }
  }
  return report;
}

std::vector<SizeResult> generalize(const ScoringModel& model, Problem problem, int dim, std::span<const int> sizes,
                                   int per_size, std::uint64_t seed) {
  std::vector<SizeResult> out;
  for (int size : sizes) {
    if (size < 2) throw std::invalid_argument("generalization sizes must be at least 2");
    GeneratorSpec spec;
    spec.problem = problem;
    spec.n_instances = per_size;
    spec.n_objects = size;
    spec.dim = dim;
    spec.seed = derive_seed(seed, static_cast<std::uint64_t>(size));
    const Dataset data = generate(spec);
    SizeResult row;
    row.size = size;
    std::vector<double> ra;
    for (const auto& inst : data.instances) {
      const VectorXd s = score(model, inst.objects);
      try {
        const Ranking r = rank_from_scores(s);
        if (r.size() != size) row.valid_rankings = false;
      } catch (const std::invalid_argument&) {
        row.valid_rankings = false;
        continue;
      }
      ra.push_back(ranking_accuracy(inst.ranking, s));
    }
    row.ra = summarize(ra);
    out.push_back(row);
  }
  return out;
}

double fitted_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope needs two or more points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

SearchResult random_search(RankerKind kind, const Dataset& data, const Hyperparams& base, int budget,
                           std::uint64_t seed, double validation_fraction) {
  if (budget < 1) throw std::invalid_argument("search budget must be at least 1");
  const Split split = split_indices(data.size(), 1.0 - validation_fraction, seed, 0);
  const Dataset train = subset(data, split.train);
  const Dataset validation = subset(data, split.test);

  std::mt19937_64 rng(derive_seed(seed, 0x5ea7c4));
  auto log_uniform = [&](double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
  };
  auto choice = [&](std::initializer_list<int> options) {
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    return *(options.begin() + pick(rng));
  };

  SearchResult result;
  bool have_best = false;
  for (int t = 0; t < budget; ++t) {
    SearchTrial trial;
    trial.index = t;
    trial.hyperparams = base;
    if (t > 0) {
      auto& hp = trial.hyperparams;
      hp.train.learning_rate = log_uniform(1e-3, 1e-1);
      hp.train.l1 = log_uniform(1e-9, 1e-4);
      hp.train.l2 = log_uniform(1e-9, 1e-3);
      std::uniform_real_distribution<double> mom(0.5, 0.95);
      hp.train.momentum = mom(rng);
      hp.train.batch_size = choice({8, 16, 32, 64});
      const int width = choice({16, 32, 64});
      for (auto& w : hp.arch.hidden) w = width;
    }
    trial.hyperparams.train.seed = derive_seed(seed, static_cast<std::uint64_t>(t) + 1);
    try {
      const auto trained =
          train_ranker(kind, train, trial.hyperparams.arch, trial.hyperparams.loss, trial.hyperparams.train);
      trial.validation_ra = evaluate(trained.model, validation).ra().mean;
    } catch (const nn::DivergenceError&) {
      trial.diverged = true;
    }
    if (!trial.diverged && (!have_best || trial.validation_ra > result.best_validation_ra)) {
      result.best = trial.hyperparams;
      result.best_validation_ra = trial.validation_ra;
      have_best = true;
    }
    result.trials.push_back(std::move(trial));
  }
  if (!have_best) throw nn::DivergenceError("every search trial diverged");
  return result;
}

std::string evaluation_csv(const Evaluation& ev, const std::vector<std::string>& header) {
  std::ostringstream os;
  write_header(os, header);
  os << "metric,mean,std,count\n";
  auto row = [&](const char* name, const std::vector<double>& v) {
    const auto s = summarize(v);
    os << name << ',' << fmt(s.mean) << ',' << fmt(s.std) << ',' << v.size() << '\n';
  };
  row("d_acc", ev.accuracy);
  row("d_ra", ev.rank_accuracy);
  row("d_spear", ev.spearman);
  return os.str();
}

std::string generalize_csv(const std::vector<SizeResult>& rows, const std::vector<std::string>& header) {
  std::ostringstream os;
  write_header(os, header);
  os << "size,d_ra_mean,d_ra_std,valid\n";
  for (const auto& r : rows)
    os << r.size << ',' << fmt(r.ra.mean) << ',' << fmt(r.ra.std) << ',' << (r.valid_rankings ? 1 : 0) << '\n';
  return os.str();
}

std::string trace_csv(const std::vector<double>& trace, const std::vector<std::string>& header) {
  std::ostringstream os;
  write_header(os, header);
  os << "epoch,mean_training_loss\n";
  for (std::size_t e = 0; e < trace.size(); ++e) os << e << ',' << fmt(trace[e], 9) << '\n';
  return os.str();
}

std::string experiment_csv(const ExperimentReport& report, const std::vector<std::string>& header) {
  std::ostringstream os;
  write_header(os, header);
  os << "repetition,model,d_acc,d_ra,d_spear\n";
  for (const auto& r : report.runs)
    os << r.repetition << ',' << to_string(r.kind) << ',' << fmt(r.acc.mean) << ',' << fmt(r.ra.mean) << ','
       << fmt(r.spear.mean) << '\n';
  for (auto kind : report.config.rankers) {
    const auto ra = summarize(report.metric(kind, "ra"));
    const auto acc = summarize(report.metric(kind, "acc"));
    const auto sp = summarize(report.metric(kind, "spear"));
    os << "# summary " << to_string(kind) << " d_acc=" << fmt(acc.mean, 3) << "+-" << fmt(acc.std, 3)
       << " d_ra=" << fmt(ra.mean, 3) << "+-" << fmt(ra.std, 3) << " d_spear=" << fmt(sp.mean, 3) << "+-"
       << fmt(sp.std, 3) << '\n';
  }
  return os.str();
}

std::string search_csv(const SearchResult& result, const std::vector<std::string>& header) {
  std::ostringstream os;
  write_header(os, header);
  os << "trial,validation_d_ra,diverged,hyperparams\n";
  for (const auto& t : result.trials) {
    std::string hp = hyperparams_to_json(t.hyperparams);
    std::replace(hp.begin(), hp.end(), ',', ';');
    os << t.index << ',' << fmt(t.validation_ra) << ',' << (t.diverged ? 1 : 0) << ',' << hp << '\n';
  }
  return os.str();
}

}  // namespace ctxrank::harness
