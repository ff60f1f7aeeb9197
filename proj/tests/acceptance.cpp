// Acceptance suite. Runs every criterion (or those named on the command
// line, e.g. `acceptance 3 4 5`) and prints one PASS/FAIL line per criterion.
// Exit status is nonzero if any selected criterion fails.

#include "check.hpp"

#include "ctxrank/datagen.hpp"
#include "ctxrank/decomposition.hpp"
#include "ctxrank/harness.hpp"
#include "ctxrank/losses.hpp"
#include "ctxrank/rankers.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace ctxrank;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

const fs::path kConfig = fs::path(CTXRANK_SOURCE_DIR) / "config" / "defaults.json";

// Runs one benchmark and prints per-repetition results.
harness::ExperimentReport benchmark(Problem problem, int n_instances, double train_fraction, std::uint64_t seed) {
  harness::ExperimentConfig cfg;
  cfg.generator.problem = problem;
  cfg.generator.n_instances = n_instances;
  cfg.generator.n_objects = 5;
  cfg.generator.dim = 2;
  cfg.generator.seed = seed;
  cfg.train_fraction = train_fraction;
  cfg.repetitions = 3;
  cfg.seed = seed;
  cfg.hyperparams = harness::load_hyperparams(kConfig);
  return harness::run_experiment(cfg, [](const harness::RepetitionResult& r) {
    std::cout << "  rep " << r.repetition << ' ' << std::setw(7) << to_string(r.kind) << ": d_ra " << fmt(r.ra.mean, 4)
              << " d_spear " << fmt(r.spear.mean, 4) << " d_acc " << fmt(r.acc.mean, 4) << " (" << fmt(r.train_seconds, 1)
              << " s)" << std::endl;
  });
}

// Checks FATE > FETA > RankNet > ERR on d_RA in every repetition.
bool strict_ordering(const harness::ExperimentReport& report, std::string& detail) {
  const RankerKind chain[] = {RankerKind::fate, RankerKind::feta, RankerKind::ranknet, RankerKind::err};
  bool ok = true;
  for (int rep = 0; rep < report.config.repetitions; ++rep)
    for (int k = 0; k + 1 < 4; ++k) {
      const double hi = report.metric(chain[k], "ra")[rep];
      const double lo = report.metric(chain[k + 1], "ra")[rep];
      if (!(hi > lo)) {
        ok = false;
        detail += "; rep " + std::to_string(rep) + ": " + std::string(to_string(chain[k])) + " " + fmt(hi, 4) +
                  " <= " + std::string(to_string(chain[k + 1])) + " " + fmt(lo, 4);
      }
    }
  return ok;
}

Outcome medoid_benchmark() {
  const auto report = benchmark(Problem::medoid, 100000, 0.1, 11);
  auto mean = [&](RankerKind k, const char* m) { return harness::mean(report.metric(k, m)); };
  Outcome out;
  const double fate_ra = mean(RankerKind::fate, "ra"), fate_sp = mean(RankerKind::fate, "spear");
  const double feta_ra = mean(RankerKind::feta, "ra"), rn_ra = mean(RankerKind::ranknet, "ra");
  const double err_ra = mean(RankerKind::err, "ra");
  out.detail = "d_RA fate " + fmt(fate_ra) + " (d_Spear " + fmt(fate_sp) + "), feta " + fmt(feta_ra) + ", ranknet " +
               fmt(rn_ra) + ", err " + fmt(err_ra);
  auto require = [&](bool cond, const std::string& what) {
    if (!cond) {
      out.pass = false;
      out.detail += "; " + what;
    }
  };
  require(fate_ra >= 0.85, "FATE d_RA < 0.85");
  require(fate_sp >= 0.78, "FATE d_Spear < 0.78");
  require(feta_ra >= 0.70, "FETA d_RA < 0.70");
  require(std::abs(rn_ra - 0.68) <= 0.04, "RankNet d_RA outside 0.68 +- 0.04");
  require(std::abs(err_ra - 0.50) <= 0.02, "ERR d_RA outside 0.50 +- 0.02");
  if (!strict_ordering(report, out.detail)) out.pass = false;
  return out;
}

Outcome hypervolume_benchmark() {
  const auto report = benchmark(Problem::hypervolume, 30000, 1.0 / 3.0, 12);
  auto ra = [&](RankerKind k) { return harness::mean(report.metric(k, "ra")); };
  Outcome out;
  out.detail = "d_RA fate " + fmt(ra(RankerKind::fate), 4) + ", feta " + fmt(ra(RankerKind::feta), 4) + ", ranknet " +
               fmt(ra(RankerKind::ranknet), 4) + ", err " + fmt(ra(RankerKind::err), 4);
  out.pass = strict_ordering(report, out.detail);
  const double fate = ra(RankerKind::fate);
  if (fate < 0.82) {
    // The absolute level is advisory; only the ordering is binding.
    std::cout << "  warning: FATE d_RA " << fmt(fate) << " below 0.82" << std::endl;
    if (fate < 0.75) {
      out.pass = false;
      out.detail += "; FATE d_RA < 0.75";
    }
  }
  return out;
}

Outcome reconstruction() {
  using namespace decomposition;
  Outcome out;
  long functions = 0, queries = 0, mismatches = 0;
  for (double epsilon : {1e-6, 1.0, 1e3})
    for (int n = 1; n <= 5; ++n) {
      std::mt19937_64 rng(1000 * n + static_cast<int>(std::log10(epsilon) + 10));
      for (int trial = 0; trial < 100; ++trial) {
        const auto rho = random_ranking_function(n, rng);
        const auto report = verify_reconstruction(rho, construct_feta_tables(rho, epsilon));
        ++functions;
        queries += report.queries;
        mismatches += static_cast<long>(report.mismatches.size());
        if (report.queries != (1L << n) - 1) out.pass = false;
      }
    }
  out.pass = out.pass && mismatches == 0;
  out.detail = std::to_string(functions) + " ranking functions, " + std::to_string(queries) + " queries, " +
               std::to_string(mismatches) + " mismatches";
  return out;
}

Outcome worked_example() {
  using namespace decomposition;
  const double support[4][4] = {
      {0.0, 0.7, 0.5, 0.1}, {0.2, 0.0, 0.8, 0.9}, {0.5, 0.2, 0.0, 0.4}, {0.7, 0.1, 0.5, 0.0}};
  UtilityTables tables(4);
  for (int i = 0; i < 4; ++i) {
    tables.set(i, Mask{0}, 0.0);
    for (int j = 0; j < 4; ++j)
      if (i != j) tables.set(i, Mask{1} << j, support[i][j]);
  }
  const char names[] = "abcd";
  auto ranked = [&](std::vector<int> items) {
    const auto order = feta_rank(tables, to_mask(items), 1).ordering();
    std::string s;
    for (int k : order) s += std::string(s.empty() ? "" : ">") + names[items[k]];
    return s;
  };
  const std::string q1 = ranked({0, 1, 2}), q2 = ranked({0, 1, 3});
  const auto s2 = feta_scores(tables, to_mask(std::vector<int>{0, 1, 3}), 1);
  Outcome out;
  out.pass = q1 == "a>b>c" && q2 == "b>a>d" && s2(0) == s2(2);
  out.detail = "{a,b,c} -> " + q1 + ", {a,b,d} -> " + q2 + " (a and d tied at " + fmt(s2(0), 2) + ")";
  return out;
}

struct PropertyTally {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;
};

Outcome property_suite() {
  std::vector<PropertyTally> tallies;
  auto record = [&](const std::string& name, const std::function<double(std::mt19937_64&)>& trial, int cases,
                    double tolerance) {
    PropertyTally t{name};
    std::mt19937_64 rng(std::hash<std::string>{}(name) & 0xffffffu);
    while (t.cases < cases) {
      const double err = trial(rng);
      if (err < 0) continue;  // case skipped (e.g. hinge kink)
      ++t.cases;
      t.worst = std::max(t.worst, err);
      if (!(err <= tolerance)) ++t.failures;
    }
    tallies.push_back(t);
  };

  // (a) analytic gradients vs central differences, relative 1e-4.
  record("net", [](std::mt19937_64& rng) {
    std::uniform_int_distribution<int> width(1, 8), depth(1, 3);
    std::vector<int> sizes{width(rng)};
    for (int k = depth(rng); k > 0; --k) sizes.push_back(width(rng));
    auto net = nn::net_init<double>(sizes, rng());
    for (auto& l : net.layers) l.bias = testing::random_normal(l.bias.size(), rng, 0.5);
    const int batch = width(rng);
    MatrixXd x(sizes.front(), batch), dy(sizes.back(), batch);
    for (int c = 0; c < batch; ++c) {
      x.col(c) = testing::random_normal(sizes.front(), rng);
      dy.col(c) = testing::random_normal(sizes.back(), rng);
    }
    const auto res = nn::backward(net, nn::forward(net, x).tape, dy);
    auto f = [&](const VectorXd& t) {
      auto m = net;
      nn::unflatten_from(m, std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
      return (nn::evaluate(m, x).array() * dy.array()).sum();
    };
    return testing::relative_error(testing::flatten(res.grads),
                                   testing::central_difference(f, testing::flatten(net), 1e-5));
  }, 100, 1e-4);

  auto loss_trial = [](LossKind kind) {
    return [kind](std::mt19937_64& rng) {
      const int n = 2 + static_cast<int>(rng() % 7);
      const auto r = testing::random_ranking(n, rng);
      const VectorXd s = testing::random_normal(n, rng, 2.0);
      if (kind == LossKind::hinge)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            if (i != j && std::abs(std::abs(s(i) - s(j)) - 1.0) < 1e-3) return -1.0;
      const int k = 1 + static_cast<int>(rng() % 4);
      auto f = [&](const VectorXd& x) { return evaluate_loss(kind, x, r, k).value; };
      return testing::relative_error(evaluate_loss(kind, s, r, k).grad, testing::central_difference(f, s));
    };
  };
  record("hinge", loss_trial(LossKind::hinge), 100, 1e-4);
  record("pl", loss_trial(LossKind::pl), 100, 1e-4);
  record("ranknet", loss_trial(LossKind::ranknet), 100, 1e-4);
  record("listnet", loss_trial(LossKind::listnet), 100, 1e-4);

  auto end_to_end = [](RankerKind kind, LossKind loss) {
    return [kind, loss](std::mt19937_64& rng) {
      Architecture arch;
      arch.hidden = {5, 4};
      arch.zeroth_hidden = {4};
      arch.embed_hidden = {5};
      arch.embedding_width = 3;
      const int n = 2 + static_cast<int>(rng() % 3);
      const int d = 1 + static_cast<int>(rng() % 3);
      auto model = init_model(kind, d, arch, rng());
      const Instance inst{testing::random_matrix(d, n, rng), testing::random_ranking(n, rng)};
      const VectorXd s = score(model, inst.objects);
      if (loss == LossKind::hinge)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            if (i != j && std::abs(1.0 - (s(i) - s(j))) < 1e-3) return -1.0;
      const auto tg = task_gradient(model, inst, loss);
      auto f = [&](const VectorXd& t) {
        auto m = model;
        testing::set_model_parameters(m, t);
        return evaluate_loss(loss, score(m, inst.objects), inst.ranking, m.arch.listnet_k).value;
      };
      return testing::relative_error(testing::model_gradient(tg),
                                     testing::central_difference(f, testing::model_parameters(model)));
    };
  };
  record("feta/hinge end-to-end", end_to_end(RankerKind::feta, LossKind::hinge), 100, 1e-4);
  record("feta/pl end-to-end", end_to_end(RankerKind::feta, LossKind::pl), 100, 1e-4);
  record("fate/hinge end-to-end", end_to_end(RankerKind::fate, LossKind::hinge), 100, 1e-4);
  record("fate/pl end-to-end", end_to_end(RankerKind::fate, LossKind::pl), 100, 1e-4);

  // (b) hinge surrogate bounds the 0/1 ranking loss; the tally records the violation.
  record("hinge >= 0/1", [](std::mt19937_64& rng) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const auto r = testing::random_ranking(n, rng);
    const VectorXd s = testing::random_normal(n, rng);
    return std::max(0.0, zero_one_rank_loss(r, s) - hinge_rank_loss(r, s).value);
  }, 1000, 0.0);

  // (c) 2-D sweep vs inclusion-exclusion, absolute 1e-12.
  record("hypervolume sweep", [](std::mt19937_64& rng) {
    const int n = 1 + static_cast<int>(rng() % 8);
    MatrixXd pts(2, n);
    std::uniform_real_distribution<double> u(-1.0, 0.0);
    for (int i = 0; i < n; ++i) pts.col(i) = rng() % 2 ? sample_neg_sphere(2, rng) : VectorXd(Eigen::Vector2d(u(rng), u(rng)));
    double ie = 0.0;
    for (unsigned s = 1; s < (1u << n); ++s) {
      Eigen::Vector2d corner(-1e300, -1e300);
      int k = 0;
      for (int i = 0; i < n; ++i)
        if ((s >> i) & 1u) {
          corner = corner.cwiseMax(pts.col(i));
          ++k;
        }
      ie += (k % 2 ? 1.0 : -1.0) * corner(0) * corner(1);
    }
    return std::abs(hypervolume(pts, VectorXd::Zero(2)) - ie);
  }, 200, 1e-12);

  // (d) permutation equivariance of FETA and FATE scores, 1e-9.
  auto equivariance = [](RankerKind kind) {
    return [kind](std::mt19937_64& rng) {
      const int d = 2 + static_cast<int>(rng() % 2);
      auto model = init_model(kind, d, Architecture{}, rng());
      model.input_shift = testing::random_normal(d, rng);
      model.input_scale = VectorXd::Constant(d, 1.3);
      const int n = 2 + static_cast<int>(rng() % 9);
      MatrixXd x = testing::random_matrix(d, n, rng);
      if (rng() % 5 == 0) x.col(n - 1) = x.col(0);
      const auto perm = testing::random_ranking(n, rng).ordering();
      MatrixXd px(d, n);
      for (int k = 0; k < n; ++k) px.col(k) = x.col(perm[k]);
      const VectorXd s = score(model, x), ps = score(model, px);
      double worst = 0.0;
      for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(ps(k) - s(perm[k])));
      return worst;
    };
  };
  record("feta equivariance", equivariance(RankerKind::feta), 200, 1e-9);
  record("fate equivariance", equivariance(RankerKind::fate), 200, 1e-9);

  Outcome out;
  for (const auto& t : tallies) {
    std::cout << "  " << std::left << std::setw(24) << t.name << std::right << std::setw(5) << t.cases
              << " cases, worst " << std::scientific << std::setprecision(2) << t.worst << std::defaultfloat
              << (t.failures ? "  FAILED " + std::to_string(t.failures) : "") << std::endl;
    if (t.failures) {
      out.pass = false;
      out.detail += (out.detail.empty() ? "" : ", ") + t.name;
    }
  }
  out.detail = out.pass ? std::to_string(tallies.size()) + " property checks within tolerance"
                        : "failed: " + out.detail;
  return out;
}

Outcome generalization() {
  GeneratorSpec spec;
  spec.n_instances = 10000;
  spec.seed = 21;
  const Dataset train = generate(spec);
  const auto hps = harness::load_hyperparams(kConfig);
  auto fit = [&](RankerKind kind) {
    auto hp = hps.at(kind);
    hp.train.seed = 5;
    return train_ranker(kind, train, hp.arch, hp.loss, hp.train).model;
  };
  const auto fate = fit(RankerKind::fate);
  const auto ranknet = fit(RankerKind::ranknet);
  std::vector<int> sizes;
  for (int n = 3; n <= 24; ++n) sizes.push_back(n);
  const auto fate_rows = harness::generalize(fate, Problem::medoid, 2, sizes, 1000, 22);
  const auto rn_rows = harness::generalize(ranknet, Problem::medoid, 2, sizes, 1000, 22);

  Outcome out;
  double fate_min = 1.0;
  std::vector<double> x, y;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    std::cout << "  size " << std::setw(2) << sizes[k] << ": fate " << fmt(fate_rows[k].ra.mean) << " ranknet "
              << fmt(rn_rows[k].ra.mean) << std::endl;
    if (!fate_rows[k].valid_rankings || !rn_rows[k].valid_rankings) out.pass = false;
    if (sizes[k] <= 10) fate_min = std::min(fate_min, fate_rows[k].ra.mean);
    if (sizes[k] >= 5) {
      x.push_back(sizes[k]);
      y.push_back(rn_rows[k].ra.mean);
    }
  }
  const double slope = harness::fitted_slope(x, y);
  out.detail = "FATE min d_RA over sizes 3..10 = " + fmt(fate_min) + ", RankNet slope over 5..24 = " +
               fmt(slope, 4) + (out.pass ? "" : ", invalid ranking produced");
  out.pass = out.pass && fate_min >= 0.75 && slope >= -0.002;
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("ctxrank_acceptance_" + std::to_string(::getpid()));
  const std::string cli = CTXRANK_CLI;
  struct Command {
    std::string args;  // "{dir}": run directory, "{root}": scratch root
    std::vector<std::string> outputs;
  };
  const std::vector<Command> commands = {
      {"generate --problem medoid --n-instances 2000 --seed 1 --out {dir}/m.jsonl", {"m.jsonl"}},
      {"generate --problem hypervolume --n-instances 500 --dim 3 --seed 2 --out {dir}/h.jsonl", {"h.jsonl"}},
      {"train --model fate --data {dir}/m.jsonl --epochs 3 --seed 3 --out {dir}/fate.model",
       {"fate.model", "fate.model.trace.csv"}},
      {"train --model feta --loss pl --data {dir}/m.jsonl --epochs 2 --seed 3 --out {dir}/feta.model",
       {"feta.model", "feta.model.trace.csv"}},
      {"train --model listnet --data {dir}/m.jsonl --epochs 2 --out {dir}/listnet.model",
       {"listnet.model", "listnet.model.trace.csv"}},
      {"train --model err --data {dir}/m.jsonl --out {dir}/err.model", {"err.model", "err.model.trace.csv"}},
      {"evaluate --model {dir}/fate.model --data {dir}/m.jsonl --out {dir}/eval.csv", {"eval.csv"}},
      {"evaluate --model random --data {dir}/m.jsonl --seed 4 --out {dir}/random.csv", {"random.csv"}},
      {"generalize --model {dir}/fate.model --min-size 3 --max-size 8 --n-instances 100 --out {dir}/gen.csv",
       {"gen.csv"}},
      {"verify-feta --n-objects 4 --trials 20 --seed 5 --out {dir}/verify.txt", {"verify.txt"}},
      {"search --model ranknet --data {dir}/m.jsonl --budget 3 --epochs 1 --seed 6 --out {dir}/search.csv "
       "--best {dir}/best.json",
       {"search.csv", "best.json"}},
      {"experiment --problem medoid --n-instances 1000 --repetitions 2 --models err,ranknet "
       "--config {root}/quick.json --seed 7 --out {dir}/exp.csv",
       {"exp.csv"}},
  };
  Outcome out;
  std::set<std::string> differing;
  // Reports record their input paths, so both runs use the same directory;
  // the first run's files are moved aside before the second.
  const fs::path work = root / "work";
  const fs::path first = root / "first";
  fs::create_directories(root);
  {
    auto hp = harness::default_hyperparams(RankerKind::ranknet);
    hp.train.epochs = 1;
    std::ofstream(root / "quick.json") << "{\"ranknet\": " << harness::hyperparams_to_json(hp) << "}\n";
  }
  for (int run = 0; run < 2; ++run) {
    fs::create_directories(work);
    for (const auto& c : commands) {
      std::string args = c.args;
      for (std::size_t p; (p = args.find("{dir}")) != std::string::npos;) args.replace(p, 5, work.string());
      for (std::size_t p; (p = args.find("{root}")) != std::string::npos;) args.replace(p, 6, root.string());
      const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        out.pass = false;
        differing.insert("command failed: " + c.args);
      }
    }
    if (run == 0) fs::rename(work, first);
  }
  int files = 0;
  for (const auto& c : commands)
    for (const auto& f : c.outputs) {
      ++files;
      const auto a = first / f, b = work / f;
      if (!fs::exists(a) || read_file(a) != read_file(b)) differing.insert(f);
    }
  fs::remove_all(root);
  out.pass = out.pass && differing.empty();
  out.detail = std::to_string(commands.size()) + " commands run twice, " + std::to_string(files) + " files compared";
  for (const auto& d : differing) out.detail += "; differs: " + d;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"medoid benchmark", medoid_benchmark},
      {"hypervolume benchmark", hypervolume_benchmark},
      {"tabular FETA reconstruction", reconstruction},
      {"worked example", worked_example},
      {"numerical properties", property_suite},
      {"size generalization", generalization},
      {"CLI determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::vector<std::string> lines;
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    std::cout << "[" << id << "] " << criteria[k].first << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << "criterion " << id << " (" << criteria[k].first << "): " << (o.pass ? "PASS" : "FAIL") << " - "
         << o.detail << " [" << fmt(secs, 1) << " s]";
    std::cout << line.str() << std::endl;
    lines.push_back(line.str());
    all = all && o.pass;
  }
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l << '\n';
  return all ? 0 : 1;
}
