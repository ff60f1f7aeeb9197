#include "ctxrank/rankers.hpp"

#include "ctxrank/random.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ctxrank {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(RankerKind kind) {
  switch (kind) {
    case RankerKind::feta: return "feta";
    case RankerKind::fate: return "fate";
    case RankerKind::ranknet: return "ranknet";
    case RankerKind::listnet: return "listnet";
    case RankerKind::err: return "err";
  }
  return "?";
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::hinge: return "hinge";
    case LossKind::pl: return "pl";
    case LossKind::ranknet: return "ranknet";
    case LossKind::listnet: return "listnet";
  }
  return "?";
}

RankerKind parse_ranker_kind(std::string_view name) {
  for (auto k : {RankerKind::feta, RankerKind::fate, RankerKind::ranknet, RankerKind::listnet, RankerKind::err})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

LossKind parse_loss_kind(std::string_view name) {
  for (auto k : {LossKind::hinge, LossKind::pl, LossKind::ranknet, LossKind::listnet})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

LossKind default_loss(RankerKind kind) {
  switch (kind) {
    case RankerKind::ranknet: return LossKind::ranknet;
    case RankerKind::listnet: return LossKind::listnet;
    default: return LossKind::hinge;
  }
}

void check_compatible(RankerKind kind, LossKind loss) {
  bool ok = false;
  switch (kind) {
    case RankerKind::feta:
    case RankerKind::fate: ok = loss == LossKind::hinge || loss == LossKind::pl; break;
    case RankerKind::ranknet: ok = loss == LossKind::ranknet; break;
    case RankerKind::listnet: ok = loss == LossKind::listnet; break;
    case RankerKind::err: ok = true; break;
  }
  if (!ok)
    throw std::invalid_argument("loss '" + std::string(to_string(loss)) + "' cannot train model '" +
                                std::string(to_string(kind)) + "'");
}

namespace {

std::vector<int> sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

void check_dim(const nn::DenseNet<>& net, Eigen::Index expected_in, const MatrixXd& objects) {
  if (objects.cols() < 1) throw std::invalid_argument("cannot score an empty task");
  if (objects.rows() != expected_in)
    throw std::invalid_argument("task feature dimension " + std::to_string(objects.rows()) +
                                " does not match model dimension " + std::to_string(expected_in));
  (void)net;
}

bool column_less(const MatrixXd& x, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (x(r, a) < x(r, b)) return true;
    if (x(r, a) > x(r, b)) return false;
  }
  return false;
}

// Columns in lexicographic feature order (stable), used wherever a result
// must not depend on the presentation order of the task.
std::vector<int> lexicographic_order(const MatrixXd& x) {
  std::vector<int> order(x.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return column_less(x, a, b); });
  return order;
}

// Several tasks stored side by side: task t owns columns [offsets[t], offsets[t+1]).
struct Block {
  MatrixXd x;
  std::vector<Eigen::Index> offsets{0};

  int tasks() const { return static_cast<int>(offsets.size()) - 1; }
  Eigen::Index begin(int t) const { return offsets[t]; }
  Eigen::Index size(int t) const { return offsets[t + 1] - offsets[t]; }
};

Block single(const MatrixXd& x) { return Block{x, {0, x.cols()}}; }

// One comparator evaluation covers both directed values of an unordered pair.
struct PairSlot {
  Eigen::Index first;   // receives the N+ head
  Eigen::Index second;  // receives the N- head
  double weight;        // 1 / (n - 1) of the owning task
  bool tied;            // identical features: both directions get the head average
};

struct FetaPass {
  VectorXd scores;
  nn::ForwardResult<> zeroth;
  nn::ForwardResult<> pair;
  std::vector<PairSlot> slots;
};

FetaPass feta_forward(const FetaNetModel& model, const Block& block, bool keep_tape) {
  const MatrixXd& x = block.x;
  const auto d = x.rows();
  check_dim(model.zeroth_net, model.zeroth_net.input_width(), x);
  if (model.pair_net.input_width() != 2 * d || model.pair_net.output_width() != 2)
    throw std::invalid_argument("FETA pair net shape does not match task dimension");

  FetaPass pass;
  if (keep_tape)
    pass.zeroth = nn::forward(model.zeroth_net, x);
  else
    pass.zeroth.output = nn::evaluate(model.zeroth_net, x);
  pass.scores = pass.zeroth.output.row(0).transpose();

  Eigen::Index pairs = 0;
  for (int t = 0; t < block.tasks(); ++t) pairs += block.size(t) * (block.size(t) - 1) / 2;
  if (pairs == 0) return pass;

  MatrixXd pair_in(2 * d, pairs);
  pass.slots.reserve(pairs);
  Eigen::Index p = 0;
  for (int t = 0; t < block.tasks(); ++t) {
    const Eigen::Index b = block.begin(t);
    const Eigen::Index n = block.size(t);
    const double w = n > 1 ? 1.0 / static_cast<double>(n - 1) : 0.0;
    for (Eigen::Index i = b; i < b + n; ++i)
      for (Eigen::Index j = i + 1; j < b + n; ++j, ++p) {
        PairSlot slot{i, j, w, false};
        if (column_less(x, j, i))
          slot = {j, i, w, false};
        else if (!column_less(x, i, j))
          slot.tied = true;
        pair_in.col(p) << x.col(slot.first), x.col(slot.second);
        pass.slots.push_back(slot);
      }
  }
  if (keep_tape)
    pass.pair = nn::forward(model.pair_net, pair_in);
  else
    pass.pair.output = nn::evaluate(model.pair_net, pair_in);

  VectorXd support = VectorXd::Zero(x.cols());
  for (Eigen::Index q = 0; q < pairs; ++q) {
    const auto& s = pass.slots[q];
    double forward_value = pass.pair.output(0, q);
    double backward_value = pass.pair.output(1, q);
    if (s.tied) forward_value = backward_value = 0.5 * (forward_value + backward_value);
    support(s.first) += forward_value;
    support(s.second) += backward_value;
  }
  for (int t = 0; t < block.tasks(); ++t)
    if (block.size(t) > 1)
      pass.scores.segment(block.begin(t), block.size(t)) +=
          support.segment(block.begin(t), block.size(t)) / static_cast<double>(block.size(t) - 1);
  return pass;
}

// Gradient w.r.t. the pair-net outputs given the gradient w.r.t. the scores.
MatrixXd feta_pair_grad(const FetaPass& pass, const VectorXd& d_scores) {
  MatrixXd d_pair(2, static_cast<Eigen::Index>(pass.slots.size()));
  for (std::size_t q = 0; q < pass.slots.size(); ++q) {
    const auto& s = pass.slots[q];
    const auto c = static_cast<Eigen::Index>(q);
    if (s.tied) {
      const double g = 0.5 * s.weight * (d_scores(s.first) + d_scores(s.second));
      d_pair(0, c) = g;
      d_pair(1, c) = g;
    } else {
      d_pair(0, c) = s.weight * d_scores(s.first);
      d_pair(1, c) = s.weight * d_scores(s.second);
    }
  }
  return d_pair;
}

struct FatePass {
  VectorXd scores;
  nn::ForwardResult<> embed;
  nn::ForwardResult<> joint;
};

FatePass fate_forward(const FateNetModel& model, const Block& block, bool keep_tape) {
  const MatrixXd& x = block.x;
  const auto d = x.rows();
  check_dim(model.embed_net, model.embed_net.input_width(), x);
  const auto m = model.embed_net.output_width();
  if (model.joint_net.input_width() != d + m) throw std::invalid_argument("FATE joint net shape mismatch");

  FatePass pass;
  if (keep_tape)
    pass.embed = nn::forward(model.embed_net, x);
  else
    pass.embed.output = nn::evaluate(model.embed_net, x);

  MatrixXd joint_in(d + m, x.cols());
  joint_in.topRows(d) = x;
  for (int t = 0; t < block.tasks(); ++t) {
    const Eigen::Index b = block.begin(t);
    const Eigen::Index n = block.size(t);
    VectorXd mu = VectorXd::Zero(m);
    for (int c : lexicographic_order(x.middleCols(b, n))) mu += pass.embed.output.col(b + c);
    mu /= static_cast<double>(n);
    joint_in.block(d, b, m, n) = mu.replicate(1, n);
  }
  if (keep_tape)
    pass.joint = nn::forward(model.joint_net, joint_in);
  else
    pass.joint.output = nn::evaluate(model.joint_net, joint_in);
  pass.scores = pass.joint.output.row(0).transpose();
  return pass;
}

// Gradient w.r.t. the embeddings from the joint net's input gradient: each
// object receives its task's mean-pooled d(mu) / n.
MatrixXd fate_embed_grad(const Block& block, const MatrixXd& joint_input_grad, Eigen::Index m) {
  const auto d = block.x.rows();
  MatrixXd d_embed(m, block.x.cols());
  for (int t = 0; t < block.tasks(); ++t) {
    const Eigen::Index b = block.begin(t);
    const Eigen::Index n = block.size(t);
    const VectorXd d_mu = joint_input_grad.block(d, b, m, n).rowwise().sum() / static_cast<double>(n);
    d_embed.middleCols(b, n) = d_mu.replicate(1, n);
  }
  return d_embed;
}

}  // namespace

VectorXd feta_score(const FetaNetModel& model, const MatrixXd& objects, ScoreStats* stats) {
  auto pass = feta_forward(model, single(objects), false);
  if (stats) {
    const long n = objects.cols();
    stats->zeroth_evals += n;
    stats->pair_evals += n * (n - 1) / 2;
  }
  return std::move(pass.scores);
}

VectorXd fate_score(const FateNetModel& model, const MatrixXd& objects, ScoreStats* stats) {
  auto pass = fate_forward(model, single(objects), false);
  if (stats) {
    stats->embed_evals += objects.cols();
    stats->joint_evals += objects.cols();
  }
  return std::move(pass.scores);
}

VectorXd latent_score(const LatentNetModel& model, const MatrixXd& objects, ScoreStats* stats) {
  check_dim(model.net, model.net.input_width(), objects);
  if (stats) stats->latent_evals += objects.cols();
  return nn::evaluate(model.net, objects).row(0).transpose();
}

VectorXd linear_score(const LinearModel& model, const MatrixXd& objects) {
  if (objects.rows() != model.weights.size()) throw std::invalid_argument("linear model dimension mismatch");
  VectorXd s = objects.transpose() * model.weights;
  s.array() += model.bias;
  return s;
}

MatrixXd network_input(const ScoringModel& model, const MatrixXd& objects) {
  if (model.input_shift.size() == 0) return objects;
  if (objects.rows() != model.input_shift.size())
    throw std::invalid_argument("task feature dimension " + std::to_string(objects.rows()) +
                                " does not match the model's " + std::to_string(model.input_shift.size()));
  return ((objects.colwise() - model.input_shift).array().colwise() * model.input_scale.array()).matrix();
}

VectorXd score(const ScoringModel& model, const MatrixXd& raw, ScoreStats* stats) {
  if (std::holds_alternative<LinearModel>(model.params)) return linear_score(std::get<LinearModel>(model.params), raw);
  const MatrixXd objects = network_input(model, raw);
  return std::visit(
      [&](const auto& p) -> VectorXd {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FetaNetModel>)
          return feta_score(p, objects, stats);
        else if constexpr (std::is_same_v<T, FateNetModel>)
          return fate_score(p, objects, stats);
        else if constexpr (std::is_same_v<T, LatentNetModel>)
          return latent_score(p, objects, stats);
        else
          return linear_score(p, objects);
      },
      model.params);
}

Ranking predict(const ScoringModel& model, const MatrixXd& objects) {
  return rank_from_scores(score(model, objects));
}

ScoringModel init_model(RankerKind kind, int dim, const Architecture& arch, std::uint64_t seed) {
  if (dim <= 0) throw std::invalid_argument("model dimension must be positive");
  ScoringModel model;
  model.kind = kind;
  model.dim = dim;
  model.arch = arch;
  switch (kind) {
    case RankerKind::feta: {
      FetaNetModel m;
      m.pair_net = nn::net_init<double>(sizes(2 * dim, arch.hidden, 2), derive_seed(seed, 1));
      m.zeroth_net = nn::net_init<double>(sizes(dim, arch.zeroth_hidden, 1), derive_seed(seed, 2));
      model.params = std::move(m);
      break;
    }
    case RankerKind::fate: {
      if (arch.embedding_width < 1) throw std::invalid_argument("embedding width must be positive");
      FateNetModel m;
      m.embed_net = nn::net_init<double>(sizes(dim, arch.embed_hidden, arch.embedding_width), derive_seed(seed, 1));
      m.joint_net = nn::net_init<double>(sizes(dim + arch.embedding_width, arch.hidden, 1), derive_seed(seed, 2));
      model.params = std::move(m);
      break;
    }
    case RankerKind::ranknet:
    case RankerKind::listnet:
      model.params = LatentNetModel{nn::net_init<double>(sizes(dim, arch.hidden, 1), derive_seed(seed, 1))};
      break;
    case RankerKind::err: model.params = LinearModel{VectorXd::Zero(dim), 0.0}; break;
  }
  return model;
}

std::vector<nn::DenseNet<>*> networks(ScoringModel& model) {
  return std::visit(
      [](auto& p) -> std::vector<nn::DenseNet<>*> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FetaNetModel>)
          return {&p.pair_net, &p.zeroth_net};
        else if constexpr (std::is_same_v<T, FateNetModel>)
          return {&p.embed_net, &p.joint_net};
        else if constexpr (std::is_same_v<T, LatentNetModel>)
          return {&p.net};
        else
          return {};
      },
      model.params);
}

std::vector<const nn::DenseNet<>*> networks(const ScoringModel& model) {
  auto nets = networks(const_cast<ScoringModel&>(model));
  return {nets.begin(), nets.end()};
}

LossValue<double> evaluate_loss(LossKind loss, const VectorXd& scores, const Ranking& truth, int listnet_k) {
  switch (loss) {
    case LossKind::hinge: return hinge_rank_loss(truth, scores);
    case LossKind::pl: return pl_loss(truth, scores);
    case LossKind::ranknet: return ranknet_loss(truth, scores);
    case LossKind::listnet: return listnet_topk_loss(truth, scores, listnet_k);
  }
  throw std::invalid_argument("unknown loss");
}

TaskGradient batch_gradient(const ScoringModel& model, std::span<const Instance* const> batch, LossKind loss,
                            double weight) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  if (std::holds_alternative<LinearModel>(model.params))
    throw std::invalid_argument("linear models are fitted in closed form, not by gradient descent");
  Block block;
  Eigen::Index total = 0;
  for (const auto* inst : batch) {
    if (inst->objects.cols() < 1) throw std::invalid_argument("cannot score an empty task");
    total += inst->objects.cols();
    block.offsets.push_back(total);
  }
  block.x.resize(batch.front()->objects.rows(), total);
  for (int t = 0; t < block.tasks(); ++t) {
    if (batch[t]->objects.rows() != block.x.rows()) throw std::invalid_argument("batch mixes feature dimensions");
    block.x.middleCols(block.begin(t), block.size(t)) = batch[t]->objects;
  }
  block.x = network_input(model, block.x);

  const int k = model.arch.listnet_k;
  TaskGradient out;
  // Per-task loss on the score segment; returns d(weight * loss)/d(scores).
  auto losses = [&](const VectorXd& scores) {
    if (!scores.allFinite()) throw nn::DivergenceError("non-finite scores");
    VectorXd d_scores(scores.size());
    for (int t = 0; t < block.tasks(); ++t) {
      const auto lv = evaluate_loss(loss, scores.segment(block.begin(t), block.size(t)), batch[t]->ranking, k);
      out.loss += weight * lv.value;
      d_scores.segment(block.begin(t), block.size(t)) = weight * lv.grad;
    }
    return d_scores;
  };

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FetaNetModel>) {
          auto pass = feta_forward(p, block, true);
          const VectorXd d_scores = losses(pass.scores);
          if (pass.slots.empty())
            out.grads.push_back(nn::zeros_like(p.pair_net));
          else
            out.grads.push_back(
                nn::backward(p.pair_net, std::move(pass.pair.tape), feta_pair_grad(pass, d_scores)).grads);
          out.grads.push_back(nn::backward(p.zeroth_net, std::move(pass.zeroth.tape), d_scores.transpose()).grads);
        } else if constexpr (std::is_same_v<T, FateNetModel>) {
          auto pass = fate_forward(p, block, true);
          const VectorXd d_scores = losses(pass.scores);
          auto joint = nn::backward(p.joint_net, std::move(pass.joint.tape), d_scores.transpose());
          const MatrixXd d_embed = fate_embed_grad(block, joint.input_grad, p.embed_net.output_width());
          auto embed = nn::backward(p.embed_net, std::move(pass.embed.tape), d_embed);
          out.grads.push_back(std::move(embed.grads));
          out.grads.push_back(std::move(joint.grads));
        } else if constexpr (std::is_same_v<T, LatentNetModel>) {
          check_dim(p.net, p.net.input_width(), block.x);
          auto fwd = nn::forward(p.net, block.x);
          const VectorXd d_scores = losses(fwd.output.row(0).transpose());
          out.grads.push_back(nn::backward(p.net, std::move(fwd.tape), d_scores.transpose()).grads);
        }
      },
      model.params);
  return out;
}

TaskGradient task_gradient(const ScoringModel& model, const Instance& instance, LossKind loss) {
  const Instance* one[] = {&instance};
  return batch_gradient(model, one, loss, 1.0);
}

LinearModel ridge_fit(const MatrixXd& features, const VectorXd& targets, double ridge) {
  if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be nonnegative");
  if (features.cols() != targets.size() || features.cols() == 0)
    throw std::invalid_argument("ridge_fit: need one target per sample");
  const auto d = features.rows();
  MatrixXd design(d + 1, features.cols());
  design.topRows(d) = features;
  design.row(d).setOnes();
  MatrixXd normal = design * design.transpose();
  normal.topLeftCorner(d, d).diagonal().array() += ridge;
  const VectorXd rhs = design * targets;

  Eigen::ColPivHouseholderQR<MatrixXd> qr(normal);
  if (qr.rank() < d + 1)
    throw std::domain_error("normal equations are singular; use a positive ridge penalty");
  const VectorXd coef = qr.solve(rhs);
  return LinearModel{coef.head(d), coef(d)};
}

LinearModel err_fit(const Dataset& data, double ridge) {
  if (data.instances.empty()) throw std::invalid_argument("err_fit: empty dataset");
  Eigen::Index total = 0;
  for (const auto& inst : data.instances)
    if (inst.size() >= 2) total += inst.size();
  if (total == 0) throw std::invalid_argument("err_fit: no task with at least two objects");
  MatrixXd features(data.dim, total);
  VectorXd targets(total);
  Eigen::Index col = 0;
  for (const auto& inst : data.instances) {
    const int n = inst.size();
    if (n < 2) continue;
    for (int i = 0; i < n; ++i, ++col) {
      features.col(col) = inst.objects.col(i);
      targets(col) = 1.0 - static_cast<double>(inst.ranking[i]) / (n - 1);
    }
  }
  return ridge_fit(features, targets, ridge);
}

namespace {

void standardize_inputs(ScoringModel& model, const Dataset& data) {
  VectorXd sum = VectorXd::Zero(data.dim);
  VectorXd sq = VectorXd::Zero(data.dim);
  double count = 0.0;
  for (const auto& inst : data.instances) {
    sum += inst.objects.rowwise().sum();
    count += static_cast<double>(inst.size());
  }
  const VectorXd mean = sum / count;
  for (const auto& inst : data.instances) sq += (inst.objects.colwise() - mean).rowwise().squaredNorm();
  model.input_shift = mean;
  model.input_scale = VectorXd::Ones(data.dim);
  for (int r = 0; r < data.dim; ++r) {
    const double sd = count > 1 ? std::sqrt(sq(r) / (count - 1)) : 0.0;
    if (sd > 0.0 && std::isfinite(sd)) model.input_scale(r) = 1.0 / sd;
  }
}

}  // namespace

TrainResult train_ranker(RankerKind kind, const Dataset& data, const Architecture& arch, LossKind loss,
                         const nn::TrainConfig& cfg) {
  cfg.validate();
  check_compatible(kind, loss);
  if (data.instances.empty()) throw std::invalid_argument("train_ranker: empty dataset");
  data.validate();

  TrainResult result;
  result.model = init_model(kind, data.dim, arch, cfg.seed);
  if (kind == RankerKind::err) {
    result.model.params = err_fit(data, arch.ridge);
    return result;
  }

  if (arch.standardize) standardize_inputs(result.model, data);

  auto nets = networks(result.model);
  std::vector<nn::ParamGrads<>> velocity;
  for (auto* net : nets) velocity.push_back(nn::zeros_like(*net));

  std::mt19937_64 rng(derive_seed(cfg.seed, 0x7a11));
  std::vector<std::size_t> order(data.instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    nn::TrainConfig step_cfg = cfg;
    step_cfg.learning_rate = cfg.epoch_learning_rate(epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Instance*> batch;
      for (std::size_t b = start; b < stop; ++b) batch.push_back(&data.instances[order[b]]);
      TaskGradient bg;
      try {
        bg = batch_gradient(result.model, batch, loss, 1.0 / static_cast<double>(batch.size()));
      } catch (const nn::DivergenceError&) {
        throw nn::DivergenceError("non-finite scores in epoch " + std::to_string(epoch), epoch);
      }
      if (!std::isfinite(bg.loss))
        throw nn::DivergenceError("non-finite training loss in epoch " + std::to_string(epoch), epoch);
      epoch_loss += bg.loss * static_cast<double>(batch.size());
      try {
        for (std::size_t k = 0; k < nets.size(); ++k) nn::nesterov_step(*nets[k], bg.grads[k], velocity[k], step_cfg);
      } catch (const nn::DivergenceError&) {
        throw nn::DivergenceError("non-finite gradient in epoch " + std::to_string(epoch), epoch);
      }
    }
    for (auto* net : nets)
      if (!net->all_finite())
        throw nn::DivergenceError("non-finite parameter in epoch " + std::to_string(epoch), epoch);
    result.loss_trace.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

Dataset sample_subrankings(const Instance& instance, int size, int count, std::uint64_t seed) {
  const int n = instance.size();
  if (size < 2 || size > n) throw std::invalid_argument("subranking size must lie in [2, task size]");
  if (count < 0) throw std::invalid_argument("subranking count must be nonnegative");
  Dataset out;
  out.dim = static_cast<int>(instance.objects.rows());
  std::mt19937_64 rng(seed);
  std::vector<int> pool(n);
  for (int c = 0; c < count; ++c) {
    std::iota(pool.begin(), pool.end(), 0);
    for (int k = 0; k < size; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    std::vector<int> chosen(pool.begin(), pool.begin() + size);
    std::sort(chosen.begin(), chosen.end());

    Instance sub;
    sub.objects.resize(out.dim, size);
    std::vector<int> by_position(size);
    std::iota(by_position.begin(), by_position.end(), 0);
    for (int k = 0; k < size; ++k) sub.objects.col(k) = instance.objects.col(chosen[k]);
    std::sort(by_position.begin(), by_position.end(),
              [&](int a, int b) { return instance.ranking[chosen[a]] < instance.ranking[chosen[b]]; });
    sub.ranking = Ranking::from_ordering(by_position);
    out.instances.push_back(std::move(sub));
  }
  return out;
}

namespace {

using nlohmann::json;

json arch_to_json(const Architecture& a) {
  return json{{"hidden", a.hidden},
              {"zeroth_hidden", a.zeroth_hidden},
              {"embed_hidden", a.embed_hidden},
              {"embedding_width", a.embedding_width},
              {"listnet_k", a.listnet_k},
              {"ridge", a.ridge},
              {"standardize", a.standardize}};
}

Architecture arch_from_json(const json& j) {
  Architecture a;
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.zeroth_hidden = j.at("zeroth_hidden").get<std::vector<int>>();
  a.embed_hidden = j.at("embed_hidden").get<std::vector<int>>();
  a.embedding_width = j.at("embedding_width").get<int>();
  a.listnet_k = j.at("listnet_k").get<int>();
  a.ridge = j.at("ridge").get<double>();
  a.standardize = j.at("standardize").get<bool>();
  return a;
}

}  // namespace

std::string serialize_model(const ScoringModel& model) {
  std::vector<double> params;
  if (const auto* lin = std::get_if<LinearModel>(&model.params)) {
    params.assign(lin->weights.data(), lin->weights.data() + lin->weights.size());
    params.push_back(lin->bias);
  } else {
    for (const auto* net : networks(model)) nn::flatten_into(*net, params);
  }
  const json j = {{"format", "ctxrank-model"},
                  {"version", 1},
                  {"kind", std::string(to_string(model.kind))},
                  {"dim", model.dim},
                  {"arch", arch_to_json(model.arch)},
                  {"input_shift", std::vector<double>(model.input_shift.begin(), model.input_shift.end())},
                  {"input_scale", std::vector<double>(model.input_scale.begin(), model.input_scale.end())},
                  {"params", params}};
  return j.dump() + "\n";
}

ScoringModel deserialize_model(std::string_view text) {
  const json j = json::parse(text);
  if (j.value("format", "") != "ctxrank-model") throw std::invalid_argument("not a ctxrank model document");
  if (j.value("version", 0) != 1) throw std::invalid_argument("unsupported model version");
  const auto kind = parse_ranker_kind(j.at("kind").get<std::string>());
  const int dim = j.at("dim").get<int>();
  ScoringModel model = init_model(kind, dim, arch_from_json(j.at("arch")), 0);
  const auto params = j.at("params").get<std::vector<double>>();
  std::size_t used = 0;
  if (auto* lin = std::get_if<LinearModel>(&model.params)) {
    if (params.size() != static_cast<std::size_t>(dim) + 1) throw std::invalid_argument("parameter count mismatch");
    for (int i = 0; i < dim; ++i) lin->weights(i) = params[i];
    lin->bias = params[dim];
    used = params.size();
  } else {
    for (auto* net : networks(model))
      used += nn::unflatten_from(*net, std::span<const double>(params).subspan(used));
  }
  if (used != params.size()) throw std::invalid_argument("parameter count mismatch");
  const auto shift = j.at("input_shift").get<std::vector<double>>();
  const auto scale = j.at("input_scale").get<std::vector<double>>();
  if (shift.size() != scale.size() || (!shift.empty() && shift.size() != static_cast<std::size_t>(dim)))
    throw std::invalid_argument("input standardization does not match the model dimension");
  model.input_shift = Eigen::Map<const VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()));
  model.input_scale = Eigen::Map<const VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  return model;
}

void save_model(const std::filesystem::path& path, const ScoringModel& model) {
  write_file_atomic(path, serialize_model(model));
}

ScoringModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace ctxrank
