#pragma once

// Trainable scoring architectures behind one contract: fit on a Dataset,
// score a task of any size, predict a Ranking.

#include "ctxrank/dataset.hpp"
#include "ctxrank/losses.hpp"
#include "ctxrank/nn.hpp"
#include "ctxrank/ranking.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ctxrank {

enum class RankerKind { feta, fate, ranknet, listnet, err };
enum class LossKind { hinge, pl, ranknet, listnet };

std::string_view to_string(RankerKind kind);
std::string_view to_string(LossKind kind);
RankerKind parse_ranker_kind(std::string_view name);
LossKind parse_loss_kind(std::string_view name);

// The loss used when none is requested explicitly.
LossKind default_loss(RankerKind kind);
// Throws std::invalid_argument if the pairing is not supported.
void check_compatible(RankerKind kind, LossKind loss);

struct Architecture {
  std::vector<int> hidden{32, 32};     // FETA pair net, FATE joint net, latent scorer
  std::vector<int> zeroth_hidden{32};  // FETA zeroth-order net
  std::vector<int> embed_hidden{32};   // FATE embedding net
  int embedding_width = 16;
  int listnet_k = 3;
  double ridge = 1e-6;  // ERR
  // Network kinds: standardize each feature with the training-set mean and
  // standard deviation before scoring.
  bool standardize = true;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// pair_net maps [x_i; x_j] (2d) to the two comparator heads (N+, N-).
struct FetaNetModel {
  nn::DenseNet<> pair_net;
  nn::DenseNet<> zeroth_net;
};

// embed_net maps x (d) to phi(x) (m); joint_net maps [x; mu_Q] (d+m) to a score.
struct FateNetModel {
  nn::DenseNet<> embed_net;
  nn::DenseNet<> joint_net;
};

// Context-free deep scorer shared by the RankNet and ListNet baselines.
struct LatentNetModel {
  nn::DenseNet<> net;
};

struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

struct ScoringModel {
  RankerKind kind = RankerKind::fate;
  int dim = 0;
  Architecture arch;
  std::variant<FetaNetModel, FateNetModel, LatentNetModel, LinearModel> params;
  // Per-feature affine map x' = (x - shift) .* scale applied before the
  // networks; empty vectors mean identity.
  Eigen::VectorXd input_shift;
  Eigen::VectorXd input_scale;
};

// Objects as the networks of `model` see them.
Eigen::MatrixXd network_input(const ScoringModel& model, const Eigen::MatrixXd& objects);

// Network evaluation counts, in objects (or object pairs) processed.
struct ScoreStats {
  long pair_evals = 0;
  long zeroth_evals = 0;
  long embed_evals = 0;
  long joint_evals = 0;
  long latent_evals = 0;
};

// First-order aggregation: s_i = u0(i) + 1/(n-1) * sum_{j != i} u1(i, j),
// and s = u0 for a single object.
template <typename U0, typename U1>
Eigen::VectorXd feta_aggregate(int n, U0&& u0, U1&& u1) {
  Eigen::VectorXd s(n);
  for (int i = 0; i < n; ++i) {
    double support = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) support += u1(i, j);
    s(i) = u0(i) + (n > 1 ? support / (n - 1) : 0.0);
  }
  return s;
}

Eigen::VectorXd feta_score(const FetaNetModel& model, const Eigen::MatrixXd& objects, ScoreStats* stats = nullptr);
Eigen::VectorXd fate_score(const FateNetModel& model, const Eigen::MatrixXd& objects, ScoreStats* stats = nullptr);
Eigen::VectorXd latent_score(const LatentNetModel& model, const Eigen::MatrixXd& objects,
                             ScoreStats* stats = nullptr);
Eigen::VectorXd linear_score(const LinearModel& model, const Eigen::MatrixXd& objects);

Eigen::VectorXd score(const ScoringModel& model, const Eigen::MatrixXd& objects, ScoreStats* stats = nullptr);
Ranking predict(const ScoringModel& model, const Eigen::MatrixXd& objects);

// Freshly initialized model of the given kind (ERR gets a zero linear model).
ScoringModel init_model(RankerKind kind, int dim, const Architecture& arch, std::uint64_t seed);

// Networks of a model in their fixed serialization order.
std::vector<nn::DenseNet<>*> networks(ScoringModel& model);
std::vector<const nn::DenseNet<>*> networks(const ScoringModel& model);

LossValue<double> evaluate_loss(LossKind loss, const Eigen::VectorXd& scores, const Ranking& truth, int listnet_k);

struct TaskGradient {
  double loss = 0.0;
  std::vector<nn::ParamGrads<>> grads;  // aligned with networks(model)
};

// Loss on one instance and its exact gradient w.r.t. every network parameter.
TaskGradient task_gradient(const ScoringModel& model, const Instance& instance, LossKind loss);

// weight * sum of task losses over the batch and its gradient, computed in
// one pass over all objects of the batch.
TaskGradient batch_gradient(const ScoringModel& model, std::span<const Instance* const> batch, LossKind loss,
                            double weight);

// Ridge least squares on targets 1 - position/(n-1); the intercept is not
// penalized. ridge == 0 with a singular system throws std::domain_error.
LinearModel err_fit(const Dataset& data, double ridge);

// Ridge regression of `targets` on the columns of `features` (dim x samples).
LinearModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double ridge);

struct TrainResult {
  ScoringModel model;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

TrainResult train_ranker(RankerKind kind, const Dataset& data, const Architecture& arch, LossKind loss,
                         const nn::TrainConfig& cfg);

// `count` random subsets of `size` items with their induced sub-rankings.
Dataset sample_subrankings(const Instance& instance, int size, int count, std::uint64_t seed);

// {"format":"ctxrank-model","version":1,"kind":...,"dim":...,"arch":{...},"params":[...]}
std::string serialize_model(const ScoringModel& model);
ScoringModel deserialize_model(std::string_view text);
void save_model(const std::filesystem::path& path, const ScoringModel& model);
ScoringModel load_model(const std::filesystem::path& path);

}  // namespace ctxrank
