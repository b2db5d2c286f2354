#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avfuse/align.hpp"
#include "avfuse/timeline.hpp"

namespace avfuse {

// (p_real, p_fake)
using ClassProbs = std::array<double, 2>;

enum class Anneal { kCosine, kLinear };
enum class LrPolicy { kOneCycle, kConstant };

std::string_view to_string(Anneal a);
Anneal anneal_from_string(std::string_view s);
std::string_view to_string(LrPolicy p);
LrPolicy lr_policy_from_string(std::string_view s);

// Warm up from max_lr / div_factor to max_lr at step round(pct_start * total),
// then anneal to max_lr / final_div_factor at the last step.
class OneCycleSchedule {
 public:
  OneCycleSchedule(int total_steps, double max_lr, double pct_start = 0.3,
                   double div_factor = 25.0, double final_div_factor = 1e4,
                   Anneal anneal = Anneal::kCosine);

  double lr_at(int step) const;

  int total_steps() const { return total_steps_; }
  int peak_step() const { return peak_step_; }
  double max_lr() const { return max_lr_; }
  double initial_lr() const { return max_lr_ / div_factor_; }
  double final_lr() const { return max_lr_ / final_div_factor_; }

 private:
  int total_steps_;
  double max_lr_;
  double pct_start_;
  double div_factor_;
  double final_div_factor_;
  Anneal anneal_;
  int peak_step_;
};

struct TrainConfig {
  int total_steps = 3000;
  LrPolicy policy = LrPolicy::kOneCycle;
  double max_lr = 0.5;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  Anneal anneal = Anneal::kCosine;
  double momentum = 0.9;
  double weight_decay = 0.0;
  // Loss weight on fake tokens; 1 means unweighted.
  double positive_class_weight = 1.0;
  // Videos per optimizer step. Tokens inside a batch are averaged.
  int batch_videos = 4;
  std::uint64_t seed = 0;
  // Worker threads for per-video gradients; results do not depend on it.
  int threads = 1;
};

struct FusionModel {
  std::size_t input_dim = 0;
  // Row-major 2 x input_dim; row 0 produces the real logit, row 1 the fake one.
  std::vector<double> weights;
  std::array<double, 2> bias{0.0, 0.0};
  StreamLayout stream_layout;
  std::uint64_t seed = 0;
  TrainConfig schedule;

  void validate() const;
  double weight(std::size_t cls, std::size_t j) const { return weights[cls * input_dim + j]; }

  bool operator==(const FusionModel& o) const {
    return input_dim == o.input_dim && weights == o.weights && bias == o.bias &&
           stream_layout == o.stream_layout && seed == o.seed;
  }
};

// uniform(+-1/sqrt(input_dim)) weights, zero bias.
FusionModel init_fusion_model(std::size_t input_dim, std::uint64_t seed,
                              StreamLayout layout = {});

std::vector<ClassProbs> fusion_forward(const FusionModel& model, const FusedFrames& frames);

// p_fake per token.
std::vector<double> fake_scores(std::span<const ClassProbs> probs);

// Mean of -log p_label with probabilities clamped at 1e-12.
double bce_loss(std::span<const ClassProbs> predictions, std::span<const std::uint8_t> labels);

struct TrainingExample {
  FusedFrames frames;
  TokenLabels labels;
};

struct TrainResult {
  FusionModel model;
  std::vector<double> step_losses;   // batch loss before each update
  std::vector<double> epoch_losses;  // full-dataset loss after each completed epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Token-level weighted cross-entropy of `model` over the whole dataset.
double dataset_loss(const FusionModel& model, std::span<const TrainingExample> dataset,
                    double positive_class_weight = 1.0);

// SGD with momentum over shuffled video batches; deterministic given cfg.seed.
TrainResult train_fusion(std::span<const TrainingExample> dataset, const TrainConfig& cfg,
                         StreamLayout layout = {});

// Dense row-major matrix used by the prototype scorer.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

// Class prototypes (one row per class) scored by cosine similarity.
class PrototypeScorer {
 public:
  explicit PrototypeScorer(Matrix prototypes);

  const Matrix& prototypes() const { return prototypes_; }
  std::size_t num_classes() const { return prototypes_.rows; }
  std::size_t dim() const { return prototypes_.cols; }

  // cos(theta_k) between `embedding` and every prototype.
  std::vector<double> cosines(std::span<const double> embedding) const;

 private:
  Matrix prototypes_;
};

// Mean over samples of sum_k (cos_{j,k} - [y_j == k])^2.
double p2sgrad_loss(const Matrix& embeddings, const PrototypeScorer& scorer,
                    std::span<const int> labels);

struct P2SGradGradient {
  Matrix embeddings;
  Matrix prototypes;
};

P2SGradGradient p2sgrad_gradient(const Matrix& embeddings, const PrototypeScorer& scorer,
                                 std::span<const int> labels);

// Gradient descent on the prototypes alone, embeddings held fixed.
PrototypeScorer fit_prototypes(const Matrix& embeddings, std::span<const int> labels,
                               PrototypeScorer init, int steps, double lr);

}  // namespace avfuse
