#include "avfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include "avfuse/error.hpp"

namespace avfuse {

std::string_view to_string(Anneal a) { return a == Anneal::kCosine ? "cosine" : "linear"; }

Anneal anneal_from_string(std::string_view s) {
  if (s == "cosine") return Anneal::kCosine;
  if (s == "linear") return Anneal::kLinear;
  throw ValidationError("unknown anneal strategy '" + std::string(s) + "'");
}

std::string_view to_string(LrPolicy p) {
  return p == LrPolicy::kOneCycle ? "one_cycle" : "constant";
}

LrPolicy lr_policy_from_string(std::string_view s) {
  if (s == "one_cycle") return LrPolicy::kOneCycle;
  if (s == "constant") return LrPolicy::kConstant;
  throw ValidationError("unknown lr policy '" + std::string(s) + "'");
}

OneCycleSchedule::OneCycleSchedule(int total_steps, double max_lr, double pct_start,
                                   double div_factor, double final_div_factor, Anneal anneal)
    : total_steps_(total_steps),
      max_lr_(max_lr),
      pct_start_(pct_start),
      div_factor_(div_factor),
      final_div_factor_(final_div_factor),
      anneal_(anneal),
      peak_step_(static_cast<int>(std::lround(pct_start * total_steps))) {
  if (!(max_lr > 0.0) || !std::isfinite(max_lr)) {
    throw ValidationError("one-cycle: max_lr must be positive");
  }
  if (!(pct_start > 0.0 && pct_start < 1.0)) {
    throw ValidationError("one-cycle: pct_start must lie in (0, 1)");
  }
  if (!(div_factor >= 1.0) || !(final_div_factor >= 1.0)) {
    throw ValidationError("one-cycle: div factors must be >= 1");
  }
  // Both phases need at least one step so the three endpoints are distinct.
  if (peak_step_ < 1 || peak_step_ > total_steps - 2) {
    throw ValidationError("one-cycle: peak step " + std::to_string(peak_step_) +
                          " leaves an empty phase for total_steps=" +
                          std::to_string(total_steps));
  }
}

double OneCycleSchedule::lr_at(int step) const {
  if (step < 0 || step >= total_steps_) {
    throw ValidationError("one-cycle: step " + std::to_string(step) + " outside [0, " +
                          std::to_string(total_steps_) + ")");
  }
  auto interpolate = [this](double from, double to, double pct) {
    if (anneal_ == Anneal::kLinear) return from + (to - from) * pct;
    return to + (from - to) / 2.0 * (1.0 + std::cos(M_PI * pct));
  };
  if (step == peak_step_) return max_lr_;
  if (step < peak_step_) {
    return interpolate(initial_lr(), max_lr_, static_cast<double>(step) / peak_step_);
  }
  if (step == total_steps_ - 1) return final_lr();
  return interpolate(max_lr_, final_lr(),
                     static_cast<double>(step - peak_step_) / (total_steps_ - 1 - peak_step_));
}

void FusionModel::validate() const {
  if (input_dim == 0 || input_dim % 2 != 0) {
    throw ValidationError("fusion model input_dim must be a positive multiple of 2");
  }
  if (weights.size() != 2 * input_dim) {
    throw ValidationError("fusion model weights must be 2 x input_dim");
  }
  if (!stream_layout.empty() && 2 * stream_layout.size() != input_dim) {
    throw ValidationError("fusion model stream_layout has " +
                          std::to_string(stream_layout.size()) + " streams but input_dim is " +
                          std::to_string(input_dim));
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw ValidationError("fusion model has non-finite weights");
  }
  if (!std::isfinite(bias[0]) || !std::isfinite(bias[1])) {
    throw ValidationError("fusion model has non-finite bias");
  }
}

FusionModel init_fusion_model(std::size_t input_dim, std::uint64_t seed, StreamLayout layout) {
  if (input_dim == 0) throw ValidationError("fusion model input_dim must be positive");
  FusionModel m;
  m.input_dim = input_dim;
  m.seed = seed;
  m.stream_layout = std::move(layout);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  m.weights.resize(2 * input_dim);
  for (double& w : m.weights) w = dist(rng);
  return m;
}

namespace {

// Logit difference z_fake - z_real for one frame.
double logit_margin(const FusionModel& model, std::span<const double> x) {
  double z0 = model.bias[0];
  double z1 = model.bias[1];
  for (std::size_t j = 0; j < x.size(); ++j) {
    z0 += model.weights[j] * x[j];
    z1 += model.weights[model.input_dim + j] * x[j];
  }
  return z1 - z0;
}

ClassProbs softmax2(double margin) {
  return {1.0 / (1.0 + std::exp(margin)), 1.0 / (1.0 + std::exp(-margin))};
}

constexpr double kProbFloor = 1e-12;

double token_ce(const ClassProbs& p, std::uint8_t label) {
  return -std::log(std::max(p[label != 0 ? 1 : 0], kProbFloor));
}

}  // namespace

std::vector<ClassProbs> fusion_forward(const FusionModel& model, const FusedFrames& frames) {
  if (frames.num_tokens() > 0 && frames.dim() != model.input_dim) {
    throw ValidationError("fused frame dimension " + std::to_string(frames.dim()) +
                          " does not match model input_dim " + std::to_string(model.input_dim));
  }
  std::vector<ClassProbs> out;
  out.reserve(frames.num_tokens());
  for (std::size_t t = 0; t < frames.num_tokens(); ++t) {
    const auto x = frames.row(t);
    if (!std::ranges::all_of(x, [](double v) { return std::isfinite(v); })) {
      throw ValidationError("non-finite value in fused frame " + std::to_string(t));
    }
    out.push_back(softmax2(logit_margin(model, x)));
  }
  return out;
}

std::vector<double> fake_scores(std::span<const ClassProbs> probs) {
  std::vector<double> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(p[1]);
  return out;
}

double bce_loss(std::span<const ClassProbs> predictions, std::span<const std::uint8_t> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("bce_loss: " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw ValidationError("bce_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) sum += token_ce(predictions[i], labels[i]);
  return sum / static_cast<double>(predictions.size());
}

namespace {

struct GradientAccumulator {
  std::vector<double> grad;  // 2 * dim weights followed by 2 biases
  double loss = 0.0;
  double weight = 0.0;
};

void accumulate_video(const FusionModel& model, const TrainingExample& ex, double pos_weight,
                      GradientAccumulator& acc) {
  const std::size_t dim = model.input_dim;
  acc.grad.assign(2 * dim + 2, 0.0);
  acc.loss = 0.0;
  acc.weight = 0.0;
  for (std::size_t t = 0; t < ex.frames.num_tokens(); ++t) {
    const auto x = ex.frames.row(t);
    const ClassProbs p = softmax2(logit_margin(model, x));
    const std::uint8_t y = ex.labels[t];
    const double w = y != 0 ? pos_weight : 1.0;
    acc.loss += w * token_ce(p, y);
    acc.weight += w;
    // d CE / d z_k = p_k - [y == k]
    const double g0 = w * (p[0] - (y == 0 ? 1.0 : 0.0));
    const double g1 = w * (p[1] - (y != 0 ? 1.0 : 0.0));
    for (std::size_t j = 0; j < dim; ++j) {
      acc.grad[j] += g0 * x[j];
      acc.grad[dim + j] += g1 * x[j];
    }
    acc.grad[2 * dim] += g0;
    acc.grad[2 * dim + 1] += g1;
  }
}

void check_dataset(std::span<const TrainingExample> dataset, std::size_t dim) {
  if (dataset.empty()) throw ValidationError("train_fusion: empty dataset");
  bool has_real = false;
  bool has_fake = false;
  for (const auto& ex : dataset) {
    if (ex.frames.dim() != dim) {
      throw ValidationError("train_fusion: inconsistent fused frame dimensions");
    }
    if (ex.frames.num_tokens() != ex.labels.size()) {
      throw ValidationError("train_fusion: frames and labels differ in length");
    }
    for (auto y : ex.labels) (y != 0 ? has_fake : has_real) = true;
  }
  if (!has_real || !has_fake) {
    throw ValidationError("train_fusion: dataset must contain both real and fake tokens");
  }
}

void run_parallel(std::size_t n, int threads, const auto& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t used = std::min(workers, n);
  for (std::size_t w = 0; w < used; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += used) fn(i);
    });
  }
}

}  // namespace

double dataset_loss(const FusionModel& model, std::span<const TrainingExample> dataset,
                    double positive_class_weight) {
  double loss = 0.0;
  double weight = 0.0;
  GradientAccumulator acc;
  for (const auto& ex : dataset) {
    accumulate_video(model, ex, positive_class_weight, acc);
    loss += acc.loss;
    weight += acc.weight;
  }
  return weight > 0.0 ? loss / weight : 0.0;
}

TrainResult train_fusion(std::span<const TrainingExample> dataset, const TrainConfig& cfg,
                         StreamLayout layout) {
  if (dataset.empty()) throw ValidationError("train_fusion: empty dataset");
  const std::size_t dim = dataset.front().frames.dim();
  check_dataset(dataset, dim);
  if (cfg.total_steps < 0) throw ValidationError("train_fusion: negative step budget");
  if (cfg.batch_videos < 1) throw ValidationError("train_fusion: batch_videos must be >= 1");
  if (!(cfg.positive_class_weight > 0.0)) {
    throw ValidationError("train_fusion: positive_class_weight must be positive");
  }

  TrainResult result;
  result.model = init_fusion_model(dim, cfg.seed, std::move(layout));
  result.model.schedule = cfg;
  FusionModel& model = result.model;
  result.initial_loss = dataset_loss(model, dataset, cfg.positive_class_weight);
  if (cfg.total_steps == 0) {
    result.final_loss = result.initial_loss;
    return result;
  }

  std::optional<OneCycleSchedule> schedule;
  if (cfg.policy == LrPolicy::kOneCycle) {
    schedule.emplace(cfg.total_steps, cfg.max_lr, cfg.pct_start, cfg.div_factor,
                     cfg.final_div_factor, cfg.anneal);
  } else if (!(cfg.max_lr > 0.0)) {
    throw ValidationError("train_fusion: max_lr must be positive");
  }

  // Shuffling uses a stream distinct from initialization.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  const std::size_t nparams = 2 * dim + 2;
  std::vector<double> velocity(nparams, 0.0);
  const auto batch = static_cast<std::size_t>(cfg.batch_videos);
  std::vector<GradientAccumulator> slots(batch);
  std::vector<std::size_t> members;

  for (int step = 0; step < cfg.total_steps; ++step) {
    members.clear();
    for (std::size_t b = 0; b < std::min(batch, dataset.size()); ++b) {
      if (cursor == order.size()) {
        result.epoch_losses.push_back(dataset_loss(model, dataset, cfg.positive_class_weight));
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      members.push_back(order[cursor++]);
    }
    run_parallel(members.size(), cfg.threads, [&](std::size_t i) {
      accumulate_video(model, dataset[members[i]], cfg.positive_class_weight, slots[i]);
    });

    // Fixed reduction order keeps multi-threaded runs bit-identical.
    std::vector<double> grad(nparams, 0.0);
    double loss = 0.0;
    double weight = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t k = 0; k < nparams; ++k) grad[k] += slots[i].grad[k];
      loss += slots[i].loss;
      weight += slots[i].weight;
    }
    if (weight <= 0.0) continue;
    loss /= weight;
    if (!std::isfinite(loss)) {
      throw std::runtime_error("train_fusion: non-finite loss at step " + std::to_string(step) +
                               " (lr too large?)");
    }
    result.step_losses.push_back(loss);

    const double lr = schedule ? schedule->lr_at(step) : cfg.max_lr;
    for (std::size_t k = 0; k < nparams; ++k) {
      double g = grad[k] / weight;
      double& param = k < 2 * dim ? model.weights[k] : model.bias[k - 2 * dim];
      if (k < 2 * dim) g += cfg.weight_decay * param;
      velocity[k] = cfg.momentum * velocity[k] + g;
      param -= lr * velocity[k];
    }
  }

  result.final_loss = dataset_loss(model, dataset, cfg.positive_class_weight);
  if (!std::isfinite(result.final_loss)) {
    throw std::runtime_error("train_fusion: training diverged (final loss is not finite)");
  }
  return result;
}

PrototypeScorer::PrototypeScorer(Matrix prototypes) : prototypes_(std::move(prototypes)) {
  if (prototypes_.rows == 0 || prototypes_.cols == 0) {
    throw ValidationError("prototype scorer needs at least one non-empty prototype");
  }
  for (std::size_t k = 0; k < prototypes_.rows; ++k) {
    const auto w = prototypes_.row(k);
    if (std::inner_product(w.begin(), w.end(), w.begin(), 0.0) == 0.0) {
      throw ValidationError("prototype " + std::to_string(k) + " has zero norm");
    }
  }
}

namespace {

double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void check_p2sgrad_inputs(const Matrix& embeddings, const PrototypeScorer& scorer,
                          std::span<const int> labels) {
  if (embeddings.cols != scorer.dim()) {
    throw ValidationError("p2sgrad: embedding dim " + std::to_string(embeddings.cols) +
                          " != prototype dim " + std::to_string(scorer.dim()));
  }
  if (embeddings.rows != labels.size() || embeddings.rows == 0) {
    throw ValidationError("p2sgrad: need one label per embedding and at least one sample");
  }
  for (std::size_t j = 0; j < embeddings.rows; ++j) {
    if (norm(embeddings.row(j)) == 0.0) {
      throw ValidationError("p2sgrad: embedding " + std::to_string(j) + " has zero norm");
    }
    if (labels[j] < 0 || static_cast<std::size_t>(labels[j]) >= scorer.num_classes()) {
      throw ValidationError("p2sgrad: label out of range at sample " + std::to_string(j));
    }
  }
}

}  // namespace

std::vector<double> PrototypeScorer::cosines(std::span<const double> embedding) const {
  if (embedding.size() != dim()) throw ValidationError("prototype scorer: dimension mismatch");
  const double en = norm(embedding);
  if (en == 0.0) throw ValidationError("prototype scorer: zero-norm embedding");
  std::vector<double> out(num_classes());
  for (std::size_t k = 0; k < num_classes(); ++k) {
    const auto w = prototypes_.row(k);
    out[k] = dot(embedding, w) / (en * norm(w));
  }
  return out;
}

double p2sgrad_loss(const Matrix& embeddings, const PrototypeScorer& scorer,
                    std::span<const int> labels) {
  check_p2sgrad_inputs(embeddings, scorer, labels);
  double total = 0.0;
  for (std::size_t j = 0; j < embeddings.rows; ++j) {
    const auto cos = scorer.cosines(embeddings.row(j));
    for (std::size_t k = 0; k < cos.size(); ++k) {
      const double target = static_cast<std::size_t>(labels[j]) == k ? 1.0 : 0.0;
      total += (cos[k] - target) * (cos[k] - target);
    }
  }
  return total / static_cast<double>(embeddings.rows);
}

P2SGradGradient p2sgrad_gradient(const Matrix& embeddings, const PrototypeScorer& scorer,
                                 std::span<const int> labels) {
  check_p2sgrad_inputs(embeddings, scorer, labels);
  const Matrix& protos = scorer.prototypes();
  const std::size_t d = embeddings.cols;
  const double inv_n = 1.0 / static_cast<double>(embeddings.rows);
  P2SGradGradient g{Matrix(embeddings.rows, d), Matrix(protos.rows, d)};

  std::vector<double> proto_norm(protos.rows);
  for (std::size_t k = 0; k < protos.rows; ++k) proto_norm[k] = norm(protos.row(k));

  for (std::size_t j = 0; j < embeddings.rows; ++j) {
    const auto e = embeddings.row(j);
    const double en = norm(e);
    for (std::size_t k = 0; k < protos.rows; ++k) {
      const auto w = protos.row(k);
      const double wn = proto_norm[k];
      const double cos = dot(e, w) / (en * wn);
      const double target = static_cast<std::size_t>(labels[j]) == k ? 1.0 : 0.0;
      const double upstream = 2.0 * (cos - target) * inv_n;
      // d cos / d e = w / (|e||w|) - cos e / |e|^2, symmetric for w.
      for (std::size_t i = 0; i < d; ++i) {
        g.embeddings(j, i) += upstream * (w[i] / (en * wn) - cos * e[i] / (en * en));
        g.prototypes(k, i) += upstream * (e[i] / (en * wn) - cos * w[i] / (wn * wn));
      }
    }
  }
  return g;
}

PrototypeScorer fit_prototypes(const Matrix& embeddings, std::span<const int> labels,
                               PrototypeScorer init, int steps, double lr) {
  Matrix protos = init.prototypes();
  for (int s = 0; s < steps; ++s) {
    const auto g = p2sgrad_gradient(embeddings, PrototypeScorer(protos), labels);
    for (std::size_t i = 0; i < protos.data.size(); ++i) protos.data[i] -= lr * g.prototypes.data[i];
  }
  return PrototypeScorer(std::move(protos));
}

}  // namespace avfuse
