#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ncpd/graph.hpp"
#include "ncpd/linalg.hpp"
#include "ncpd/sampling.hpp"

namespace ncpd {

using Rng = std::mt19937_64;

enum class Pooling { SortK, Max, Average };
enum class Mode { Train, Eval };

std::string to_string(Pooling p);
Pooling parse_pooling(const std::string& text);

/// Architecture and optimisation hyperparameters of the siamese model.
struct SgnnConfig {
  std::size_t gcn_layers = 2;
  std::size_t hidden_units = 32;
  std::size_t sortk = 40;
  std::array<std::size_t, 2> fc_units{32, 16};
  double dropout = 0.05;
  EncodingKind encoding = EncodingKind::degree();
  Pooling pooling = Pooling::SortK;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;

  void validate() const;
  /// Width of the pooled distance vector fed to the first dense layer.
  std::size_t pooled_width() const noexcept { return pooling == Pooling::SortK ? sortk : 1; }
  std::string describe() const;

  friend bool operator==(const SgnnConfig&, const SgnnConfig&) = default;
};

struct GcnLayer {
  Matrix weight;              // h_{j-1} × h_j
  std::vector<double> bias;   // h_j
};

/// Affine map followed by batch normalisation.
struct DenseLayer {
  Matrix weight;  // in × out
  std::vector<double> bias;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

struct SgnnParams {
  std::vector<GcnLayer> gcn;
  std::array<DenseLayer, 2> fc;
  /// Scalar offset added to the summed output units before the sigmoid.
  double readout_bias = 0.0;

  /// Glorot-uniform weights, zero biases, unit scales, unit running variance.
  static SgnnParams initialize(const SgnnConfig& config, std::size_t input_dim, Rng& rng);
  /// Same shapes, every entry zero.
  SgnnParams zeros_like() const;

  /// Learnable tensors in a fixed order (running statistics excluded).
  std::vector<std::span<double>> learnable();
  std::vector<std::span<const double>> learnable() const;
  std::vector<std::string> learnable_names() const;

  std::size_t input_dim() const { return gcn.empty() ? 0 : gcn.front().weight.rows(); }
  bool all_finite() const;
};

/// Graph preprocessed once for repeated encoder passes.
struct PreparedGraph {
  SparseRows propagation;  // normalized augmented adjacency
  Matrix features;         // H⁰: node attributes when present, else the positional encoding
};

PreparedGraph prepare_graph(const Graph& g, EncodingKind encoding);
std::vector<PreparedGraph> prepare_graphs(std::span<const Graph> graphs, EncodingKind encoding);

// ---------------------------------------------------------------------------
// Encoder

/// Intermediate values of one encoder pass, kept for backpropagation.
struct GcnTape {
  std::vector<Matrix> propagated;      // Ã·H^(j-1)
  std::vector<Matrix> pre_activation;  // Ã·H^(j-1)·W + B
  std::vector<Matrix> dropout_scale;   // empty when dropout is off
};

/// Encoders map a prepared graph to node embeddings and back-propagate into
/// their own parameter block. GcnEncoder is the only implementation.
template <typename E>
concept GraphEncoder = requires(const E& e, const std::vector<GcnLayer>& params, const PreparedGraph& g,
                                Mode mode, double dropout, Rng* rng, GcnTape* tape, const GcnTape& ctape,
                                const Matrix& grad, std::vector<GcnLayer>& grads) {
  { e.forward(params, g, mode, dropout, rng, tape) } -> std::same_as<Matrix>;
  { e.backward(params, g, ctape, grad, grads) } -> std::same_as<void>;
};

struct GcnEncoder {
  /// H^(j) = ReLU(Ã H^(j-1) W^(j) + B^(j)), inverted dropout after each ReLU in Train mode.
  Matrix forward(const std::vector<GcnLayer>& params, const PreparedGraph& g, Mode mode, double dropout, Rng* rng,
                 GcnTape* tape) const;
  /// Accumulates into `grads` the gradient of a scalar whose derivative w.r.t.
  /// the encoder output is `grad_out`.
  void backward(const std::vector<GcnLayer>& params, const PreparedGraph& g, const GcnTape& tape,
                const Matrix& grad_out, std::vector<GcnLayer>& grads) const;
};

static_assert(GraphEncoder<GcnEncoder>);

/// Encoder pass with the model's GCN.
Matrix gcn_forward(const SgnnParams& params, const PreparedGraph& g, Mode mode, double dropout = 0.0,
                   Rng* rng = nullptr, GcnTape* tape = nullptr);

// ---------------------------------------------------------------------------
// Similarity head

/// Node-wise distances f_i = ‖(H1)_i − (H2)_i‖. Train mode uses the smoothed
/// norm sqrt(Σ(·)² + 1e-24).
std::vector<double> node_distances(const Matrix& h1, const Matrix& h2, Mode mode);

/// Pooled feature vector and, for Sort-k, the indices of the selected nodes.
struct Pooled {
  std::vector<double> values;
  std::vector<std::size_t> source;  // node index feeding each pooled slot (Sort-k / Max)
};

/// Sort-k keeps the k largest distances in descending order (ties to the lowest
/// node index) and zero-pads when k > n; Max and Average return one value.
Pooled pool_distances(std::span<const double> f, Pooling pooling, std::size_t k);

/// Similarity score in (0, 1) for two embedding matrices, eval mode.
double similarity_forward(const SgnnParams& params, const SgnnConfig& config, const Matrix& h1, const Matrix& h2);

/// 1 iff score > 0.5.
int predict_label(double score);

// ---------------------------------------------------------------------------
// Loss, gradients and optimisation

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> variance;  // unbiased, for the running estimate
};

struct LossAndGrad {
  double loss = 0.0;
  SgnnParams grad;
  std::array<BatchStats, 2> stats;
  std::vector<double> scores;
};

/// Mean binary cross-entropy over `batch` and its exact gradient (Train mode).
/// Pair timestamps index `graphs` (1-based). `rng` drives dropout and may be
/// null when config.dropout == 0.
LossAndGrad loss_and_grad(const SgnnParams& params, const SgnnConfig& config, std::span<const PreparedGraph> graphs,
                          std::span<const PairExample> batch, Rng* rng);

/// Binary cross-entropy with the score clipped to [1e-7, 1 - 1e-7].
double cross_entropy(double score, int label);

/// Folds batch statistics into the running estimates (momentum 0.1).
void update_running_stats(SgnnParams& params, const std::array<BatchStats, 2>& stats);

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;

  static AdamState for_params(const SgnnParams& params);
};

/// Adam (β1 0.9, β2 0.999, ε 1e-8, bias-corrected) with decoupled weight decay:
/// parameters are first scaled by (1 − lr·wd).
void adam_step(SgnnParams& params, const SgnnParams& grads, AdamState& state, double lr, double weight_decay);

// ---------------------------------------------------------------------------
// Model, training, model selection

struct SgnnModel {
  SgnnConfig config;
  SgnnParams params;
  std::uint64_t seed = 0;

  Matrix embed(const PreparedGraph& g) const { return gcn_forward(params, g, Mode::Eval); }
  double score(const PreparedGraph& a, const PreparedGraph& b) const;
  double score_embeddings(const Matrix& ha, const Matrix& hb) const {
    return similarity_forward(params, config, ha, hb);
  }
};

/// Eval-mode scores for every pair in `pairs` (timestamps index `graphs`, 1-based).
std::vector<double> score_pairs(const SgnnModel& model, std::span<const PreparedGraph> graphs,
                                std::span<const PairExample> pairs);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
  double validation_f1 = 0.0;
};

struct TrainResult {
  SgnnModel model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 = initialisation
  double best_f1 = -1.0;
  AdamState optimizer;
};

/// Mini-batch Adam over `train`; keeps the epoch with the highest validation F1
/// (earliest on ties).
TrainResult train(const SgnnConfig& config, std::span<const PreparedGraph> graphs, const PairDataset& train_pairs,
                  const PairDataset& validation_pairs, std::uint64_t seed);

/// Hyperparameter grid; the product of all value lists is searched.
struct SgnnGrid {
  std::vector<double> learning_rate;
  std::vector<double> dropout;
  std::vector<std::size_t> sortk;
  std::vector<std::size_t> hidden_units;
  std::vector<double> weight_decay;

  static SgnnGrid default_synthetic();
  static SgnnGrid default_financial();
  std::vector<SgnnConfig> expand(const SgnnConfig& base) const;
};

struct GridResult {
  SgnnConfig best_config;
  TrainResult best;
  std::vector<std::pair<SgnnConfig, double>> evaluated;  // config, best validation F1
};

/// Trains every candidate; returns the highest validation F1 (first candidate on ties).
GridResult grid_search(std::span<const SgnnConfig> candidates, std::span<const PreparedGraph> graphs,
                       const PairDataset& train_pairs, const PairDataset& validation_pairs, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints (JSON, format documented in docs/checkpoint.md)

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const SgnnModel& model, const AdamState* optimizer = nullptr,
                     const std::string& config_hash = {});
SgnnModel load_checkpoint(const std::string& path, AdamState* optimizer = nullptr);

std::string config_to_json(const SgnnConfig& config);
SgnnConfig config_from_json(const std::string& text);

}  // namespace ncpd
