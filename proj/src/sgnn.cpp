#include "ncpd/sgnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ncpd/error.hpp"
#include "ncpd/evaluation.hpp"

namespace ncpd {

using nlohmann::json;

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;
constexpr double kDistanceEps2 = 1e-24;  // ε = 1e-12
constexpr double kScoreClip = 1e-7;
constexpr std::size_t kNoSource = std::numeric_limits<std::size_t>::max();

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void add_bias(Matrix& m, std::span<const double> bias) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

void add_column_sums(std::vector<double>& acc, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) acc[j] += r[j];
  }
}

Matrix dropout_scale(std::size_t rows, std::size_t cols, double p, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = keep(rng) ? scale : 0.0;
  return m;
}

void glorot(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> unif(-limit, limit);
  for (auto& v : w.data()) v = unif(rng);
}

}  // namespace

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::SortK: return "sortk";
    case Pooling::Max: return "max";
    case Pooling::Average: return "average";
  }
  return "?";
}

Pooling parse_pooling(const std::string& text) {
  if (text == "sortk" || text == "sort-k") return Pooling::SortK;
  if (text == "max") return Pooling::Max;
  if (text == "average" || text == "mean") return Pooling::Average;
  throw ConfigError("unknown pooling '" + text + "'");
}

void SgnnConfig::validate() const {
  if (gcn_layers == 0) throw ConfigError("gcn_layers must be >= 1");
  if (hidden_units == 0) throw ConfigError("hidden_units must be >= 1");
  if (sortk == 0) throw ConfigError("sortk must be >= 1");
  if (fc_units[0] == 0 || fc_units[1] == 0) throw ConfigError("fc_units must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

std::string SgnnConfig::describe() const {
  std::ostringstream s;
  s << "J=" << gcn_layers << " hidden=" << hidden_units << " k=" << sortk << " fc=" << fc_units[0] << "/"
    << fc_units[1] << " dropout=" << dropout << " enc=" << encoding.to_string() << " pool=" << to_string(pooling)
    << " lr=" << learning_rate << " wd=" << weight_decay << " epochs=" << epochs << " batch=" << batch_size;
  return s.str();
}

// ---------------------------------------------------------------------------

SgnnParams SgnnParams::initialize(const SgnnConfig& config, std::size_t input_dim, Rng& rng) {
  config.validate();
  if (input_dim == 0) throw ConfigError("input dimension must be >= 1");
  SgnnParams p;
  std::size_t in = input_dim;
  for (std::size_t j = 0; j < config.gcn_layers; ++j) {
    GcnLayer layer{Matrix(in, config.hidden_units), std::vector<double>(config.hidden_units, 0.0)};
    glorot(layer.weight, rng);
    p.gcn.push_back(std::move(layer));
    in = config.hidden_units;
  }
  in = config.pooled_width();
  for (std::size_t l = 0; l < 2; ++l) {
    const std::size_t out = config.fc_units[l];
    DenseLayer d;
    d.weight = Matrix(in, out);
    glorot(d.weight, rng);
    d.bias.assign(out, 0.0);
    d.gamma.assign(out, 1.0);
    d.beta.assign(out, 0.0);
    d.running_mean.assign(out, 0.0);
    d.running_var.assign(out, 1.0);
    p.fc[l] = std::move(d);
    in = out;
  }
  return p;
}

SgnnParams SgnnParams::zeros_like() const {
  SgnnParams z = *this;
  for (auto t : z.learnable()) std::fill(t.begin(), t.end(), 0.0);
  for (auto& d : z.fc) {
    std::fill(d.running_mean.begin(), d.running_mean.end(), 0.0);
    std::fill(d.running_var.begin(), d.running_var.end(), 0.0);
  }
  return z;
}

std::vector<std::span<double>> SgnnParams::learnable() {
  std::vector<std::span<double>> out;
  for (auto& l : gcn) {
    out.emplace_back(l.weight.data());
    out.emplace_back(l.bias);
  }
  for (auto& d : fc) {
    out.emplace_back(d.weight.data());
    out.emplace_back(d.bias);
    out.emplace_back(d.gamma);
    out.emplace_back(d.beta);
  }
  out.emplace_back(&readout_bias, 1);
  return out;
}

std::vector<std::span<const double>> SgnnParams::learnable() const {
  auto spans = const_cast<SgnnParams*>(this)->learnable();
  return {spans.begin(), spans.end()};
}

std::vector<std::string> SgnnParams::learnable_names() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < gcn.size(); ++j) {
    names.push_back("gcn" + std::to_string(j) + ".weight");
    names.push_back("gcn" + std::to_string(j) + ".bias");
  }
  for (std::size_t l = 0; l < fc.size(); ++l) {
    const std::string p = "fc" + std::to_string(l) + ".";
    for (const char* n : {"weight", "bias", "gamma", "beta"}) names.push_back(p + n);
  }
  names.emplace_back("readout_bias");
  return names;
}

bool SgnnParams::all_finite() const {
  for (auto t : learnable())
    for (double v : t)
      if (!std::isfinite(v)) return false;
  for (const auto& d : fc) {
    for (double v : d.running_mean)
      if (!std::isfinite(v)) return false;
    for (double v : d.running_var)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

PreparedGraph prepare_graph(const Graph& g, EncodingKind encoding) {
  PreparedGraph p;
  p.propagation = SparseRows::from_dense(normalized_augmented_adjacency(g));
  p.features = g.attributes() ? *g.attributes() : positional_encoding(g, encoding);
  return p;
}

std::vector<PreparedGraph> prepare_graphs(std::span<const Graph> graphs, EncodingKind encoding) {
  std::vector<PreparedGraph> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(prepare_graph(g, encoding));
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

Matrix GcnEncoder::forward(const std::vector<GcnLayer>& params, const PreparedGraph& g, Mode mode, double dropout,
                           Rng* rng, GcnTape* tape) const {
  if (params.empty()) throw ConfigError("encoder has no layers");
  if (g.features.cols() != params.front().weight.rows()) {
    throw ConfigError("encoder input width " + std::to_string(g.features.cols()) + " does not match W(1) rows " +
                      std::to_string(params.front().weight.rows()));
  }
  const bool use_dropout = mode == Mode::Train && dropout > 0.0;
  if (use_dropout && rng == nullptr) throw ConfigError("dropout requires a random source");
  Matrix h = g.features;
  for (const auto& layer : params) {
    Matrix x = g.propagation.multiply(h);
    Matrix z = matmul(x, layer.weight);
    add_bias(z, layer.bias);
    h = z;
    for (auto& v : h.data()) v = std::max(v, 0.0);
    Matrix scale;
    if (use_dropout) {
      scale = dropout_scale(h.rows(), h.cols(), dropout, *rng);
      for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] *= scale.data()[i];
    }
    if (tape) {
      tape->propagated.push_back(std::move(x));
      tape->pre_activation.push_back(std::move(z));
      tape->dropout_scale.push_back(std::move(scale));
    }
  }
  return h;
}

void GcnEncoder::backward(const std::vector<GcnLayer>& params, const PreparedGraph& g, const GcnTape& tape,
                          const Matrix& grad_out, std::vector<GcnLayer>& grads) const {
  Matrix d = grad_out;
  for (std::size_t j = params.size(); j-- > 0;) {
    const auto& scale = tape.dropout_scale[j];
    const auto& z = tape.pre_activation[j];
    for (std::size_t i = 0; i < d.size(); ++i) {
      double v = d.data()[i];
      if (!scale.empty()) v *= scale.data()[i];
      d.data()[i] = z.data()[i] > 0.0 ? v : 0.0;
    }
    grads[j].weight += matmul_tn(tape.propagated[j], d);
    add_column_sums(grads[j].bias, d);
    if (j > 0) d = g.propagation.multiply(matmul_nt(d, params[j].weight));
  }
}

Matrix gcn_forward(const SgnnParams& params, const PreparedGraph& g, Mode mode, double dropout, Rng* rng,
                   GcnTape* tape) {
  return GcnEncoder{}.forward(params.gcn, g, mode, dropout, rng, tape);
}

// ---------------------------------------------------------------------------
// Similarity head

std::vector<double> node_distances(const Matrix& h1, const Matrix& h2, Mode mode) {
  if (h1.rows() != h2.rows() || h1.cols() != h2.cols()) throw DimensionError("embeddings must share a shape");
  std::vector<double> f(h1.rows());
  for (std::size_t i = 0; i < h1.rows(); ++i) {
    auto a = h1.row(i);
    auto b = h2.row(i);
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    f[i] = std::sqrt(mode == Mode::Train ? s + kDistanceEps2 : s);
  }
  return f;
}

Pooled pool_distances(std::span<const double> f, Pooling pooling, std::size_t k) {
  Pooled p;
  const std::size_t n = f.size();
  switch (pooling) {
    case Pooling::SortK: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
      p.values.assign(k, 0.0);
      p.source.assign(k, kNoSource);
      for (std::size_t j = 0; j < std::min(k, n); ++j) {
        p.values[j] = f[order[j]];
        p.source[j] = order[j];
      }
      break;
    }
    case Pooling::Max: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (f[i] > f[best]) best = i;
      p.values = {n == 0 ? 0.0 : f[best]};
      p.source = {n == 0 ? kNoSource : best};
      break;
    }
    case Pooling::Average: {
      const double s = std::accumulate(f.begin(), f.end(), 0.0);
      p.values = {n == 0 ? 0.0 : s / static_cast<double>(n)};
      p.source = {kNoSource};
      break;
    }
  }
  return p;
}

double similarity_forward(const SgnnParams& params, const SgnnConfig& config, const Matrix& h1, const Matrix& h2) {
  const auto f = node_distances(h1, h2, Mode::Eval);
  std::vector<double> x = pool_distances(f, config.pooling, config.sortk).values;
  for (const auto& layer : params.fc) {
    if (x.size() != layer.weight.rows()) throw ConfigError("pooled width does not match the dense layer");
    std::vector<double> y(layer.weight.cols());
    for (std::size_t o = 0; o < y.size(); ++o) {
      double u = layer.bias[o];
      for (std::size_t i = 0; i < x.size(); ++i) u += x[i] * layer.weight(i, o);
      const double xhat = (u - layer.running_mean[o]) / std::sqrt(layer.running_var[o] + kBnEps);
      y[o] = std::max(layer.gamma[o] * xhat + layer.beta[o], 0.0);
    }
    x = std::move(y);
  }
  return sigmoid(std::accumulate(x.begin(), x.end(), 0.0) + params.readout_bias);
}

int predict_label(double score) { return score > 0.5 ? 1 : 0; }

double cross_entropy(double score, int label) {
  const double s = std::clamp(score, kScoreClip, 1.0 - kScoreClip);
  return label == 1 ? -std::log(s) : -std::log(1.0 - s);
}

// ---------------------------------------------------------------------------
// Training-mode forward/backward

namespace {

struct DenseTape {
  Matrix input;   // B × in
  Matrix xhat;    // B × out
  std::vector<double> inv_std;
  Matrix post_bn;  // γ·x̂ + β
  Matrix scale;    // dropout, empty when off
};

const PreparedGraph& graph_at(std::span<const PreparedGraph> graphs, std::size_t t) {
  if (t == 0 || t > graphs.size()) throw ParameterError("pair index " + std::to_string(t) + " out of range");
  return graphs[t - 1];
}

}  // namespace

LossAndGrad loss_and_grad(const SgnnParams& params, const SgnnConfig& config, std::span<const PreparedGraph> graphs,
                          std::span<const PairExample> batch, Rng* rng) {
  if (batch.empty()) throw ParameterError("loss_and_grad: empty batch");
  const std::size_t B = batch.size();
  const double dropout = config.dropout;
  const bool use_dropout = dropout > 0.0;
  if (use_dropout && rng == nullptr) throw ConfigError("dropout requires a random source");
  const GcnEncoder encoder;

  // Encoder passes and pooled distances.
  std::vector<GcnTape> tapes1(B);
  std::vector<GcnTape> tapes2(B);
  std::vector<Matrix> diffs(B);
  std::vector<std::vector<double>> dists(B);
  std::vector<Pooled> pooled(B);
  const std::size_t width = config.pooled_width();
  Matrix x(B, width);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& g1 = graph_at(graphs, batch[b].t1);
    const auto& g2 = graph_at(graphs, batch[b].t2);
    Matrix h1 = encoder.forward(params.gcn, g1, Mode::Train, dropout, rng, &tapes1[b]);
    Matrix h2 = encoder.forward(params.gcn, g2, Mode::Train, dropout, rng, &tapes2[b]);
    dists[b] = node_distances(h1, h2, Mode::Train);
    diffs[b] = h1 - h2;
    pooled[b] = pool_distances(dists[b], config.pooling, config.sortk);
    std::copy(pooled[b].values.begin(), pooled[b].values.end(), x.row(b).begin());
  }

  // Dense + batch-norm + ReLU layers.
  LossAndGrad out;
  std::array<DenseTape, 2> dense;
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& layer = params.fc[l];
    if (x.cols() != layer.weight.rows()) throw ConfigError("pooled width does not match the dense layer");
    auto& tape = dense[l];
    tape.input = x;
    Matrix u = matmul(x, layer.weight);
    add_bias(u, layer.bias);
    const std::size_t H = u.cols();
    auto& stats = out.stats[l];
    stats.mean.assign(H, 0.0);
    stats.variance.assign(H, 0.0);
    tape.inv_std.assign(H, 0.0);
    tape.xhat = Matrix(B, H);
    tape.post_bn = Matrix(B, H);
    for (std::size_t o = 0; o < H; ++o) {
      double mu = 0.0;
      for (std::size_t b = 0; b < B; ++b) mu += u(b, o);
      mu /= static_cast<double>(B);
      double var = 0.0;
      for (std::size_t b = 0; b < B; ++b) var += (u(b, o) - mu) * (u(b, o) - mu);
      var /= static_cast<double>(B);
      stats.mean[o] = mu;
      stats.variance[o] = B > 1 ? var * static_cast<double>(B) / static_cast<double>(B - 1) : var;
      tape.inv_std[o] = 1.0 / std::sqrt(var + kBnEps);
      for (std::size_t b = 0; b < B; ++b) {
        tape.xhat(b, o) = (u(b, o) - mu) * tape.inv_std[o];
        tape.post_bn(b, o) = layer.gamma[o] * tape.xhat(b, o) + layer.beta[o];
      }
    }
    Matrix r = tape.post_bn;
    for (auto& v : r.data()) v = std::max(v, 0.0);
    if (use_dropout) {
      tape.scale = dropout_scale(B, H, dropout, *rng);
      for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] *= tape.scale.data()[i];
    }
    x = std::move(r);
  }

  // Sum pooling, sigmoid, cross-entropy.
  out.scores.resize(B);
  std::vector<double> dlogit(B);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    auto r = x.row(b);
    const double z = std::accumulate(r.begin(), r.end(), 0.0) + params.readout_bias;
    const double s = sigmoid(z);
    out.scores[b] = s;
    loss += cross_entropy(s, batch[b].label);
    dlogit[b] = (s - static_cast<double>(batch[b].label)) / static_cast<double>(B);
  }
  out.loss = loss / static_cast<double>(B);

  // Backward through the head.
  out.grad = params.zeros_like();
  auto& grad = out.grad;
  grad.readout_bias = std::accumulate(dlogit.begin(), dlogit.end(), 0.0);
  Matrix d(B, params.fc[1].weight.cols());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < d.cols(); ++o) d(b, o) = dlogit[b];

  for (std::size_t l = 2; l-- > 0;) {
    const auto& layer = params.fc[l];
    auto& g = grad.fc[l];
    const auto& tape = dense[l];
    const std::size_t H = d.cols();
    // Through dropout and ReLU.
    for (std::size_t i = 0; i < d.size(); ++i) {
      double v = d.data()[i];
      if (!tape.scale.empty()) v *= tape.scale.data()[i];
      d.data()[i] = tape.post_bn.data()[i] > 0.0 ? v : 0.0;
    }
    // Through batch normalisation.
    Matrix du(B, H);
    for (std::size_t o = 0; o < H; ++o) {
      double sum_dxhat = 0.0;
      double sum_dxhat_xhat = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        g.gamma[o] += d(b, o) * tape.xhat(b, o);
        g.beta[o] += d(b, o);
        const double dxhat = d(b, o) * layer.gamma[o];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * tape.xhat(b, o);
      }
      const double Bd = static_cast<double>(B);
      for (std::size_t b = 0; b < B; ++b) {
        const double dxhat = d(b, o) * layer.gamma[o];
        du(b, o) = tape.inv_std[o] / Bd * (Bd * dxhat - sum_dxhat - tape.xhat(b, o) * sum_dxhat_xhat);
      }
    }
    g.weight += matmul_tn(tape.input, du);
    add_column_sums(g.bias, du);
    d = matmul_nt(du, layer.weight);
  }

  // Back into the node distances and the two encoder branches.
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t n = dists[b].size();
    std::vector<double> df(n, 0.0);
    if (config.pooling == Pooling::Average) {
      for (std::size_t i = 0; i < n; ++i) df[i] = d(b, 0) / static_cast<double>(n);
    } else {
      for (std::size_t j = 0; j < pooled[b].source.size(); ++j)
        if (pooled[b].source[j] != kNoSource) df[pooled[b].source[j]] += d(b, j);
    }
    Matrix dh = diffs[b];
    for (std::size_t i = 0; i < n; ++i) {
      const double coef = df[i] / dists[b][i];
      for (auto& v : dh.row(i)) v *= coef;
    }
    encoder.backward(params.gcn, graph_at(graphs, batch[b].t1), tapes1[b], dh, grad.gcn);
    dh *= -1.0;
    encoder.backward(params.gcn, graph_at(graphs, batch[b].t2), tapes2[b], dh, grad.gcn);
  }
  return out;
}

void update_running_stats(SgnnParams& params, const std::array<BatchStats, 2>& stats) {
  for (std::size_t l = 0; l < 2; ++l) {
    auto& layer = params.fc[l];
    for (std::size_t o = 0; o < layer.running_mean.size(); ++o) {
      layer.running_mean[o] = (1.0 - kBnMomentum) * layer.running_mean[o] + kBnMomentum * stats[l].mean[o];
      layer.running_var[o] = (1.0 - kBnMomentum) * layer.running_var[o] + kBnMomentum * stats[l].variance[o];
    }
  }
}

AdamState AdamState::for_params(const SgnnParams& params) {
  AdamState s;
  for (auto t : params.learnable()) {
    s.first_moment.emplace_back(t.size(), 0.0);
    s.second_moment.emplace_back(t.size(), 0.0);
  }
  return s;
}

void adam_step(SgnnParams& params, const SgnnParams& grads, AdamState& state, double lr, double weight_decay) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  auto p = params.learnable();
  auto g = grads.learnable();
  if (state.first_moment.size() != p.size()) throw ConfigError("optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * weight_decay;
  for (std::size_t t = 0; t < p.size(); ++t) {
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    if (m.size() != p[t].size() || g[t].size() != p[t].size())
      throw ConfigError("optimizer state does not match parameters");
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[t][i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[t][i] * g[t][i];
      p[t][i] *= decay;
      p[t][i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

// ---------------------------------------------------------------------------

double SgnnModel::score(const PreparedGraph& a, const PreparedGraph& b) const {
  return similarity_forward(params, config, embed(a), embed(b));
}

std::vector<double> score_pairs(const SgnnModel& model, std::span<const PreparedGraph> graphs,
                                std::span<const PairExample> pairs) {
  std::vector<Matrix> cache(graphs.size());
  std::vector<bool> ready(graphs.size(), false);
  auto embedding = [&](std::size_t t) -> const Matrix& {
    const auto& g = graph_at(graphs, t);
    if (!ready[t - 1]) {
      cache[t - 1] = model.embed(g);
      ready[t - 1] = true;
    }
    return cache[t - 1];
  };
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(model.score_embeddings(embedding(p.t1), embedding(p.t2)));
  return out;
}

TrainResult train(const SgnnConfig& config, std::span<const PreparedGraph> graphs, const PairDataset& train_pairs,
                  const PairDataset& validation_pairs, std::uint64_t seed) {
  config.validate();
  if (graphs.empty()) throw ParameterError("train: no graphs");
  if (train_pairs.pairs.empty() || validation_pairs.pairs.empty())
    throw ParameterError("train: training and validation pair sets must be nonempty");
  Rng rng(seed);
  TrainResult result;
  result.model.config = config;
  result.model.seed = seed;
  result.model.params = SgnnParams::initialize(config, graphs.front().features.cols(), rng);
  result.optimizer = AdamState::for_params(result.model.params);
  if (config.epochs == 0) return result;

  SgnnModel current = result.model;
  std::vector<int> val_labels;
  for (const auto& p : validation_pairs.pairs) val_labels.push_back(p.label);

  std::vector<std::size_t> order(train_pairs.pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PairExample> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t stop = std::min(order.size(), start + config.batch_size);
      // A trailing batch of one cannot be batch-normalised; fold it into this one.
      if (order.size() - stop == 1) stop = order.size();
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_pairs.pairs[order[i]]);
      auto lg = loss_and_grad(current.params, config, graphs, batch, &rng);
      update_running_stats(current.params, lg.stats);
      adam_step(current.params, lg.grad, result.optimizer, config.learning_rate, config.weight_decay);
      epoch_loss += lg.loss * static_cast<double>(batch.size());
      start = stop;
    }

    const auto scores = score_pairs(current, graphs, validation_pairs.pairs);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    std::vector<int> predicted;
    predicted.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      rec.validation_loss += cross_entropy(scores[i], val_labels[i]);
      predicted.push_back(predict_label(scores[i]));
    }
    rec.validation_loss /= static_cast<double>(scores.size());
    const auto metrics = pair_metrics(predicted, val_labels);
    rec.validation_accuracy = metrics.accuracy;
    rec.validation_f1 = metrics.f1;
    result.history.push_back(rec);
    if (rec.validation_f1 > result.best_f1) {
      result.best_f1 = rec.validation_f1;
      result.best_epoch = epoch;
      result.model.params = current.params;
    }
  }
  return result;
}

SgnnGrid SgnnGrid::default_synthetic() {
  return {{1e-3, 1e-2}, {0.01, 0.05, 0.1}, {20, 40, 100}, {16, 32, 64}, {}};
}

SgnnGrid SgnnGrid::default_financial() {
  return {{1e-5, 1e-4, 1e-3, 1e-2}, {0.05, 0.2, 0.4}, {50, 100, 200}, {32, 64, 128}, {1e-6, 1e-5}};
}

std::vector<SgnnConfig> SgnnGrid::expand(const SgnnConfig& base) const {
  auto or_base = []<typename T>(const std::vector<T>& v, T b) { return v.empty() ? std::vector<T>{b} : v; };
  std::vector<SgnnConfig> out;
  for (double lr : or_base(learning_rate, base.learning_rate))
    for (double dr : or_base(dropout, base.dropout))
      for (std::size_t k : or_base(sortk, base.sortk))
        for (std::size_t h : or_base(hidden_units, base.hidden_units))
          for (double wd : or_base(weight_decay, base.weight_decay)) {
            SgnnConfig c = base;
            c.learning_rate = lr;
            c.dropout = dr;
            c.sortk = k;
            c.hidden_units = h;
            c.weight_decay = wd;
            out.push_back(c);
          }
  return out;
}

GridResult grid_search(std::span<const SgnnConfig> candidates, std::span<const PreparedGraph> graphs,
                       const PairDataset& train_pairs, const PairDataset& validation_pairs, std::uint64_t seed) {
  if (candidates.empty()) throw ParameterError("grid_search: empty grid");
  GridResult out;
  bool have = false;
  for (const auto& c : candidates) {
    auto r = train(c, graphs, train_pairs, validation_pairs, seed);
    // Untrained candidates are scored on their initial parameters.
    double f1 = r.best_f1;
    if (r.history.empty()) {
      std::vector<int> labels;
      std::vector<int> predicted;
      const auto scores = score_pairs(r.model, graphs, validation_pairs.pairs);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        labels.push_back(validation_pairs.pairs[i].label);
        predicted.push_back(predict_label(scores[i]));
      }
      f1 = pair_metrics(predicted, labels).f1;
      r.best_f1 = f1;
    }
    out.evaluated.emplace_back(c, f1);
    if (!have || f1 > out.best.best_f1) {
      out.best = std::move(r);
      out.best_config = c;
      have = true;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

json config_json(const SgnnConfig& c) {
  return {{"gcn_layers", c.gcn_layers},
          {"hidden_units", c.hidden_units},
          {"sortk", c.sortk},
          {"fc_units", {c.fc_units[0], c.fc_units[1]}},
          {"dropout", c.dropout},
          {"encoding", c.encoding.to_string()},
          {"pooling", to_string(c.pooling)},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size}};
}

SgnnConfig config_from(const json& j) {
  SgnnConfig c;
  c.gcn_layers = j.at("gcn_layers").get<std::size_t>();
  c.hidden_units = j.at("hidden_units").get<std::size_t>();
  c.sortk = j.at("sortk").get<std::size_t>();
  c.fc_units = {j.at("fc_units").at(0).get<std::size_t>(), j.at("fc_units").at(1).get<std::size_t>()};
  c.dropout = j.at("dropout").get<double>();
  c.encoding = EncodingKind::parse(j.at("encoding").get<std::string>());
  c.pooling = parse_pooling(j.at("pooling").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.validate();
  return c;
}

}  // namespace

std::string config_to_json(const SgnnConfig& config) { return config_json(config).dump(); }

SgnnConfig config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const SgnnModel& model, const AdamState* optimizer,
                     const std::string& config_hash) {
  json j;
  j["format"] = "ncpd-sgnn-checkpoint";
  j["version"] = kCheckpointVersion;
  j["seed"] = model.seed;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["config"] = config_json(model.config);
  json gcn = json::array();
  for (const auto& l : model.params.gcn) gcn.push_back({{"weight", matrix_json(l.weight)}, {"bias", l.bias}});
  json fc = json::array();
  for (const auto& d : model.params.fc) {
    fc.push_back({{"weight", matrix_json(d.weight)},
                  {"bias", d.bias},
                  {"gamma", d.gamma},
                  {"beta", d.beta},
                  {"running_mean", d.running_mean},
                  {"running_var", d.running_var}});
  }
  j["params"] = {{"gcn", gcn}, {"fc", fc}, {"readout_bias", model.params.readout_bias}};
  if (optimizer) {
    j["optimizer"] = {{"step", optimizer->step},
                      {"first_moment", optimizer->first_moment},
                      {"second_moment", optimizer->second_moment}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
}

SgnnModel load_checkpoint(const std::string& path, AdamState* optimizer) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != "ncpd-sgnn-checkpoint") throw ParseError("not a checkpoint file", 1);
    if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("unsupported checkpoint version", 1);
    SgnnModel m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = config_from(j.at("config"));
    const auto& p = j.at("params");
    for (const auto& l : p.at("gcn"))
      m.params.gcn.push_back({matrix_from(l.at("weight")), l.at("bias").get<std::vector<double>>()});
    const auto& fc = p.at("fc");
    if (fc.size() != 2) throw ParseError("checkpoint must hold two dense layers", 1);
    for (std::size_t i = 0; i < 2; ++i) {
      auto& d = m.params.fc[i];
      d.weight = matrix_from(fc[i].at("weight"));
      d.bias = fc[i].at("bias").get<std::vector<double>>();
      d.gamma = fc[i].at("gamma").get<std::vector<double>>();
      d.beta = fc[i].at("beta").get<std::vector<double>>();
      d.running_mean = fc[i].at("running_mean").get<std::vector<double>>();
      d.running_var = fc[i].at("running_var").get<std::vector<double>>();
    }
    m.params.readout_bias = p.at("readout_bias").get<double>();
    if (optimizer && j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      optimizer->step = o.at("step").get<std::size_t>();
      optimizer->first_moment = o.at("first_moment").get<std::vector<std::vector<double>>>();
      optimizer->second_moment = o.at("second_moment").get<std::vector<std::vector<double>>>();
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad checkpoint: ") + e.what(), 1);
  }
}

}  // namespace ncpd
