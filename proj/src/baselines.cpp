#include "ncpd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "ncpd/error.hpp"

namespace ncpd {

std::size_t BaselineConfig::half(std::size_t L) const { return window_half.value_or(std::max<std::size_t>(1, L / 2)); }

void BaselineConfig::validate() const {
  if (k_spectral == 0) throw ConfigError("k_spectral must be >= 1");
  if (window_half && *window_half == 0) throw ConfigError("window_half must be >= 1");
  if (deltacon_epsilon && !(*deltacon_epsilon > 0.0)) throw ConfigError("deltacon_epsilon must be positive");
  if (wl_iterations == 0) throw ConfigError("wl_iterations must be >= 1");
}

namespace {

void require_same_size(const Graph& g1, const Graph& g2, const char* what) {
  if (g1.size() != g2.size())
    throw ParameterError(std::string(what) + ": graphs have " + std::to_string(g1.size()) + " and " +
                         std::to_string(g2.size()) + " nodes");
}

Matrix normalized_laplacian(const Graph& g) {
  const auto deg = g.degrees();
  const std::size_t n = g.size();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;
  Matrix l = Matrix::identity(n);
  const auto& a = g.adjacency();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) l(i, j) -= inv_sqrt[i] * a(i, j) * inv_sqrt[j];
  return l;
}

// Columns `cols` of the eigenvector matrix, in the given order.
Matrix take_columns(const Matrix& v, const std::vector<std::size_t>& cols) {
  Matrix out(v.rows(), cols.size());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t c = 0; c < cols.size(); ++c) out(i, c) = v(i, cols[c]);
  return out;
}

Matrix bottom_laplacian_eigenvectors(const Graph& g, std::size_t k) {
  const std::size_t n = g.size();
  if (k == 0 || k > n) throw ParameterError("spectral features: need 1 <= k <= n");
  const auto e = sym_eig(normalized_laplacian(g));
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < k; ++c) cols.push_back(n - 1 - c);
  return take_columns(e.eigenvectors, cols);
}

Series pairwise_average(const std::function<double(std::size_t, std::size_t)>& measure, std::size_t T,
                        std::size_t L) {
  return similarity_statistic(measure, T, L);
}

}  // namespace

double frobenius_distance(const Graph& g1, const Graph& g2) {
  require_same_size(g1, g2, "frobenius_distance");
  return frobenius_norm(g1.adjacency() - g2.adjacency());
}

Matrix top_laplacian_eigenvectors(const Graph& g, std::size_t k) {
  if (k == 0) throw ParameterError("procrustes: k must be >= 1");
  if (k > g.size()) throw ParameterError("procrustes: k exceeds the node count");
  const auto e = sym_eig(normalized_laplacian(g));
  std::vector<std::size_t> cols(k);
  std::iota(cols.begin(), cols.end(), 0);
  return take_columns(e.eigenvectors, cols);
}

double procrustes_distance(const Matrix& u1, const Matrix& u2) {
  if (u1.rows() != u2.rows() || u1.cols() != u2.cols()) throw ParameterError("procrustes: shape mismatch");
  // ‖U1 − U2 O‖² minimised at ‖U1‖² + ‖U2‖² − 2‖U2ᵀU1‖_*.
  double nuclear = 0.0;
  for (double s : singular_values(matmul_tn(u2, u1))) nuclear += s;
  const double n1 = frobenius_norm(u1);
  const double n2 = frobenius_norm(u2);
  return std::sqrt(std::max(0.0, n1 * n1 + n2 * n2 - 2.0 * nuclear));
}

double procrustes_distance(const Graph& g1, const Graph& g2, std::size_t k) {
  require_same_size(g1, g2, "procrustes_distance");
  return procrustes_distance(top_laplacian_eigenvectors(g1, k), top_laplacian_eigenvectors(g2, k));
}

Matrix fbp_affinity(const Graph& g, double epsilon) {
  const std::size_t n = g.size();
  const auto deg = g.degrees();
  Matrix m = Matrix::identity(n);
  const auto& a = g.adjacency();
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) += epsilon * epsilon * deg[i];
    for (std::size_t j = 0; j < n; ++j) m(i, j) -= epsilon * a(i, j);
  }
  return solve_linear(m, Matrix::identity(n));
}

double matusita_distance(const Matrix& s1, const Matrix& s2) {
  if (s1.rows() != s2.rows() || s1.cols() != s2.cols()) throw ParameterError("matusita: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    const double d = std::sqrt(std::max(0.0, s1.data()[i])) - std::sqrt(std::max(0.0, s2.data()[i]));
    acc += d * d;
  }
  return std::sqrt(acc);
}

double deltacon_similarity(const Graph& g1, const Graph& g2, std::optional<double> epsilon) {
  require_same_size(g1, g2, "deltacon_similarity");
  double eps = 0.0;
  if (epsilon) {
    eps = *epsilon;
  } else {
    double dmax = 0.0;
    for (double d : g1.degrees()) dmax = std::max(dmax, d);
    for (double d : g2.degrees()) dmax = std::max(dmax, d);
    eps = 1.0 / (1.0 + dmax);
  }
  if (!(eps > 0.0)) throw ParameterError("deltacon: epsilon must be positive");
  return 1.0 / (1.0 + matusita_distance(fbp_affinity(g1, eps), fbp_affinity(g2, eps)));
}

double wl_kernel(const Graph& g1, const Graph& g2, std::size_t iterations) {
  const Graph* graphs[2] = {&g1, &g2};
  std::vector<std::size_t> labels[2] = {std::vector<std::size_t>(g1.size(), 0),
                                        std::vector<std::size_t>(g2.size(), 0)};
  std::map<std::size_t, double> hist[2];
  for (int g = 0; g < 2; ++g) hist[g][0] = static_cast<double>(labels[g].size());
  std::size_t next_label = 1;
  for (std::size_t it = 0; it < iterations; ++it) {
    // One dictionary per iteration, shared by both graphs.
    std::map<std::pair<std::size_t, std::vector<std::size_t>>, std::size_t> dict;
    std::vector<std::size_t> relabeled[2];
    for (int g = 0; g < 2; ++g) {
      const auto& a = graphs[g]->adjacency();
      const std::size_t n = graphs[g]->size();
      relabeled[g].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> neigh;
        for (std::size_t j = 0; j < n; ++j)
          if (a(i, j) != 0.0) neigh.push_back(labels[g][j]);
        std::sort(neigh.begin(), neigh.end());
        auto key = std::make_pair(labels[g][i], std::move(neigh));
        auto found = dict.find(key);
        if (found == dict.end()) found = dict.emplace(std::move(key), next_label++).first;
        relabeled[g][i] = found->second;
        hist[g][found->second] += 1.0;
      }
    }
    labels[0] = std::move(relabeled[0]);
    labels[1] = std::move(relabeled[1]);
  }
  auto dot = [](const std::map<std::size_t, double>& x, const std::map<std::size_t, double>& y) {
    double s = 0.0;
    for (const auto& [label, count] : x) {
      auto f = y.find(label);
      if (f != y.end()) s += count * f->second;
    }
    return s;
  };
  const double k11 = dot(hist[0], hist[0]);
  const double k22 = dot(hist[1], hist[1]);
  if (k11 == 0.0 || k22 == 0.0) return k11 == k22 ? 1.0 : 0.0;
  return dot(hist[0], hist[1]) / std::sqrt(k11 * k22);
}

Series sc_ncpd_statistic(const DynamicNetwork& net, std::size_t k, std::size_t half_window) {
  const std::size_t T = net.length();
  if (half_window == 0) throw ParameterError("sc-ncpd: half window must be >= 1");
  if (T < 2 * half_window) throw ParameterError("sc-ncpd: windows overrun the sequence");
  std::vector<Matrix> features;
  features.reserve(T);
  for (const auto& g : net.snapshots()) features.push_back(bottom_laplacian_eigenvectors(g, k));
  auto mean_of = [&](std::size_t from, std::size_t to) {  // 1-based inclusive
    Matrix m(features.front().rows(), k);
    for (std::size_t t = from; t <= to; ++t) m += features[t - 1];
    m *= 1.0 / static_cast<double>(to - from + 1);
    return m;
  };
  Series z;
  z.first = half_window + 1;
  for (std::size_t t = half_window + 1; t + half_window - 1 <= T; ++t) {
    const Matrix back = mean_of(t - half_window, t - 1);
    const Matrix fwd = mean_of(t, t + half_window - 1);
    z.values.push_back(frobenius_norm(matmul_tn(back, fwd)) / static_cast<double>(k));
  }
  return z;
}

namespace {

std::vector<double> lad_signature(const Graph& g, std::size_t k) {
  const std::size_t n = g.size();
  if (k == 0 || k > n) throw ParameterError("lad: need 1 <= k <= n");
  const auto deg = g.degrees();
  Matrix l = g.adjacency() * -1.0;
  for (std::size_t i = 0; i < n; ++i) l(i, i) += deg[i];
  // D − A is symmetric positive semidefinite: singular values are |eigenvalues|.
  auto vals = sym_eig(l).eigenvalues;
  for (auto& v : vals) v = std::abs(v);
  std::sort(vals.begin(), vals.end(), std::greater<>());
  vals.resize(k);
  const double norm = std::sqrt(std::inner_product(vals.begin(), vals.end(), vals.begin(), 0.0));
  for (auto& v : vals) v = norm > 0.0 ? v / norm : 0.0;
  return vals;
}

}  // namespace

Series lad_statistic(const DynamicNetwork& net, std::size_t k, std::size_t window) {
  const std::size_t T = net.length();
  if (window == 0) throw ParameterError("lad: window must be >= 1");
  if (T <= window) throw ParameterError("lad: window must be shorter than the sequence");
  std::vector<std::vector<double>> sig;
  for (const auto& g : net.snapshots()) sig.push_back(lad_signature(g, k));
  Series z;
  z.first = window + 1;
  for (std::size_t t = window + 1; t <= T; ++t) {
    std::vector<double> mean(k, 0.0);
    for (std::size_t s = t - window; s < t; ++s)
      for (std::size_t j = 0; j < k; ++j) mean[j] += sig[s - 1][j];
    const double norm = std::sqrt(std::inner_product(mean.begin(), mean.end(), mean.begin(), 0.0));
    double dot = 0.0;
    if (norm > 0.0)
      for (std::size_t j = 0; j < k; ++j) dot += mean[j] / norm * sig[t - 1][j];
    z.values.push_back(1.0 - std::abs(dot));
  }
  return z;
}

Matrix cusum_matrix(const std::vector<const Matrix*>& seq, std::size_t u, std::size_t h) {
  if (h == 0 || u < h || u + h > seq.size()) throw ParameterError("cusum: window overruns the sequence");
  Matrix c(seq.front()->rows(), seq.front()->cols());
  for (std::size_t s = u - h + 1; s <= u; ++s) c += *seq[s - 1];
  for (std::size_t s = u + 1; s <= u + h; ++s) c -= *seq[s - 1];
  c *= 1.0 / std::sqrt(2.0 * static_cast<double>(h));
  return c;
}

Series cusum_statistic(const DynamicNetwork& net, std::size_t half_window) {
  const std::size_t T = net.length();
  if (half_window == 0) throw ParameterError("cusum: half window must be >= 1");
  if (T < 4 * half_window) throw ParameterError("cusum: needs T >= 4 L'");
  std::vector<const Matrix*> even;  // G_2, G_4, ...
  std::vector<const Matrix*> odd;   // G_1, G_3, ...
  for (std::size_t t = 1; t <= T; ++t) (t % 2 == 0 ? even : odd).push_back(&net.at(t).adjacency());
  const std::size_t m = std::min(even.size(), odd.size());
  even.resize(m);
  odd.resize(m);
  Series z;
  z.first = 2 * half_window + 1;
  // Consecutive subsequence indices are two timestamps apart; fill the gaps by
  // holding the previous value so the series stays on a unit grid.
  for (std::size_t u = half_window; u + half_window <= m; ++u) {
    const Matrix ca = cusum_matrix(even, u, half_window);
    const Matrix cb = cusum_matrix(odd, u, half_window);
    const double nb = frobenius_norm(cb);
    const double v = nb > 0.0 ? frobenius_inner(cb, ca) / nb : 0.0;
    if (!z.values.empty()) z.values.push_back(z.values.back());
    z.values.push_back(v);
  }
  return z;
}

Series cusum2_statistic(const DynamicNetwork& net, std::size_t half_window) {
  const std::size_t T = net.length();
  if (half_window == 0) throw ParameterError("cusum2: half window must be >= 1");
  if (T < 2 * half_window) throw ParameterError("cusum2: needs T >= 2 L'");
  std::vector<const Matrix*> seq;
  for (const auto& g : net.snapshots()) seq.push_back(&g.adjacency());
  Series z;
  z.first = half_window + 1;
  for (std::size_t u = half_window; u + half_window <= T; ++u)
    z.values.push_back(matrix_norms(cusum_matrix(seq, u, half_window)).operator_norm);
  return z;
}

std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::Frobenius: return "frobenius";
    case Baseline::Procrustes: return "procrustes";
    case Baseline::DeltaCon: return "deltacon";
    case Baseline::Wl: return "wl";
    case Baseline::ScNcpd: return "sc-ncpd";
    case Baseline::Lad: return "lad";
    case Baseline::Cusum: return "cusum";
    case Baseline::Cusum2: return "cusum2";
  }
  return "?";
}

Baseline parse_baseline(const std::string& id) {
  for (auto b : all_baselines())
    if (to_string(b) == id) return b;
  throw ConfigError("unknown baseline '" + id + "'");
}

std::vector<Baseline> all_baselines() {
  return {Baseline::Frobenius, Baseline::Procrustes, Baseline::DeltaCon, Baseline::Wl,
          Baseline::ScNcpd,    Baseline::Lad,        Baseline::Cusum,    Baseline::Cusum2};
}

Orientation orientation_of(Baseline b) {
  switch (b) {
    case Baseline::DeltaCon:
    case Baseline::Wl:
    case Baseline::ScNcpd: return Orientation::SimilarityFalls;
    default: return Orientation::DistanceRises;
  }
}

BaselineStatistic baseline_statistic(Baseline method, const DynamicNetwork& net, std::size_t L,
                                     const BaselineConfig& config) {
  config.validate();
  const std::size_t T = net.length();
  BaselineStatistic out;
  out.orientation = orientation_of(method);
  switch (method) {
    case Baseline::Frobenius:
      out.statistic = pairwise_average(
          [&](std::size_t a, std::size_t b) { return frobenius_distance(net.at(a), net.at(b)); }, T, L);
      break;
    case Baseline::Procrustes: {
      std::vector<Matrix> u;
      for (const auto& g : net.snapshots()) u.push_back(top_laplacian_eigenvectors(g, config.k_spectral));
      out.statistic = pairwise_average(
          [&](std::size_t a, std::size_t b) { return procrustes_distance(u[a - 1], u[b - 1]); }, T, L);
      break;
    }
    case Baseline::DeltaCon: {
      // One ε for the whole sequence so every snapshot's operator is computed once.
      double eps = 0.0;
      if (config.deltacon_epsilon) {
        eps = *config.deltacon_epsilon;
      } else {
        double dmax = 0.0;
        for (const auto& g : net.snapshots())
          for (double d : g.degrees()) dmax = std::max(dmax, d);
        eps = 1.0 / (1.0 + dmax);
      }
      std::vector<Matrix> s;
      for (const auto& g : net.snapshots()) s.push_back(fbp_affinity(g, eps));
      out.statistic = pairwise_average(
          [&](std::size_t a, std::size_t b) { return 1.0 / (1.0 + matusita_distance(s[a - 1], s[b - 1])); }, T, L);
      break;
    }
    case Baseline::Wl:
      out.statistic = pairwise_average(
          [&](std::size_t a, std::size_t b) { return wl_kernel(net.at(a), net.at(b), config.wl_iterations); }, T, L);
      break;
    case Baseline::ScNcpd: out.statistic = sc_ncpd_statistic(net, config.k_spectral, config.half(L)); break;
    case Baseline::Lad: {
      out.statistic = lad_statistic(net, config.k_spectral, L);
      for (const auto& g : net.snapshots()) {
        if (g.degrees() == std::vector<double>(g.size(), 0.0)) {
          out.warnings.emplace_back("lad: empty snapshot has a zero spectral signature");
          break;
        }
      }
      break;
    }
    case Baseline::Cusum: out.statistic = cusum_statistic(net, config.half(L)); break;
    case Baseline::Cusum2: out.statistic = cusum2_statistic(net, config.half(L)); break;
  }
  return out;
}

}  // namespace ncpd
