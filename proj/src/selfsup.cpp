#include "ncpd/selfsup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ncpd/error.hpp"

namespace ncpd {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

KMeansResult lloyd(const Matrix& x, std::size_t k, Rng& rng, std::size_t max_iterations) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Matrix c(k, d);
  // k-means++ seeding.
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  const std::size_t f = first(rng);
  std::copy(x.row(f).begin(), x.row(f).end(), c.row(0).begin());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], squared_distance(x.row(i), c.row(j - 1)));
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= dist[pick];
        if (r < 0.0 && dist[pick] > 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(j).begin());
  }

  KMeansResult r;
  r.labels.assign(n, 0);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double dd = squared_distance(x.row(i), c.row(j));
        if (dd < bd) {
          bd = dd;
          best = j;
        }
      }
      if (best != r.labels[i]) changed = true;
      r.labels[i] = best;
    }
    if (!changed) break;
    Matrix sum(k, d);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[r.labels[i]];
      auto row = sum.row(r.labels[i]);
      for (std::size_t q = 0; q < d; ++q) row[q] += x(i, q);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t q = 0; q < d; ++q) c(j, q) = sum(j, q) / static_cast<double>(count[j]);
    }
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) r.inertia += squared_distance(x.row(i), c.row(r.labels[i]));
  r.centroids = std::move(c);
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, std::size_t restarts, std::size_t max_iterations) {
  if (k == 0) throw ParameterError("kmeans: k must be >= 1");
  if (k > points.rows()) throw ParameterError("kmeans: k exceeds the number of points");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r) {
    auto run = lloyd(points, k, rng, max_iterations);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

Matrix signed_spectral_embedding(const Matrix& c, std::size_t k) {
  if (!c.is_square() || !is_symmetric(c, 1e-9)) throw ParameterError("signed clustering: matrix must be symmetric");
  const std::size_t n = c.rows();
  if (k == 0 || k > n) throw ParameterError("signed clustering: need 1 <= k <= n");
  std::vector<double> dbar(n, 0.0);
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dbar[i] += std::abs(c(i, j));
    inv_sqrt[i] = dbar[i] > 0.0 ? 1.0 / std::sqrt(dbar[i]) : 0.0;
  }
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) l(i, j) = inv_sqrt[i] * ((i == j ? dbar[i] : 0.0) - c(i, j)) * inv_sqrt[j];
  const auto e = sym_eig(l);
  Matrix out(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t q = 0; q < k; ++q) out(i, q) = e.eigenvectors(i, n - 1 - q);
  return out;
}

Partition signed_spectral_clustering(const Matrix& c, std::size_t k, Rng& rng) {
  if (k < 2) throw ParameterError("signed clustering: k must be >= 2");
  if (k > c.rows()) throw ParameterError("signed clustering: k exceeds the node count");
  const Matrix x = signed_spectral_embedding(c, k);
  return {kmeans(x, k, rng).labels, k};
}

double mean_silhouette(const Matrix& points, std::span<const std::size_t> labels) {
  const std::size_t n = points.rows();
  if (labels.size() != n) throw ParameterError("silhouette: label count mismatch");
  if (n == 0) return 0.0;
  const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> size(k, 0);
  for (auto l : labels) ++size[l];
  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (size[labels[i]] <= 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[labels[j]] += std::sqrt(squared_distance(points.row(i), points.row(j)));
    const double a = sums[labels[i]] / static_cast<double>(size[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < k; ++q)
      if (q != labels[i] && size[q] > 0) b = std::min(b, sums[q] / static_cast<double>(size[q]));
    if (!std::isfinite(b)) continue;
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

std::size_t silhouette_select_k(const Matrix& c, std::span<const std::size_t> candidates, Rng& rng) {
  if (candidates.empty()) throw ParameterError("silhouette_select_k: no candidates");
  std::size_t best_k = 0;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  for (auto k : sorted) {
    const Matrix x = signed_spectral_embedding(c, k);
    const double s = mean_silhouette(x, kmeans(x, k, rng).labels);
    if (s > best) {
      best = s;
      best_k = k;
    }
  }
  return best_k;
}

double ari(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw ParameterError("ari: partitions have different sizes");
  const std::size_t n = a.size();
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> rows;
  std::map<std::size_t, double> cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [key, v] : table) index += c2(v);
  double sa = 0.0;
  double sb = 0.0;
  for (const auto& [key, v] : rows) sa += c2(v);
  for (const auto& [key, v] : cols) sb += c2(v);
  const double total = c2(static_cast<double>(n));
  const double expected = total > 0.0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  // Both partitions trivial in the same way (all singletons or one block).
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double ari(const Partition& a, const Partition& b) { return ari(a.assignments, b.assignments); }

Matrix snapshot_similarity_matrix(std::span<const Partition> partitions) {
  const std::size_t T = partitions.size();
  Matrix s(T, T, 1.0);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = i + 1; j < T; ++j) s(i, j) = s(j, i) = ari(partitions[i], partitions[j]);
  return s;
}

std::vector<std::size_t> cluster_snapshots(const Matrix& sim, std::size_t clusters, Rng& rng) {
  if (!sim.is_square() || !is_symmetric(sim, 1e-9)) throw ParameterError("cluster_snapshots: matrix must be symmetric");
  const std::size_t T = sim.rows();
  if (clusters == 0) throw ParameterError("cluster_snapshots: need at least one cluster");
  if (clusters > T) throw ParameterError("cluster_snapshots: more clusters than snapshots");
  if (clusters == 1) return std::vector<std::size_t>(T, 0);
  Matrix w = sim;
  for (auto& v : w.data()) v = std::max(v, 0.0);
  std::vector<double> inv_sqrt(T);
  for (std::size_t i = 0; i < T; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < T; ++j) d += w(i, j);
    inv_sqrt[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Matrix m(T, T);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < T; ++j) m(i, j) = inv_sqrt[i] * w(i, j) * inv_sqrt[j];
  // Largest eigenvectors of D^{-1/2} W D^{-1/2} = smallest of the normalised Laplacian.
  const auto e = sym_eig(m);
  Matrix x(T, clusters);
  for (std::size_t i = 0; i < T; ++i) {
    double norm = 0.0;
    for (std::size_t q = 0; q < clusters; ++q) {
      x(i, q) = e.eigenvectors(i, q);
      norm += x(i, q) * x(i, q);
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (std::size_t q = 0; q < clusters; ++q) x(i, q) /= norm;
  }
  return kmeans(x, clusters, rng).labels;
}

std::vector<std::size_t> smooth_labels_to_changepoints(std::span<const std::size_t> labels) {
  if (labels.empty()) return {};
  std::map<std::size_t, std::pair<double, double>> acc;  // label → (sum of t, count)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    acc[labels[i]].first += static_cast<double>(i + 1);
    acc[labels[i]].second += 1.0;
  }
  std::vector<double> centroids;
  for (const auto& [label, v] : acc) centroids.push_back(v.first / v.second);
  std::sort(centroids.begin(), centroids.end());
  std::vector<std::size_t> cps;
  std::size_t prev = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double t = static_cast<double>(i + 1);
    std::size_t best = 0;
    for (std::size_t c = 1; c < centroids.size(); ++c)
      if (std::abs(t - centroids[c]) < std::abs(t - centroids[best])) best = c;
    if (i > 0 && best != prev) cps.push_back(i + 1);
    prev = best;
  }
  return cps;
}

double eigen_entropy(const Matrix& c) {
  if (!c.is_square() || !is_symmetric(c, 1e-9)) throw ParameterError("eigen_entropy: matrix must be symmetric");
  bool nonzero = false;
  for (double v : c.data()) nonzero = nonzero || v != 0.0;
  if (!nonzero) throw ParameterError("eigen_entropy: zero matrix");
  const auto e = sym_eig(c);
  double total = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i) total += std::abs(e.eigenvectors(i, 0));
  double h = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    const double p = std::abs(e.eigenvectors(i, 0)) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

SelfsupResult selfsup_pipeline(std::span<const Matrix> correlations, const SelfsupConfig& config) {
  if (correlations.empty()) throw ParameterError("selfsup: no correlation matrices");
  if (config.k_candidates.empty()) throw ParameterError("selfsup: no candidate cluster counts");
  const std::size_t n = correlations.front().rows();
  Rng rng(config.seed);
  SelfsupResult r;

  std::vector<std::size_t> candidates;
  for (auto k : config.k_candidates)
    if (k >= 2 && k <= n) candidates.push_back(k);
  if (candidates.empty()) throw ParameterError("selfsup: no candidate k in [2, n]");
  std::sort(candidates.begin(), candidates.end());

  std::vector<Matrix> embeddings;
  embeddings.reserve(correlations.size());
  const std::size_t kmax = candidates.back();
  for (const auto& c : correlations) {
    if (c.rows() != n) throw ParameterError("selfsup: correlation matrices differ in size");
    embeddings.push_back(signed_spectral_embedding(c, kmax));
  }
  auto leading = [&](const Matrix& x, std::size_t k) {
    Matrix out(x.rows(), k);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t q = 0; q < k; ++q) out(i, q) = x(i, q);
    return out;
  };

  double best = -std::numeric_limits<double>::infinity();
  std::vector<Partition> best_partitions;
  for (auto k : candidates) {
    std::vector<Partition> parts;
    double s = 0.0;
    for (const auto& emb : embeddings) {
      const Matrix x = leading(emb, k);
      auto labels = kmeans(x, k, rng).labels;
      s += mean_silhouette(x, labels);
      parts.push_back({std::move(labels), k});
    }
    s /= static_cast<double>(embeddings.size());
    r.silhouette.push_back(s);
    if (s > best) {
      best = s;
      r.k = k;
      best_partitions = std::move(parts);
    }
  }
  r.partitions = std::move(best_partitions);
  r.similarity = snapshot_similarity_matrix(r.partitions);
  r.snapshot_labels = cluster_snapshots(r.similarity, std::min(config.clusters, correlations.size()), rng);
  r.change_points = smooth_labels_to_changepoints(r.snapshot_labels);
  return r;
}

}  // namespace ncpd
