#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ncpd/linalg.hpp"

namespace ncpd {

using Rng = std::mt19937_64;

struct Partition {
  std::vector<std::size_t> assignments;
  std::size_t k = 0;

  std::size_t size() const noexcept { return assignments.size(); }
};

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centroids;
  double inertia = 0.0;
};

/// k-means++ seeding, `restarts` runs of Lloyd iterations, lowest inertia kept.
KMeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, std::size_t restarts = 10,
                    std::size_t max_iterations = 100);

/// Rows of the k smallest-eigenvalue eigenvectors of D̄^{-1/2}(D̄ − C)D̄^{-1/2},
/// D̄ = diag(Σ_j |C_ij|).
Matrix signed_spectral_embedding(const Matrix& c, std::size_t k);
Partition signed_spectral_clustering(const Matrix& c, std::size_t k, Rng& rng);

/// Mean silhouette coefficient with Euclidean distances; singleton clusters score 0.
double mean_silhouette(const Matrix& points, std::span<const std::size_t> labels);
/// k with the highest mean silhouette; ties to the smallest k.
std::size_t silhouette_select_k(const Matrix& c, std::span<const std::size_t> candidates, Rng& rng);

double ari(std::span<const std::size_t> a, std::span<const std::size_t> b);
double ari(const Partition& a, const Partition& b);

/// Pairwise ARI, unit diagonal.
Matrix snapshot_similarity_matrix(std::span<const Partition> partitions);

/// Normalised spectral clustering of a similarity matrix (negative entries
/// clipped to 0), rows of the embedding normalised before k-means.
std::vector<std::size_t> cluster_snapshots(const Matrix& sim, std::size_t clusters, Rng& rng);

/// Relabels each timestamp to its nearest cluster centroid timestamp (ties to the
/// earlier centroid) and returns the 1-based timestamps where the label changes.
std::vector<std::size_t> smooth_labels_to_changepoints(std::span<const std::size_t> labels);

/// Shannon entropy of the L1-normalised principal eigenvector.
double eigen_entropy(const Matrix& c);

struct SelfsupConfig {
  std::vector<std::size_t> k_candidates{10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  std::size_t clusters = 9;  // C
  std::uint64_t seed = 0;
};

struct SelfsupResult {
  std::size_t k = 0;
  std::vector<double> silhouette;  // mean over snapshots, one per candidate
  std::vector<Partition> partitions;
  Matrix similarity;
  std::vector<std::size_t> snapshot_labels;
  std::vector<std::size_t> change_points;
};

/// Clusters every correlation matrix with one k chosen by mean silhouette over
/// all snapshots, compares snapshots by ARI, clusters the snapshots and smooths
/// the labels into change-points.
SelfsupResult selfsup_pipeline(std::span<const Matrix> correlations, const SelfsupConfig& config);

}  // namespace ncpd
