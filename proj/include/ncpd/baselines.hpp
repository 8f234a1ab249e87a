#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ncpd/detection.hpp"
#include "ncpd/graph.hpp"
#include "ncpd/linalg.hpp"

namespace ncpd {

struct BaselineConfig {
  std::size_t k_spectral = 6;
  std::optional<std::size_t> window_half;  // L' (default L/2, at least 1)
  std::optional<double> deltacon_epsilon;
  std::size_t wl_iterations = 5;

  std::size_t half(std::size_t L) const;
  void validate() const;
};

/// ‖A1 − A2‖_F
double frobenius_distance(const Graph& g1, const Graph& g2);

/// Eigenvectors of the k largest eigenvalues of I − D^{-1/2} A D^{-1/2}
/// (isolated nodes contribute a zero row and column to the normalised part).
Matrix top_laplacian_eigenvectors(const Graph& g, std::size_t k);

/// min over orthogonal O of ‖U1 − U2 O‖_F.
double procrustes_distance(const Graph& g1, const Graph& g2, std::size_t k);
double procrustes_distance(const Matrix& u1, const Matrix& u2);

/// Fast belief propagation affinity (I + ε²D − εA)^{-1}.
Matrix fbp_affinity(const Graph& g, double epsilon);
/// 1 / (1 + Matusita distance between the FBP affinities). The default ε is
/// 1 / (1 + largest degree over both graphs).
double deltacon_similarity(const Graph& g1, const Graph& g2, std::optional<double> epsilon = std::nullopt);
double matusita_distance(const Matrix& s1, const Matrix& s2);

/// Normalised Weisfeiler-Lehman subtree kernel with a constant initial label.
double wl_kernel(const Graph& g1, const Graph& g2, std::size_t iterations = 5);

/// ‖Ū_bᵀ Ū_f‖_F / k with Ū the mean bottom-k normalised-Laplacian eigenvectors
/// over the h snapshots before t and the h snapshots from t on.
Series sc_ncpd_statistic(const DynamicNetwork& net, std::size_t k, std::size_t half_window);

/// 1 − |σ̃_t · σ_t| with σ the unit top-k singular values of D − A and σ̃_t
/// the renormalised mean over the previous `window` snapshots.
Series lad_statistic(const DynamicNetwork& net, std::size_t k, std::size_t window);

/// (Σ_{s=u−h+1..u} X_s − Σ_{s=u+1..u+h} X_s) / sqrt(2h) for u = h..len−h.
Matrix cusum_matrix(const std::vector<const Matrix*>& seq, std::size_t u, std::size_t h);

/// Frobenius inner product of the unit-normalised odd-timestamp CUSUM matrix
/// with the even-timestamp one, aligned by subsequence index.
Series cusum_statistic(const DynamicNetwork& net, std::size_t half_window);
/// Operator norm of the full-sequence CUSUM matrix.
Series cusum2_statistic(const DynamicNetwork& net, std::size_t half_window);

enum class Baseline { Frobenius, Procrustes, DeltaCon, Wl, ScNcpd, Lad, Cusum, Cusum2 };

std::string to_string(Baseline b);
Baseline parse_baseline(const std::string& id);
std::vector<Baseline> all_baselines();
Orientation orientation_of(Baseline b);

struct BaselineStatistic {
  Series statistic;
  Orientation orientation = Orientation::SimilarityFalls;
  std::vector<std::string> warnings;
};

/// Statistic of a baseline over a network with window L. Pairwise measures are
/// averaged over the previous L snapshots exactly like the learned similarity.
BaselineStatistic baseline_statistic(Baseline method, const DynamicNetwork& net, std::size_t L,
                                     const BaselineConfig& config = {});

}  // namespace ncpd
