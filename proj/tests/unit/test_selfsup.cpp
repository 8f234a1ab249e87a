#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ncpd/error.hpp"
#include "ncpd/selfsup.hpp"

using namespace ncpd;

namespace {

// Pair-counting form of the adjusted Rand index.
double ari_pairs(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  double both = 0.0;
  double in_a = 0.0;
  double in_b = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
      total += 1.0;
    }
  const double expected = in_a * in_b / total;
  const double max_index = 0.5 * (in_a + in_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

std::vector<std::size_t> random_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<std::size_t> out(n);
  for (auto& v : out) v = pick(rng);
  return out;
}

Matrix planted_signed(const std::vector<std::size_t>& blocks, double noise, Rng& rng) {
  const std::size_t n = blocks.size();
  std::normal_distribution<double> eps(0.0, noise);
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) c(i, j) = c(j, i) = (blocks[i] == blocks[j] ? 0.7 : -0.3) + eps(rng);
  }
  return c;
}

}  // namespace

TEST(Ari, HandCasesAndLabelInvariance) {
  const std::vector<std::size_t> a{0, 0, 1, 1};
  const std::vector<std::size_t> b{0, 1, 0, 1};
  EXPECT_EQ(ari(a, a), 1.0);
  EXPECT_EQ(ari(a, std::vector<std::size_t>{5, 5, 2, 2}), 1.0);
  EXPECT_NEAR(ari(a, b), -0.5, 1e-15);
  EXPECT_NEAR(ari(a, b), ari_pairs(a, b), 1e-15);
  EXPECT_THROW(ari(a, std::vector<std::size_t>{0, 1}), ParameterError);
}

TEST(Ari, MatchesPairCountingOracle) {
  Rng rng(1);
  std::uniform_int_distribution<std::size_t> size(2, 15);
  std::uniform_int_distribution<std::size_t> clusters(1, 5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = size(rng);
    const auto a = random_labels(n, clusters(rng), rng);
    const auto b = random_labels(n, clusters(rng), rng);
    EXPECT_NEAR(ari(a, b), ari_pairs(a, b), 1e-10);
    EXPECT_EQ(ari(a, b), ari(b, a));
    EXPECT_LE(ari(a, b), 1.0 + 1e-12);
    EXPECT_GE(ari(a, b), -1.0 - 1e-12);
  }
}

TEST(KMeans, SeparatedBlobs) {
  Rng rng(2);
  std::normal_distribution<double> jitter(0.0, 0.05);
  Matrix pts(30, 2);
  for (std::size_t i = 0; i < 30; ++i) {
    pts(i, 0) = static_cast<double>(i / 10) * 5.0 + jitter(rng);
    pts(i, 1) = jitter(rng);
  }
  const auto r = kmeans(pts, 3, rng);
  std::vector<std::size_t> truth(30);
  for (std::size_t i = 0; i < 30; ++i) truth[i] = i / 10;
  EXPECT_EQ(ari(r.labels, truth), 1.0);
  EXPECT_LT(r.inertia, 1.0);
  EXPECT_THROW(kmeans(pts, 31, rng), ParameterError);
  EXPECT_THROW(kmeans(pts, 0, rng), ParameterError);
}

TEST(SignedClustering, DisconnectedPositiveBlocks) {
  Matrix c(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) c(i, j) = (i / 3 == j / 3) ? 1.0 : 0.0;
  Rng rng(3);
  const auto p = signed_spectral_clustering(c, 2, rng);
  EXPECT_EQ(ari(p.assignments, std::vector<std::size_t>{0, 0, 0, 1, 1, 1}), 1.0);
  EXPECT_EQ(p.k, 2u);
  EXPECT_THROW(signed_spectral_clustering(c, 7, rng), ParameterError);
  EXPECT_THROW(signed_spectral_clustering(c, 1, rng), ParameterError);
}

TEST(SignedClustering, KEqualsNGivesSingletons) {
  Rng rng(4);
  const auto c = planted_signed({0, 0, 1, 1, 2}, 0.05, rng);
  const auto p = signed_spectral_clustering(c, 5, rng);
  std::vector<std::size_t> sorted = p.assignments;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()) - sorted.begin(), 5);
}

TEST(SignedClustering, PlantedThreeBlocksMonteCarlo) {
  std::vector<std::size_t> blocks(30);
  for (std::size_t i = 0; i < 30; ++i) blocks[i] = i % 3;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto c = planted_signed(blocks, 0.15, rng);
    total += ari(signed_spectral_clustering(c, 3, rng).assignments, blocks);
  }
  EXPECT_GE(total / 20.0, 0.9);
}

TEST(SignedEmbedding, SmallestEigenvectorsOfSignedLaplacian) {
  Rng rng(5);
  const auto c = planted_signed({0, 0, 1, 1, 1, 2}, 0.1, rng);
  const auto u = signed_spectral_embedding(c, 2);
  const std::size_t n = 6;
  Matrix lap(n, n);
  std::vector<double> dbar(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dbar[i] += std::abs(c(i, j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      lap(i, j) = ((i == j ? dbar[i] : 0.0) - c(i, j)) / std::sqrt(dbar[i] * dbar[j]);
  const auto eig = sym_eig(lap);
  for (std::size_t col = 0; col < 2; ++col) {
    // L u = λ u with λ among the two smallest eigenvalues.
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = u(i, col);
    double lambda = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) lambda += v[i] * lap(i, j) * v[j];
    EXPECT_LE(lambda, eig.eigenvalues[n - 2] + 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
      double lv = 0.0;
      for (std::size_t j = 0; j < n; ++j) lv += lap(i, j) * v[j];
      EXPECT_NEAR(lv, lambda * v[i], 1e-8);
    }
  }
}

TEST(Silhouette, PerfectSeparationAndSelection) {
  Matrix pts{{0.0, 0.0}, {0.0, 0.001}, {10.0, 0.0}, {10.0, 0.001}};
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  EXPECT_NEAR(mean_silhouette(pts, labels), 1.0, 1e-3);
  EXPECT_LE(mean_silhouette(pts, labels), 1.0);
  EXPECT_EQ(mean_silhouette(pts, std::vector<std::size_t>{0, 1, 2, 3}), 0.0);

  Matrix c(8, 8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) c(i, j) = (i / 4 == j / 4) ? 1.0 : -0.2;
  Rng rng(6);
  const std::vector<std::size_t> cands{2, 3, 4};
  EXPECT_EQ(silhouette_select_k(c, cands, rng), 2u);
  const std::vector<std::size_t> single{3};
  EXPECT_EQ(silhouette_select_k(c, single, rng), 3u);
  EXPECT_THROW(silhouette_select_k(c, std::vector<std::size_t>{}, rng), ParameterError);
}

TEST(SnapshotSimilarity, MatchesPairwiseAri) {
  Rng rng(7);
  std::vector<Partition> parts;
  for (int t = 0; t < 6; ++t) parts.push_back({random_labels(12, 3, rng), 3});
  const auto s = snapshot_similarity_matrix(parts);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(s(i, i), 1.0);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(s(i, j), s(j, i));
      if (i != j) EXPECT_NEAR(s(i, j), ari_pairs(parts[i].assignments, parts[j].assignments), 1e-10);
    }
  }
  const std::vector<Partition> one{parts[0]};
  EXPECT_EQ(snapshot_similarity_matrix(one).rows(), 1u);
  const std::vector<Partition> same(4, parts[0]);
  const auto ones = snapshot_similarity_matrix(same);
  for (double v : ones.data()) EXPECT_EQ(v, 1.0);
}

TEST(ClusterSnapshots, BlockSimilarityAndEdgeCases) {
  Matrix sim(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) sim(i, j) = (i / 3 == j / 3) ? 1.0 : -0.1;
  Rng rng(8);
  EXPECT_EQ(ari(cluster_snapshots(sim, 2, rng), std::vector<std::size_t>{0, 0, 0, 1, 1, 1}), 1.0);
  const auto one = cluster_snapshots(sim, 1, rng);
  EXPECT_EQ(one, std::vector<std::size_t>(6, 0));
  EXPECT_THROW(cluster_snapshots(sim, 7, rng), ParameterError);
}

TEST(ClusterSnapshots, PlantedTwoRegimesMonteCarlo) {
  double total = 0.0;
  std::vector<std::size_t> truth(20);
  for (std::size_t i = 0; i < 20; ++i) truth[i] = i < 12 ? 0 : 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    std::normal_distribution<double> eps(0.0, 0.1);
    Matrix sim(20, 20);
    for (std::size_t i = 0; i < 20; ++i) {
      sim(i, i) = 1.0;
      for (std::size_t j = i + 1; j < 20; ++j) sim(i, j) = sim(j, i) = (truth[i] == truth[j] ? 0.6 : 0.1) + eps(rng);
    }
    total += ari(cluster_snapshots(sim, 2, rng), truth);
  }
  EXPECT_GE(total / 20.0, 0.9);
}

TEST(Smoothing, HandCases) {
  using V = std::vector<std::size_t>;
  EXPECT_EQ(smooth_labels_to_changepoints(V{0, 0, 0, 1, 1, 1}), V{4});
  // Centroids 2 and 17/4.
  EXPECT_EQ(smooth_labels_to_changepoints(V{0, 1, 0, 1, 1, 1}), V{4});
  EXPECT_TRUE(smooth_labels_to_changepoints(V{3, 3, 3}).empty());
  // Centroids 4 and 2.5: the early 0 is absorbed by the later label.
  EXPECT_EQ(smooth_labels_to_changepoints(V{0, 1, 1, 0, 0, 0}), V{4});
}

TEST(Smoothing, InvariantToLabelRenaming) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto labels = random_labels(15, 4, rng);
    std::vector<std::size_t> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> renamed;
    for (auto l : labels) renamed.push_back(perm[l] + 10);
    EXPECT_EQ(smooth_labels_to_changepoints(labels), smooth_labels_to_changepoints(renamed));
  }
}

TEST(EigenEntropy, ClosedForms) {
  Matrix k5(5, 5, 1.0);
  for (std::size_t i = 0; i < 5; ++i) k5(i, i) = 0.0;
  EXPECT_NEAR(eigen_entropy(k5), std::log(5.0), 1e-12);
  Matrix star(4, 4);
  for (std::size_t i = 1; i < 4; ++i) star(0, i) = star(i, 0) = 1.0;
  const double s3 = std::sqrt(3.0);
  const double pc = s3 / (s3 + 3.0);
  const double pl = 1.0 / (s3 + 3.0);
  EXPECT_NEAR(eigen_entropy(star), -(pc * std::log(pc) + 3.0 * pl * std::log(pl)), 1e-12);
  EXPECT_EQ(eigen_entropy(Matrix{{2.0}}), 0.0);
  EXPECT_THROW(eigen_entropy(Matrix(3, 3)), ParameterError);
}

TEST(Pipeline, RecoversRegimeSwitchDeterministically) {
  // Two correlation regimes with different block structure.
  Rng rng(10);
  std::vector<std::size_t> a(24);
  std::vector<std::size_t> b(24);
  for (std::size_t i = 0; i < 24; ++i) {
    a[i] = i / 8;
    b[i] = i % 2;
  }
  std::vector<Matrix> corr;
  for (int t = 0; t < 16; ++t) corr.push_back(planted_signed(t < 9 ? a : b, 0.05, rng));
  SelfsupConfig config;
  config.k_candidates = {2, 3, 4};
  config.clusters = 2;
  config.seed = 1;
  const auto r = selfsup_pipeline(corr, config);
  EXPECT_EQ(r.change_points, std::vector<std::size_t>{10});
  EXPECT_EQ(r.partitions.size(), 16u);
  EXPECT_EQ(r.silhouette.size(), 3u);
  const auto again = selfsup_pipeline(corr, config);
  EXPECT_EQ(again.change_points, r.change_points);
  EXPECT_EQ(again.k, r.k);
}
