#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ncpd/linalg.hpp"

namespace ncpd {

/// One network snapshot: symmetric nonnegative adjacency and optional node attributes.
class Graph {
 public:
  Graph() = default;
  /// Validates symmetry (1e-12), nonnegativity and the attribute row count.
  explicit Graph(Matrix adjacency, std::optional<Matrix> attributes = std::nullopt);

  /// Binary graph from an undirected edge list; (i, i) entries are self-loops.
  static Graph from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges);
  static Graph empty(std::size_t n);

  std::size_t size() const noexcept { return adjacency_.rows(); }
  const Matrix& adjacency() const noexcept { return adjacency_; }
  const std::optional<Matrix>& attributes() const noexcept { return attributes_; }
  bool attributed() const noexcept { return attributes_.has_value(); }

  /// Row sums of the adjacency matrix.
  std::vector<double> degrees() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  Matrix adjacency_;
  std::optional<Matrix> attributes_;
};

/// Snapshots over a fixed, consistently ordered node set.
///
/// Timestamps are 1-based; a change-point at tau means snapshot tau is the first
/// one drawn from the new regime.
class DynamicNetwork {
 public:
  DynamicNetwork() = default;
  explicit DynamicNetwork(std::vector<Graph> snapshots, std::vector<std::size_t> change_points = {},
                          std::vector<std::int64_t> labels = {});

  std::size_t length() const noexcept { return snapshots_.size(); }
  std::size_t nodes() const noexcept { return snapshots_.empty() ? 0 : snapshots_.front().size(); }
  /// Snapshot at 1-based timestamp t.
  const Graph& at(std::size_t t) const;
  const std::vector<Graph>& snapshots() const noexcept { return snapshots_; }
  const std::vector<std::size_t>& change_points() const noexcept { return change_points_; }
  const std::vector<std::int64_t>& labels() const noexcept { return labels_; }

  /// Sub-network over timestamps [first, last] (1-based, inclusive); change-points
  /// strictly inside the range are kept and re-indexed.
  DynamicNetwork slice(std::size_t first, std::size_t last) const;

  friend bool operator==(const DynamicNetwork&, const DynamicNetwork&) = default;

 private:
  std::vector<Graph> snapshots_;
  std::vector<std::size_t> change_points_;
  std::vector<std::int64_t> labels_;
};

/// Node feature initialisation for unattributed graphs.
struct EncodingKind {
  enum class Type { Degree, RandomWalk, Laplacian, Identity };
  Type type = Type::Degree;
  std::size_t k = 1;

  static EncodingKind degree() { return {Type::Degree, 1}; }
  static EncodingKind random_walk(std::size_t k) { return {Type::RandomWalk, k}; }
  static EncodingKind laplacian(std::size_t k) { return {Type::Laplacian, k}; }
  static EncodingKind identity() { return {Type::Identity, 1}; }

  /// Output feature width for a graph with n nodes.
  std::size_t width(std::size_t n) const;
  std::string to_string() const;
  /// Parses "degree", "identity", "random-walk[:k]", "laplacian[:k]" (k defaults to 3).
  static EncodingKind parse(const std::string& text);

  friend bool operator==(const EncodingKind&, const EncodingKind&) = default;
};

/// D̃^{-1/2}(A+I)D̃^{-1/2} with D̃ = diag((A+I)·1).
Matrix normalized_augmented_adjacency(const Graph& g);

/// Positional encoding matrix H⁰ (n × width).
Matrix positional_encoding(const Graph& g, EncodingKind kind);

/// Relabels node i as sigma[i]; adjacency and attribute rows move together.
Graph permute(const Graph& g, std::span<const std::size_t> sigma);

/// Compressed sparse rows, used for repeated products with a fixed sparse operator.
struct SparseRows {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> columns;
  std::vector<double> values;

  static SparseRows from_dense(const Matrix& m);
  /// this · x
  Matrix multiply(const Matrix& x) const;
};

bool is_connected(const Graph& g);

// ---------------------------------------------------------------------------
// Dynamic network file format (JSON lines)
//
//   line 0:  {"n": N, "T": T, "change_points": [...], "labels": [...], "meta": {...}}
//   line t:  {"t": t, "edges": [[i, j], ...], "attrs": [[...], ...]}
//
// Node indices are 0-based with i <= j; i == j encodes a self-loop. An edge
// with a weight other than 1 is written as [i, j, w]. "change_points",
// "labels", "meta" and "attrs" are optional.
// ---------------------------------------------------------------------------

/// Free-form provenance carried in the header ("seed", "config_hash", ...).
struct FileMeta {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config_hash;
};

void write_network(std::ostream& out, const DynamicNetwork& net, const FileMeta& meta = {});
DynamicNetwork read_network(std::istream& in, FileMeta* meta = nullptr);
void save_network(const std::string& path, const DynamicNetwork& net, const FileMeta& meta = {});
DynamicNetwork load_network(const std::string& path, FileMeta* meta = nullptr);

}  // namespace ncpd
