#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ncpd {

/// Labelled pair of snapshot timestamps (1-based). label 1 = same regime.
struct PairExample {
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  int label = 0;

  friend bool operator==(const PairExample&, const PairExample&) = default;
};

struct PairDataset {
  std::vector<PairExample> pairs;
  std::string source;
  std::string split;

  std::size_t size() const noexcept { return pairs.size(); }
  std::size_t count_label(int label) const;
};

/// Inclusive 1-based timestamp range.
struct TimeRange {
  std::size_t first = 1;
  std::size_t last = 0;

  std::size_t length() const noexcept { return last >= first ? last - first + 1 : 0; }
  bool contains(std::size_t t) const noexcept { return t >= first && t <= last; }
  friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

struct SplitRanges {
  TimeRange train;
  TimeRange validation;
  TimeRange test;
};

/// 1 iff no change-point c satisfies min(t1,t2) < c <= max(t1,t2).
int same_segment_label(std::size_t t1, std::size_t t2, std::span<const std::size_t> change_points);

/// Three consecutive ranges covering [1, T]. Train and validation sizes are
/// floored, the remainder goes to test.
SplitRanges split_sequence(std::size_t T, double train, double validation, double test);

/// Balanced pairs drawn uniformly without replacement from all unordered pairs
/// in `range`. When n_pairs is not given it defaults to 10·|range|.
PairDataset random_scheme(TimeRange range, std::span<const std::size_t> change_points,
                          std::optional<std::size_t> n_pairs, std::mt19937_64& rng);

/// Every t in `range` paired with t−1, ..., t−L (timestamps below 1 skipped),
/// labelled, no subsampling. The earlier snapshot may precede the range.
PairDataset windowed_scheme(TimeRange range, std::span<const std::size_t> change_points, std::size_t L);

/// Window of `width` timestamps centred on a uniformly drawn change-point,
/// clamped to [1, T].
TimeRange centered_validation_window(std::size_t T, std::span<const std::size_t> change_points,
                                     std::size_t width, std::mt19937_64& rng);

/// CSV rows "t1,t2,label" preceded by a header; lines starting with '#' are comments.
void write_pairs_csv(std::ostream& out, const PairDataset& data, const std::string& comment = {});
PairDataset read_pairs_csv(std::istream& in);
void save_pairs_csv(const std::string& path, const PairDataset& data, const std::string& comment = {});
PairDataset load_pairs_csv(const std::string& path);

}  // namespace ncpd
