#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ncpd/graph.hpp"

namespace ncpd {

/// Statistic values at consecutive 1-based timestamps first, first+1, ...
struct Series {
  std::size_t first = 1;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  std::size_t last() const noexcept { return first + values.size() - 1; }
  double at(std::size_t t) const;
  friend bool operator==(const Series&, const Series&) = default;
};

/// Similarity-like statistics drop at a change; distance-like statistics rise.
enum class Orientation { SimilarityFalls, DistanceRises };

std::string to_string(Orientation o);

/// Score of the snapshots at two 1-based timestamps.
using PairScore = std::function<double(std::size_t, std::size_t)>;
using GraphScore = std::function<double(const Graph&, const Graph&)>;

/// Z_t = (1/L) Σ_{i=1..L} score(t, t−i) for t = L+1..T.
Series similarity_statistic(const PairScore& score, std::size_t T, std::size_t L);
Series similarity_statistic(const GraphScore& score, const DynamicNetwork& net, std::size_t L);

/// Declares t when every available Z_{t'} with t−L ≤ t' < t (at least one) is
/// above theta and Z_t ≤ theta. DistanceRises mirrors both comparisons.
std::vector<std::size_t> detect_online(const Series& z, std::size_t L, double theta,
                                       Orientation orientation = Orientation::SimilarityFalls);

enum class Localisation { ArgMin, MaxIncrement };

/// ArgMin picks the most change-like value (the minimum of a similarity, the
/// maximum of a distance); MaxIncrement the largest |Z_t − Z_{t−1}|. Ties go
/// to the earliest timestamp.
std::size_t localize_single_offline(const Series& z, Localisation mode,
                                    Orientation orientation = Orientation::SimilarityFalls);

/// |Z_t − Z_{t−1}| starting at first+1.
Series increments(const Series& z);

/// Windowed MMD estimate for t = L+2..T−L, radicand clamped at 0.
Series mmd_statistic(const PairScore& score, std::size_t T, std::size_t L);
Series mmd_statistic(const GraphScore& score, const DynamicNetwork& net, std::size_t L);

struct Calibration {
  double theta = 0.0;
  double f1 = 0.0;
  std::vector<double> candidates;
  std::string warning;
};

/// Threshold maximising the adjusted F1 of detect_online against `true_cps` over
/// the midpoints of the sorted unique values of z. Ties go to the most
/// conservative threshold. Without change-points, the fewest declarations win.
Calibration calibrate_threshold(const Series& z, std::span<const std::size_t> true_cps, std::size_t L,
                                Orientation orientation = Orientation::SimilarityFalls, std::size_t tol = 5);
/// Pooled calibration over several labelled statistics: mean adjusted F1 over
/// the series that carry change-points.
Calibration calibrate_threshold(std::span<const Series> zs, std::span<const std::vector<std::size_t>> true_cps,
                                std::size_t L, Orientation orientation = Orientation::SimilarityFalls,
                                std::size_t tol = 5);

struct DetectionTrace {
  Series statistic;
  std::size_t window = 0;
  double threshold = 0.0;
  Orientation orientation = Orientation::SimilarityFalls;
  std::vector<std::size_t> declared;
};

DetectionTrace make_trace(Series z, std::size_t L, double theta, Orientation orientation);

/// CSV "t,Z_t,declared" with an optional leading '#' comment line.
void write_trace_csv(std::ostream& out, const DetectionTrace& trace, const std::string& comment = {});
void save_trace_csv(const std::string& path, const DetectionTrace& trace, const std::string& comment = {});
/// Reads the statistic column back (declared flags are ignored).
Series read_trace_csv(std::istream& in);

}  // namespace ncpd
