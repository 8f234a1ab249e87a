#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ncpd/graph.hpp"
#include "ncpd/linalg.hpp"

namespace ncpd {

/// n series (rows) of m observations (columns).
struct TimeSeriesPanel {
  Matrix values;

  std::size_t series() const noexcept { return values.rows(); }
  std::size_t observations() const noexcept { return values.cols(); }
};

/// One row per series, comma-separated reals; '#' lines are comments.
TimeSeriesPanel read_panel_csv(std::istream& in);
TimeSeriesPanel load_panel_csv(const std::string& path);

/// Pearson correlation per full non-overlapping window (population
/// normalisation). Pairs involving a zero-variance series are 0, the diagonal 1.
std::vector<Matrix> windowed_correlations(const TimeSeriesPanel& panel, std::size_t window);

/// Empirical quantile with linear interpolation between order statistics of a
/// sorted sample: position q·(N − 1).
double quantile_sorted(std::span<const double> sorted, double q);

/// Edge (self-loops included) iff the entry lies strictly below the pooled
/// q_low-quantile or strictly above the pooled q_high-quantile of all entries.
std::vector<Graph> quantile_truncate(std::span<const Matrix> mats, double q_low, double q_high);

/// Edge iff |entry| > eta, diagonal dropped.
std::vector<Graph> threshold_binarize(std::span<const Matrix> mats, double eta);

struct StandardizedAttributes {
  std::vector<Matrix> attributes;
  std::vector<std::size_t> constant_columns;  // centred only
};

/// Centres and scales each attribute column by its mean and (population)
/// standard deviation pooled over all nodes and timestamps.
StandardizedAttributes standardize_attributes(std::span<const Matrix> attrs);

/// n × d attribute table for one timestamp: one row per node.
Matrix read_attribute_csv(std::istream& in);
/// Long format "t,node,attr_1,...,attr_d" (1-based t, 0-based node) into T
/// matrices of n rows.
std::vector<Matrix> read_long_attributes_csv(std::istream& in, std::size_t T, std::size_t n);
std::vector<Matrix> load_long_attributes_csv(const std::string& path, std::size_t T, std::size_t n);

/// One matrix per line: {"t": 1, "rows": n, "cols": n, "data": [row-major]}.
void write_matrices_jsonl(std::ostream& out, std::span<const Matrix> mats);
std::vector<Matrix> read_matrices_jsonl(std::istream& in);
void save_matrices_jsonl(const std::string& path, std::span<const Matrix> mats);
std::vector<Matrix> load_matrices_jsonl(const std::string& path);

}  // namespace ncpd
