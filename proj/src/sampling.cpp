#include "ncpd/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ncpd/error.hpp"

namespace ncpd {

std::size_t PairDataset::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [&](const PairExample& p) { return p.label == label; }));
}

int same_segment_label(std::size_t t1, std::size_t t2, std::span<const std::size_t> change_points) {
  const auto lo = std::min(t1, t2);
  const auto hi = std::max(t1, t2);
  for (auto c : change_points)
    if (c > lo && c <= hi) return 0;
  return 1;
}

SplitRanges split_sequence(std::size_t T, double train, double validation, double test) {
  if (T < 3) throw ParameterError("split_sequence: need at least 3 timestamps");
  if (!(train > 0.0) || !(validation > 0.0) || !(test > 0.0))
    throw ParameterError("split_sequence: every fraction must be positive");
  if (std::abs(train + validation + test - 1.0) > 1e-9)
    throw ParameterError("split_sequence: fractions must sum to 1");
  // A small slack keeps e.g. 0.57·100 from flooring to 56.
  const auto n_train = static_cast<std::size_t>(std::floor(train * static_cast<double>(T) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(validation * static_cast<double>(T) + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= T)
    throw ParameterError("split_sequence: a split would be empty for T=" + std::to_string(T));
  SplitRanges s;
  s.train = {1, n_train};
  s.validation = {n_train + 1, n_train + n_val};
  s.test = {n_train + n_val + 1, T};
  return s;
}

namespace {

template <typename Rng>
std::vector<PairExample> sample_without_replacement(std::vector<PairExample> pool, std::size_t count, Rng& rng) {
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

PairDataset random_scheme(TimeRange range, std::span<const std::size_t> change_points,
                          std::optional<std::size_t> n_pairs, std::mt19937_64& rng) {
  const std::size_t total = n_pairs.value_or(10 * range.length());
  if (total % 2 != 0) throw ParameterError("random_scheme: n_pairs must be even");
  std::vector<PairExample> positives;
  std::vector<PairExample> negatives;
  for (std::size_t a = range.first; a <= range.last; ++a) {
    for (std::size_t b = a + 1; b <= range.last; ++b) {
      const int label = same_segment_label(a, b, change_points);
      (label == 1 ? positives : negatives).push_back({a, b, label});
    }
  }
  const std::size_t half = total / 2;
  if (positives.size() < half)
    throw ParameterError("random_scheme: only " + std::to_string(positives.size()) +
                         " candidate pairs with label 1, requested " + std::to_string(half));
  if (negatives.size() < half)
    throw ParameterError("random_scheme: only " + std::to_string(negatives.size()) +
                         " candidate pairs with label 0, requested " + std::to_string(half));
  PairDataset out;
  out.split = "random";
  auto pos = sample_without_replacement(std::move(positives), half, rng);
  auto neg = sample_without_replacement(std::move(negatives), half, rng);
  out.pairs = std::move(pos);
  out.pairs.insert(out.pairs.end(), neg.begin(), neg.end());
  return out;
}

PairDataset windowed_scheme(TimeRange range, std::span<const std::size_t> change_points, std::size_t L) {
  if (L == 0) throw ParameterError("windowed_scheme: L must be >= 1");
  PairDataset out;
  out.split = "windowed";
  // Each timestamp is paired with its L predecessors, as in the detection window.
  for (std::size_t b = range.first; b <= range.last; ++b)
    for (std::size_t a = b > L ? b - L : 1; a < b; ++a)
      out.pairs.push_back({a, b, same_segment_label(a, b, change_points)});
  return out;
}

TimeRange centered_validation_window(std::size_t T, std::span<const std::size_t> change_points,
                                     std::size_t width, std::mt19937_64& rng) {
  if (change_points.empty()) throw ParameterError("centered_validation_window: no change-points");
  if (width == 0 || width > T) throw ParameterError("centered_validation_window: bad width");
  std::uniform_int_distribution<std::size_t> pick(0, change_points.size() - 1);
  const std::size_t c = change_points[pick(rng)];
  std::size_t first = c > width / 2 ? c - width / 2 : 1;
  if (first + width - 1 > T) first = T - width + 1;
  return {first, first + width - 1};
}

void write_pairs_csv(std::ostream& out, const PairDataset& data, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "t1,t2,label\n";
  for (const auto& p : data.pairs) out << p.t1 << ',' << p.t2 << ',' << p.label << '\n';
}

PairDataset read_pairs_csv(std::istream& in) {
  PairDataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("t1", 0) == 0) continue;
    std::istringstream row(line);
    PairExample p;
    char c1 = 0;
    char c2 = 0;
    if (!(row >> p.t1 >> c1 >> p.t2 >> c2 >> p.label) || c1 != ',' || c2 != ',' ||
        (p.label != 0 && p.label != 1) || p.t1 == 0 || p.t2 == 0 || p.t1 == p.t2) {
      throw ParseError("malformed pair row '" + line + "'", line_no);
    }
    data.pairs.push_back(p);
  }
  return data;
}

void save_pairs_csv(const std::string& path, const PairDataset& data, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_pairs_csv(out, data, comment);
}

PairDataset load_pairs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  auto d = read_pairs_csv(in);
  d.source = path;
  return d;
}

}  // namespace ncpd
