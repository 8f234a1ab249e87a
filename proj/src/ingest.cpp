#include "ncpd/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ncpd/error.hpp"

namespace ncpd {

namespace {

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("bad numeric field '" + cell + "'", line_no);
    }
  }
  return out;
}

// Rows of numbers, skipping comments, blank lines and a non-numeric header.
std::vector<std::pair<std::size_t, std::vector<double>>> read_rows(std::istream& in) {
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (rows.empty() && std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    rows.emplace_back(line_no, parse_row(line, line_no));
  }
  return rows;
}

Matrix rows_to_matrix(const std::vector<std::pair<std::size_t, std::vector<double>>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().second.size();
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].second.size() != cols)
      throw ParseError("expected " + std::to_string(cols) + " fields, found " + std::to_string(rows[i].second.size()),
                       rows[i].first);
    std::copy(rows[i].second.begin(), rows[i].second.end(), m.row(i).begin());
  }
  return m;
}

}  // namespace

TimeSeriesPanel read_panel_csv(std::istream& in) {
  auto m = rows_to_matrix(read_rows(in));
  if (m.rows() == 0) throw ParseError("panel has no series", 1);
  return {std::move(m)};
}

TimeSeriesPanel load_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_panel_csv(in);
}

std::vector<Matrix> windowed_correlations(const TimeSeriesPanel& panel, std::size_t window) {
  if (window < 2) throw ParameterError("windowed_correlations: window must be >= 2");
  const std::size_t n = panel.series();
  const std::size_t m = panel.observations();
  if (m < window) throw ParameterError("windowed_correlations: fewer observations than one window");
  std::vector<Matrix> out;
  for (std::size_t start = 0; start + window <= m; start += window) {
    Matrix centred(n, window);
    std::vector<double> sd(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (std::size_t k = 0; k < window; ++k) mean += panel.values(i, start + k);
      mean /= static_cast<double>(window);
      double ss = 0.0;
      for (std::size_t k = 0; k < window; ++k) {
        centred(i, k) = panel.values(i, start + k) - mean;
        ss += centred(i, k) * centred(i, k);
      }
      sd[i] = std::sqrt(ss / static_cast<double>(window));
    }
    Matrix c = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double r = 0.0;
        if (sd[i] > 0.0 && sd[j] > 0.0) {
          double cov = 0.0;
          for (std::size_t k = 0; k < window; ++k) cov += centred(i, k) * centred(j, k);
          r = std::clamp(cov / static_cast<double>(window) / (sd[i] * sd[j]), -1.0, 1.0);
        }
        c(i, j) = c(j, i) = r;
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ParameterError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<Graph> quantile_truncate(std::span<const Matrix> mats, double q_low, double q_high) {
  if (mats.empty()) throw ParameterError("quantile_truncate: no matrices");
  if (!(q_low >= 0.0 && q_low < q_high && q_high <= 1.0))
    throw ParameterError("quantile_truncate: need 0 <= q_low < q_high <= 1");
  std::vector<double> pooled;
  for (const auto& m : mats) pooled.insert(pooled.end(), m.data().begin(), m.data().end());
  std::sort(pooled.begin(), pooled.end());
  const double lo = quantile_sorted(pooled, q_low);
  const double hi = quantile_sorted(pooled, q_high);
  std::vector<Graph> out;
  for (const auto& m : mats) {
    if (!m.is_square()) throw ParameterError("quantile_truncate: matrices must be square");
    Matrix a(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double v = m.data()[i];
      a.data()[i] = (v < lo || v > hi) ? 1.0 : 0.0;
    }
    out.emplace_back(std::move(a));
  }
  return out;
}

std::vector<Graph> threshold_binarize(std::span<const Matrix> mats, double eta) {
  if (!(eta >= 0.0)) throw ParameterError("threshold_binarize: eta must be >= 0");
  std::vector<Graph> out;
  for (const auto& m : mats) {
    if (!m.is_square()) throw ParameterError("threshold_binarize: matrices must be square");
    Matrix a(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) a(i, j) = (i != j && std::abs(m(i, j)) > eta) ? 1.0 : 0.0;
    out.emplace_back(std::move(a));
  }
  return out;
}

StandardizedAttributes standardize_attributes(std::span<const Matrix> attrs) {
  StandardizedAttributes out;
  if (attrs.empty()) return out;
  const std::size_t d = attrs.front().cols();
  for (const auto& a : attrs)
    if (a.cols() != d || a.rows() != attrs.front().rows())
      throw ParameterError("standardize_attributes: inconsistent attribute shapes");
  std::vector<double> mean(d, 0.0);
  std::vector<double> sd(d, 0.0);
  double count = 0.0;
  for (const auto& a : attrs) {
    count += static_cast<double>(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += a(i, j);
  }
  for (auto& m : mean) m /= count;
  for (const auto& a : attrs)
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) sd[j] += (a(i, j) - mean[j]) * (a(i, j) - mean[j]);
  for (std::size_t j = 0; j < d; ++j) {
    sd[j] = std::sqrt(sd[j] / count);
    if (!(sd[j] > 0.0)) {
      out.constant_columns.push_back(j);
      sd[j] = 1.0;
    }
  }
  for (const auto& a : attrs) {
    Matrix s = a;
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) s(i, j) = (s(i, j) - mean[j]) / sd[j];
    out.attributes.push_back(std::move(s));
  }
  return out;
}

Matrix read_attribute_csv(std::istream& in) { return rows_to_matrix(read_rows(in)); }

std::vector<Matrix> read_long_attributes_csv(std::istream& in, std::size_t T, std::size_t n) {
  const auto rows = read_rows(in);
  if (rows.empty()) throw ParseError("attribute file has no rows", 1);
  const std::size_t width = rows.front().second.size();
  if (width < 3) throw ParseError("long attribute rows need t, node and at least one attribute", rows.front().first);
  std::vector<Matrix> out(T, Matrix(n, width - 2));
  std::vector<std::vector<bool>> seen(T, std::vector<bool>(n, false));
  for (const auto& [line_no, r] : rows) {
    if (r.size() != width) throw ParseError("inconsistent field count", line_no);
    const double t = r[0];
    const double node = r[1];
    if (t < 1 || t > static_cast<double>(T) || t != std::floor(t)) throw ParseError("timestamp out of range", line_no);
    if (node < 0 || node >= static_cast<double>(n) || node != std::floor(node))
      throw ParseError("node index out of range", line_no);
    const auto ti = static_cast<std::size_t>(t) - 1;
    const auto ni = static_cast<std::size_t>(node);
    if (seen[ti][ni]) throw ParseError("duplicate (t, node) row", line_no);
    seen[ti][ni] = true;
    for (std::size_t j = 2; j < width; ++j) out[ti](ni, j - 2) = r[j];
  }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i)
      if (!seen[t][i])
        throw ParseError("missing attributes for t=" + std::to_string(t + 1) + " node " + std::to_string(i), rows.back().first);
  return out;
}

std::vector<Matrix> load_long_attributes_csv(const std::string& path, std::size_t T, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_long_attributes_csv(in, T, n);
}

void write_matrices_jsonl(std::ostream& out, std::span<const Matrix> mats) {
  for (std::size_t t = 0; t < mats.size(); ++t) {
    const auto& m = mats[t];
    nlohmann::json j{{"t", t + 1}, {"rows", m.rows()}, {"cols", m.cols()},
                     {"data", std::vector<double>(m.data().begin(), m.data().end())}};
    out << j.dump() << '\n';
  }
}

std::vector<Matrix> read_matrices_jsonl(std::istream& in) {
  std::vector<Matrix> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto rows = j.at("rows").get<std::size_t>();
      const auto cols = j.at("cols").get<std::size_t>();
      const auto data = j.at("data").get<std::vector<double>>();
      if (data.size() != rows * cols) throw ParseError("matrix data length does not match its shape", line_no);
      if (j.at("t").get<std::size_t>() != out.size() + 1) throw ParseError("matrices must be listed in time order", line_no);
      Matrix m(rows, cols);
      std::copy(data.begin(), data.end(), m.data().begin());
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad matrix record: ") + e.what(), line_no);
    }
  }
  return out;
}

void save_matrices_jsonl(const std::string& path, std::span<const Matrix> mats) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_matrices_jsonl(out, mats);
}

std::vector<Matrix> load_matrices_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_matrices_jsonl(in);
}

}  // namespace ncpd
