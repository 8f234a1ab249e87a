#include "ncpd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>

#include <nlohmann/json.hpp>

#include "ncpd/error.hpp"

namespace ncpd {

using nlohmann::json;

Graph::Graph(Matrix adjacency, std::optional<Matrix> attributes)
    : adjacency_(std::move(adjacency)), attributes_(std::move(attributes)) {
  if (!adjacency_.is_square()) throw DimensionError("graph adjacency must be square");
  if (!is_symmetric(adjacency_, 1e-12)) throw ParameterError("graph adjacency must be symmetric");
  for (double v : adjacency_.data()) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ParameterError("graph adjacency entries must be finite and nonnegative");
  }
  if (attributes_ && attributes_->rows() != adjacency_.rows())
    throw DimensionError("attribute row count must equal node count");
}

Graph Graph::from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  Matrix a(n, n);
  for (auto [i, j] : edges) {
    if (i >= n || j >= n) throw ParameterError("edge endpoint out of range");
    a(i, j) = a(j, i) = 1.0;
  }
  return Graph(std::move(a));
}

Graph Graph::empty(std::size_t n) { return Graph(Matrix(n, n)); }

std::vector<double> Graph::degrees() const {
  std::vector<double> d(size(), 0.0);
  for (std::size_t i = 0; i < size(); ++i) {
    auto r = adjacency_.row(i);
    d[i] = std::accumulate(r.begin(), r.end(), 0.0);
  }
  return d;
}

DynamicNetwork::DynamicNetwork(std::vector<Graph> snapshots, std::vector<std::size_t> change_points,
                               std::vector<std::int64_t> labels)
    : snapshots_(std::move(snapshots)),
      change_points_(std::move(change_points)),
      labels_(std::move(labels)) {
  const std::size_t n = nodes();
  for (const auto& g : snapshots_)
    if (g.size() != n) throw DimensionError("all snapshots must share the node count");
  for (std::size_t i = 0; i < change_points_.size(); ++i) {
    const auto cp = change_points_[i];
    if (cp <= 1 || cp > snapshots_.size())
      throw ParameterError("change-point " + std::to_string(cp) + " outside (1, T]");
    if (i > 0 && cp <= change_points_[i - 1])
      throw ParameterError("change-points must be strictly increasing");
  }
  if (!labels_.empty() && labels_.size() != snapshots_.size())
    throw DimensionError("snapshot label count must equal T");
}

const Graph& DynamicNetwork::at(std::size_t t) const {
  if (t == 0 || t > snapshots_.size()) throw ParameterError("timestamp " + std::to_string(t) + " out of range");
  return snapshots_[t - 1];
}

DynamicNetwork DynamicNetwork::slice(std::size_t first, std::size_t last) const {
  if (first == 0 || last < first || last > length()) throw ParameterError("invalid slice range");
  std::vector<Graph> snaps(snapshots_.begin() + static_cast<std::ptrdiff_t>(first - 1),
                           snapshots_.begin() + static_cast<std::ptrdiff_t>(last));
  std::vector<std::size_t> cps;
  for (auto cp : change_points_)
    if (cp > first && cp <= last) cps.push_back(cp - first + 1);
  std::vector<std::int64_t> labels;
  if (!labels_.empty())
    labels.assign(labels_.begin() + static_cast<std::ptrdiff_t>(first - 1),
                  labels_.begin() + static_cast<std::ptrdiff_t>(last));
  return DynamicNetwork(std::move(snaps), std::move(cps), std::move(labels));
}

std::size_t EncodingKind::width(std::size_t n) const {
  switch (type) {
    case Type::Degree: return 1;
    case Type::RandomWalk:
    case Type::Laplacian: return k;
    case Type::Identity: return n;
  }
  return 0;
}

std::string EncodingKind::to_string() const {
  switch (type) {
    case Type::Degree: return "degree";
    case Type::RandomWalk: return "random-walk:" + std::to_string(k);
    case Type::Laplacian: return "laplacian:" + std::to_string(k);
    case Type::Identity: return "identity";
  }
  return "?";
}

EncodingKind EncodingKind::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::size_t k = 3;
  if (colon != std::string::npos) {
    try {
      k = std::stoul(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad encoding parameter in '" + text + "'");
    }
    if (k == 0) throw ConfigError("encoding parameter must be >= 1");
  }
  if (name == "degree") return degree();
  if (name == "identity") return identity();
  if (name == "random-walk" || name == "rw") return random_walk(k);
  if (name == "laplacian" || name == "lap") return laplacian(k);
  throw ConfigError("unknown encoding '" + text + "'");
}

Matrix normalized_augmented_adjacency(const Graph& g) {
  const std::size_t n = g.size();
  Matrix a = g.adjacency();
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = a.row(i);
    inv_sqrt[i] = 1.0 / std::sqrt(std::accumulate(r.begin(), r.end(), 0.0));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return a;
}

bool is_connected(const Graph& g) {
  const std::size_t n = g.size();
  if (n == 0) return true;
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t visited = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (std::size_t v = 0; v < n; ++v) {
      if (!seen[v] && g.adjacency()(u, v) > 0.0) {
        seen[v] = true;
        ++visited;
        frontier.push(v);
      }
    }
  }
  return visited == n;
}

namespace {

// Degrees with zeros replaced by one, so isolated nodes keep a null row.
std::vector<double> safe_degrees(const Graph& g) {
  auto d = g.degrees();
  for (auto& v : d)
    if (v <= 0.0) v = 1.0;
  return d;
}

Matrix random_walk_encoding(const Graph& g, std::size_t k) {
  const std::size_t n = g.size();
  const auto d = safe_degrees(g);
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r(i, j) = g.adjacency()(i, j) / d[j];
  Matrix out(n, k);
  Matrix power = r;
  for (std::size_t step = 0; step < k; ++step) {
    for (std::size_t i = 0; i < n; ++i) out(i, step) = power(i, i);
    if (step + 1 < k) power = matmul(power, r);
  }
  return out;
}

Matrix laplacian_encoding(const Graph& g, std::size_t k) {
  const std::size_t n = g.size();
  const auto d = safe_degrees(g);
  Matrix lap(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      lap(i, j) = (i == j ? 1.0 : 0.0) - g.adjacency()(i, j) / std::sqrt(d[i] * d[j]);
  const auto eig = sym_eig(lap);
  // Eigenvalues come back descending; walk from the bottom of the spectrum.
  const std::size_t skip = (n > 1 && is_connected(g)) ? 1 : 0;
  Matrix out(n, k);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t rank = c + skip;
    if (rank >= n) break;
    const std::size_t col = n - 1 - rank;
    for (std::size_t i = 0; i < n; ++i) out(i, c) = eig.eigenvectors(i, col);
  }
  return out;
}

}  // namespace

Matrix positional_encoding(const Graph& g, EncodingKind kind) {
  const std::size_t n = g.size();
  switch (kind.type) {
    case EncodingKind::Type::Degree: return Matrix::column(g.degrees());
    case EncodingKind::Type::RandomWalk:
      if (kind.k == 0) throw ParameterError("random-walk encoding needs k >= 1");
      return random_walk_encoding(g, kind.k);
    case EncodingKind::Type::Laplacian:
      if (kind.k == 0) throw ParameterError("laplacian encoding needs k >= 1");
      return laplacian_encoding(g, kind.k);
    case EncodingKind::Type::Identity: return Matrix::identity(n);
  }
  throw ParameterError("unknown encoding kind");
}

Graph permute(const Graph& g, std::span<const std::size_t> sigma) {
  const std::size_t n = g.size();
  if (sigma.size() != n) throw ParameterError("permutation length must equal node count");
  std::vector<bool> hit(n, false);
  for (auto s : sigma) {
    if (s >= n || hit[s]) throw ParameterError("mapping is not a bijection on the node set");
    hit[s] = true;
  }
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(sigma[i], sigma[j]) = g.adjacency()(i, j);
  std::optional<Matrix> attrs;
  if (g.attributes()) {
    const auto& e = *g.attributes();
    Matrix p(n, e.cols());
    for (std::size_t i = 0; i < n; ++i) std::copy(e.row(i).begin(), e.row(i).end(), p.row(sigma[i]).begin());
    attrs = std::move(p);
  }
  return Graph(std::move(a), std::move(attrs));
}

SparseRows SparseRows::from_dense(const Matrix& m) {
  SparseRows s;
  s.n = m.rows();
  s.offsets.reserve(m.rows() + 1);
  s.offsets.push_back(0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) {
        s.columns.push_back(j);
        s.values.push_back(m(i, j));
      }
    }
    s.offsets.push_back(s.columns.size());
  }
  return s;
}

Matrix SparseRows::multiply(const Matrix& x) const {
  if (x.rows() != n) throw DimensionError("sparse multiply: row count mismatch");
  Matrix out(n, x.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.row(i);
    for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) {
      const double w = values[p];
      auto src = x.row(columns[p]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON lines I/O

void write_network(std::ostream& out, const DynamicNetwork& net, const FileMeta& meta) {
  json header;
  header["n"] = net.nodes();
  header["T"] = net.length();
  if (!net.change_points().empty()) header["change_points"] = net.change_points();
  if (!net.labels().empty()) header["labels"] = net.labels();
  if (meta.seed || meta.config_hash) {
    json m = json::object();
    if (meta.seed) m["seed"] = *meta.seed;
    if (meta.config_hash) m["config_hash"] = *meta.config_hash;
    header["meta"] = m;
  }
  out << header.dump() << '\n';
  for (std::size_t t = 1; t <= net.length(); ++t) {
    const auto& g = net.at(t);
    json line;
    line["t"] = t;
    json edges = json::array();
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = i; j < g.size(); ++j) {
        const double w = g.adjacency()(i, j);
        if (w == 0.0) continue;
        if (w == 1.0)
          edges.push_back({i, j});
        else
          edges.push_back({json(i), json(j), json(w)});
      }
    }
    line["edges"] = std::move(edges);
    if (g.attributes()) {
      json attrs = json::array();
      const auto& e = *g.attributes();
      for (std::size_t i = 0; i < e.rows(); ++i) attrs.push_back(std::vector<double>(e.row(i).begin(), e.row(i).end()));
      line["attrs"] = std::move(attrs);
    }
    out << line.dump() << '\n';
  }
}

DynamicNetwork read_network(std::istream& in, FileMeta* meta) {
  std::string text;
  std::size_t line_no = 0;
  auto next_line = [&](std::string& s) {
    while (std::getline(in, s)) {
      ++line_no;
      if (!s.empty() && s.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line(text)) throw ParseError("missing network header", 1);
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), line_no);
  }
  std::size_t n = 0;
  std::size_t T = 0;
  std::vector<std::size_t> cps;
  std::vector<std::int64_t> labels;
  try {
    n = header.at("n").get<std::size_t>();
    T = header.at("T").get<std::size_t>();
    if (header.contains("change_points")) cps = header["change_points"].get<std::vector<std::size_t>>();
    if (header.contains("labels")) labels = header["labels"].get<std::vector<std::int64_t>>();
    if (meta && header.contains("meta")) {
      const auto& m = header["meta"];
      if (m.contains("seed")) meta->seed = m["seed"].get<std::uint64_t>();
      if (m.contains("config_hash")) meta->config_hash = m["config_hash"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad header field: ") + e.what(), line_no);
  }

  std::vector<Graph> snaps;
  snaps.reserve(T);
  for (std::size_t t = 1; t <= T; ++t) {
    if (!next_line(text)) throw ParseError("expected snapshot " + std::to_string(t), line_no + 1);
    try {
      const json line = json::parse(text);
      if (line.at("t").get<std::size_t>() != t)
        throw ParseError("snapshot out of order, expected t=" + std::to_string(t), line_no);
      Matrix a(n, n);
      for (const auto& e : line.at("edges")) {
        const auto i = e.at(0).get<std::size_t>();
        const auto j = e.at(1).get<std::size_t>();
        if (i >= n || j >= n || i > j) throw ParseError("bad edge endpoints", line_no);
        const double w = e.size() > 2 ? e.at(2).get<double>() : 1.0;
        a(i, j) = a(j, i) = w;
      }
      std::optional<Matrix> attrs;
      if (line.contains("attrs")) {
        const auto& rows = line["attrs"];
        if (rows.size() != n) throw ParseError("attribute rows must equal n", line_no);
        const std::size_t d = n == 0 ? 0 : rows.at(0).size();
        Matrix e(n, d);
        for (std::size_t i = 0; i < n; ++i) {
          if (rows[i].size() != d) throw ParseError("ragged attribute rows", line_no);
          for (std::size_t c = 0; c < d; ++c) e(i, c) = rows[i][c].get<double>();
        }
        attrs = std::move(e);
      }
      snaps.emplace_back(std::move(a), std::move(attrs));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad snapshot: ") + e.what(), line_no);
    }
  }
  try {
    return DynamicNetwork(std::move(snaps), std::move(cps), std::move(labels));
  } catch (const Error& e) {
    throw ParseError(e.what(), 1);
  }
}

void save_network(const std::string& path, const DynamicNetwork& net, const FileMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_network(out, net, meta);
  if (!out) throw IoError("write failed for '" + path + "'");
}

DynamicNetwork load_network(const std::string& path, FileMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_network(in, meta);
}

}  // namespace ncpd
