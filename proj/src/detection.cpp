#include "ncpd/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ncpd/error.hpp"
#include "ncpd/evaluation.hpp"

namespace ncpd {

double Series::at(std::size_t t) const {
  if (t < first || t > last() || values.empty())
    throw ParameterError("statistic has no value at t=" + std::to_string(t));
  return values[t - first];
}

std::string to_string(Orientation o) {
  return o == Orientation::SimilarityFalls ? "similarity" : "distance";
}

namespace {

Series negated(const Series& z) {
  Series out = z;
  for (auto& v : out.values) v = -v;
  return out;
}

PairScore on_network(const GraphScore& score, const DynamicNetwork& net) {
  return [&score, &net](std::size_t a, std::size_t b) { return score(net.at(a), net.at(b)); };
}

}  // namespace

Series similarity_statistic(const PairScore& score, std::size_t T, std::size_t L) {
  if (L == 0) throw ParameterError("similarity_statistic: L must be >= 1");
  if (L >= T) throw ParameterError("similarity_statistic: L=" + std::to_string(L) + " must be < T=" + std::to_string(T));
  Series z;
  z.first = L + 1;
  z.values.reserve(T - L);
  for (std::size_t t = L + 1; t <= T; ++t) {
    double s = 0.0;
    for (std::size_t i = 1; i <= L; ++i) s += score(t, t - i);
    z.values.push_back(s / static_cast<double>(L));
  }
  return z;
}

Series similarity_statistic(const GraphScore& score, const DynamicNetwork& net, std::size_t L) {
  return similarity_statistic(on_network(score, net), net.length(), L);
}

std::vector<std::size_t> detect_online(const Series& z, std::size_t L, double theta, Orientation orientation) {
  if (L == 0) throw ParameterError("detect_online: L must be >= 1");
  if (orientation == Orientation::DistanceRises) return detect_online(negated(z), L, -theta);
  std::vector<std::size_t> out;
  // Length of the run of consecutive values above theta ending just before i.
  std::size_t run = 0;
  for (std::size_t i = 0; i < z.values.size(); ++i) {
    const std::size_t available = std::min(i, L);
    if (z.values[i] <= theta && available > 0 && run >= available) out.push_back(z.first + i);
    run = z.values[i] > theta ? run + 1 : 0;
  }
  return out;
}

std::size_t localize_single_offline(const Series& z, Localisation mode, Orientation orientation) {
  if (z.empty()) throw ParameterError("localize_single_offline: empty statistic");
  if (mode == Localisation::MaxIncrement) {
    if (z.size() < 2) throw ParameterError("localize_single_offline: MaxIncrement needs two values");
    std::size_t best = 1;
    double best_gap = -1.0;
    for (std::size_t i = 1; i < z.size(); ++i) {
      const double gap = std::abs(z.values[i] - z.values[i - 1]);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    return z.first + best;
  }
  const double sign = orientation == Orientation::SimilarityFalls ? 1.0 : -1.0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (sign * z.values[i] < sign * z.values[best]) best = i;
  return z.first + best;
}

Series increments(const Series& z) {
  Series out;
  out.first = z.first + 1;
  for (std::size_t i = 1; i < z.size(); ++i) out.values.push_back(std::abs(z.values[i] - z.values[i - 1]));
  return out;
}

Series mmd_statistic(const PairScore& score, std::size_t T, std::size_t L) {
  if (L == 0) throw ParameterError("mmd_statistic: L must be >= 1");
  if (T < 2 * L + 2) throw ParameterError("mmd_statistic: windows of L=" + std::to_string(L) + " overrun T=" + std::to_string(T));
  Series z;
  z.first = L + 2;
  const double norm = 1.0 / static_cast<double>(L * (L + 1));
  for (std::size_t t = L + 2; t <= T - L; ++t) {
    double s = 0.0;
    for (std::size_t i = 1; i <= L + 1; ++i)
      for (std::size_t j = 1; j <= L + 1; ++j)
        s += score(t - i, t - j) + score(t - 1 + i, t - 1 + j) - score(t - i, t - 1 + j);
    z.values.push_back(std::sqrt(std::max(0.0, norm * s)));
  }
  return z;
}

Series mmd_statistic(const GraphScore& score, const DynamicNetwork& net, std::size_t L) {
  return mmd_statistic(on_network(score, net), net.length(), L);
}

Calibration calibrate_threshold(std::span<const Series> zs, std::span<const std::vector<std::size_t>> true_cps,
                                std::size_t L, Orientation orientation, std::size_t tol) {
  if (zs.empty() || zs.size() != true_cps.size())
    throw ParameterError("calibrate_threshold: need one change-point list per statistic");
  // Work on similarity-oriented series; the smallest threshold there is the
  // one that declares least.
  std::vector<Series> s;
  std::vector<double> sorted;
  for (const auto& z : zs) {
    if (z.empty()) throw ParameterError("calibrate_threshold: empty statistic");
    s.push_back(orientation == Orientation::SimilarityFalls ? z : negated(z));
    sorted.insert(sorted.end(), s.back().values.begin(), s.back().values.end());
  }
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  Calibration out;
  if (sorted.size() == 1) {
    out.candidates = sorted;
    out.warning = "constant statistic: no midpoint thresholds, using its single value";
  } else {
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) out.candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  }

  std::size_t labelled = 0;
  for (const auto& c : true_cps) labelled += c.empty() ? 0 : 1;
  double best = -std::numeric_limits<double>::infinity();
  double best_theta = out.candidates.front();
  for (double theta : out.candidates) {
    double objective = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const auto declared = detect_online(s[k], L, theta);
      if (labelled == 0) {
        objective -= static_cast<double>(declared.size());
      } else if (!true_cps[k].empty()) {
        std::size_t T = s[k].last();
        for (auto c : true_cps[k]) T = std::max(T, c);
        objective += adjusted_f1(declared, true_cps[k], T, tol).f1 / static_cast<double>(labelled);
      }
    }
    if (objective > best) {
      best = objective;
      best_theta = theta;
    }
  }
  out.theta = orientation == Orientation::SimilarityFalls ? best_theta : -best_theta;
  if (labelled > 0) {
    out.f1 = best;
    if (best == 0.0 && out.warning.empty()) out.warning = "no threshold detects any labelled change-point";
  }
  return out;
}

Calibration calibrate_threshold(const Series& z, std::span<const std::size_t> true_cps, std::size_t L,
                                Orientation orientation, std::size_t tol) {
  const std::vector<std::vector<std::size_t>> cps{std::vector<std::size_t>(true_cps.begin(), true_cps.end())};
  return calibrate_threshold(std::span<const Series>(&z, 1), cps, L, orientation, tol);
}

DetectionTrace make_trace(Series z, std::size_t L, double theta, Orientation orientation) {
  DetectionTrace t;
  t.declared = detect_online(z, L, theta, orientation);
  t.statistic = std::move(z);
  t.window = L;
  t.threshold = theta;
  t.orientation = orientation;
  return t;
}

void write_trace_csv(std::ostream& out, const DetectionTrace& trace, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "t,Z_t,declared\n";
  out << std::setprecision(17);
  std::size_t next = 0;
  for (std::size_t i = 0; i < trace.statistic.size(); ++i) {
    const std::size_t t = trace.statistic.first + i;
    while (next < trace.declared.size() && trace.declared[next] < t) ++next;
    const bool flag = next < trace.declared.size() && trace.declared[next] == t;
    out << t << ',' << trace.statistic.values[i] << ',' << (flag ? 1 : 0) << '\n';
  }
}

void save_trace_csv(const std::string& path, const DetectionTrace& trace, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_trace_csv(out, trace, comment);
}

Series read_trace_csv(std::istream& in) {
  Series z;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0) continue;
    std::istringstream row(line);
    std::size_t t = 0;
    double v = 0.0;
    char comma = 0;
    if (!(row >> t >> comma >> v) || comma != ',') throw ParseError("malformed trace row '" + line + "'", line_no);
    if (first) {
      z.first = t;
      first = false;
    } else if (t != z.last() + 1) {
      throw ParseError("trace timestamps must be consecutive", line_no);
    }
    z.values.push_back(v);
  }
  return z;
}

}  // namespace ncpd
