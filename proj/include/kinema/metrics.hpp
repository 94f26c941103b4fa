#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "kinema/error.hpp"
#include "kinema/image.hpp"

namespace kinema {

using PointCloud = std::vector<Eigen::Vector3d>;

/// Points of the valid pixels of a pointmap frame, row-major order.
template <typename Scalar>
PointCloud to_point_cloud(const PointMap<Scalar>& frame) {
  PointCloud cloud;
  for (std::size_t i = 0; i < frame.coords.size(); ++i) {
    if (frame.valid[i]) cloud.push_back(frame.coords[i].template cast<double>());
  }
  return cloud;
}

/// Uniform hash grid over a fixed point set. Queries return exactly what a
/// linear scan would: the grid only prunes cells that cannot hold a closer point.
class PointGrid {
 public:
  PointGrid(const PointCloud& points, double cell) : points_(points), cell_(cell) {
    if (!(cell > 0.0) || !std::isfinite(cell)) throw Error(Errc::InvalidArgument, "grid cell size must be positive");
    lo_.fill(std::numeric_limits<std::int64_t>::max());
    hi_.fill(std::numeric_limits<std::int64_t>::min());
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      const auto key = cell_of(points[i]);
      for (int d = 0; d < 3; ++d) {
        lo_[d] = std::min(lo_[d], key[d]);
        hi_[d] = std::max(hi_[d], key[d]);
      }
      cells_[key].push_back(i);
    }
  }

  /// Cell size suited to nearest-neighbour queries: about one point per cell.
  static double adaptive_cell(const PointCloud& points) {
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double extent = points.empty() ? 0.0 : (hi - lo).maxCoeff();
    if (!(extent > 0.0) || !std::isfinite(extent)) return 1.0;
    return extent / std::cbrt(static_cast<double>(points.size()));
  }

  /// Squared distance from q to its nearest indexed point (+inf when empty).
  double nearest_sq(const Eigen::Vector3d& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (points_.empty()) return best;
    const auto c = cell_of(q);
    std::int64_t r_start = 0;
    std::int64_t r_end = 0;
    for (int d = 0; d < 3; ++d) {
      r_start = std::max({r_start, lo_[d] - c[d], c[d] - hi_[d]});
      r_end = std::max({r_end, hi_[d] - c[d], c[d] - lo_[d]});
    }
    // Sparse grids over large empty regions would visit many empty cells;
    // past a budget of a linear scan's cost, do the scan instead.
    const double budget = 4.0 * static_cast<double>(points_.size()) + 64.0;
    double work = 0.0;
    for (std::int64_t r = r_start; r <= r_end; ++r) {
      work += shell_cost(c, r);
      if (work > budget) {
        for (const auto& p : points_) best = std::min(best, (p - q).squaredNorm());
        return best;
      }
      visit_shell(c, r, [&](const std::vector<std::uint32_t>& bucket) {
        for (auto i : bucket) best = std::min(best, (points_[i] - q).squaredNorm());
      });
      // points outside the processed shells are at least r cells away
      const double bound = static_cast<double>(r) * cell_;
      if (best <= bound * bound) break;
    }
    return best;
  }

  /// True when some indexed point lies strictly closer than `radius`;
  /// requires radius <= cell size.
  bool any_within(const Eigen::Vector3d& q, double radius) const {
    const auto c = cell_of(q);
    bool found = false;
    visit_shell(c, 0, [&](const auto& bucket) { found = found || hit(bucket, q, radius); });
    if (!found) visit_shell(c, 1, [&](const auto& bucket) { found = found || hit(bucket, q, radius); });
    return found;
  }

 private:
  using Key = std::array<std::int64_t, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = 1469598103934665603ULL;
      for (auto v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ULL;
      return static_cast<std::size_t>(h);
    }
  };

  Key cell_of(const Eigen::Vector3d& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  bool hit(const std::vector<std::uint32_t>& bucket, const Eigen::Vector3d& q, double radius) const {
    return std::any_of(bucket.begin(), bucket.end(), [&](auto i) { return (points_[i] - q).norm() < radius; });
  }

  // Upper bound on the cell lookups visit_shell(c, r) performs.
  double shell_cost(const Key& c, std::int64_t r) const {
    double cost = 1.0;
    for (int d = 0; d < 3; ++d) {
      const std::int64_t a = std::max(c[d] - r, lo_[d]), b = std::min(c[d] + r, hi_[d]);
      cost *= static_cast<double>(std::max<std::int64_t>(b - a + 1, 0));
    }
    return cost;
  }

  // Calls f(bucket) for every occupied cell at Chebyshev distance exactly r.
  template <typename F>
  void visit_shell(const Key& c, std::int64_t r, F&& f) const {
    const std::int64_t x0 = std::max(c[0] - r, lo_[0]), x1 = std::min(c[0] + r, hi_[0]);
    const std::int64_t y0 = std::max(c[1] - r, lo_[1]), y1 = std::min(c[1] + r, hi_[1]);
    for (std::int64_t x = x0; x <= x1; ++x) {
      for (std::int64_t y = y0; y <= y1; ++y) {
        const bool on_face = std::abs(x - c[0]) == r || std::abs(y - c[1]) == r;
        auto visit = [&](std::int64_t z) {
          if (z < lo_[2] || z > hi_[2]) return;
          if (auto it = cells_.find({x, y, z}); it != cells_.end()) f(it->second);
        };
        if (on_face) {
          for (std::int64_t z = std::max(c[2] - r, lo_[2]); z <= std::min(c[2] + r, hi_[2]); ++z) visit(z);
        } else {
          visit(c[2] - r);
          if (r != 0) visit(c[2] + r);
        }
      }
    }
  }

  const PointCloud& points_;
  double cell_;
  Key lo_{};
  Key hi_{};
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> cells_;
};

enum class ChamferOrder { L1, L2 };

inline constexpr const char* kChamferConvention =
    "0.5 * (mean_a min_b d + mean_b min_a d); d = Euclidean distance (L1) or squared distance (L2)";

namespace detail {

inline double mean_nearest(const PointCloud& from, const PointCloud& to, ChamferOrder order) {
  const PointGrid grid(to, PointGrid::adaptive_cell(to));
  double sum = 0.0;
  for (const auto& p : from) {
    const double sq = grid.nearest_sq(p);
    sum += order == ChamferOrder::L1 ? std::sqrt(sq) : sq;
  }
  return sum / static_cast<double>(from.size());
}

inline void require_nonempty(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptyCloud, "metric needs two nonempty point clouds");
}

}  // namespace detail

/// Symmetric Chamfer distance, halved sum of the two directed means.
inline double chamfer(const PointCloud& a, const PointCloud& b, ChamferOrder order) {
  detail::require_nonempty(a, b);
  return 0.5 * (detail::mean_nearest(a, b, order) + detail::mean_nearest(b, a, order));
}

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Precision: share of a closer than tau to b. Recall: share of b closer than tau to a.
inline FScore fscore(const PointCloud& a, const PointCloud& b, double tau = 0.01) {
  detail::require_nonempty(a, b);
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "F-score threshold must be positive");
  auto share = [tau](const PointCloud& from, const PointCloud& to) {
    const PointGrid grid(to, tau);
    std::size_t hits = 0;
    for (const auto& p : from) hits += grid.any_within(p, tau);
    return static_cast<double>(hits) / static_cast<double>(from.size());
  };
  FScore s;
  s.precision = share(a, b);
  s.recall = share(b, a);
  s.f = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

enum class CloudMetric { ChamferL1, ChamferL2, FScore };

inline double cloud_metric(const PointCloud& a, const PointCloud& b, CloudMetric metric, double tau = 0.01) {
  switch (metric) {
    case CloudMetric::ChamferL1: return chamfer(a, b, ChamferOrder::L1);
    case CloudMetric::ChamferL2: return chamfer(a, b, ChamferOrder::L2);
    case CloudMetric::FScore: return fscore(a, b, tau).f;
  }
  return 0.0;
}

template <typename Scalar>
std::vector<PointCloud> frame_clouds(const BasicPointMapSequence<Scalar>& seq) {
  std::vector<PointCloud> clouds;
  clouds.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    clouds.push_back(to_point_cloud(seq[t]));
    if (clouds.back().empty()) throw Error(Errc::EmptyFrame, "frame " + std::to_string(t) + " has no valid pixels");
  }
  return clouds;
}

/// Self-temporal consistency: metric between consecutive frames, averaged
/// over the T-1 pairs. `per_pair` receives the individual values if given.
template <typename Scalar>
double temporal_metric(const BasicPointMapSequence<Scalar>& seq, CloudMetric metric, double tau = 0.01,
                       std::vector<double>* per_pair = nullptr) {
  if (seq.size() < 2) throw Error(Errc::TooFewFrames, "temporal metrics need at least 2 frames");
  const auto clouds = frame_clouds(seq);
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < clouds.size(); ++t) {
    const double v = cloud_metric(clouds[t], clouds[t + 1], metric, tau);
    if (per_pair) per_pair->push_back(v);
    sum += v;
  }
  return sum / static_cast<double>(clouds.size() - 1);
}

/// Prediction vs reference, frame by frame, averaged over frames.
template <typename Scalar>
double sequence_metric(const BasicPointMapSequence<Scalar>& pred, const BasicPointMapSequence<Scalar>& ref,
                       CloudMetric metric, double tau = 0.01, std::vector<double>* per_frame = nullptr) {
  if (pred.size() != ref.size()) throw Error(Errc::LengthMismatch, "prediction and reference lengths differ");
  if (pred.empty()) throw Error(Errc::EmptySequence, "no frames to evaluate");
  const auto a = frame_clouds(pred);
  const auto b = frame_clouds(ref);
  double sum = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double v = cloud_metric(a[t], b[t], metric, tau);
    if (per_frame) per_frame->push_back(v);
    sum += v;
  }
  return sum / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Image metrics; float RGB in [0, 1], peak value 1.

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline void check_same_shape(const RgbFrame& a, const RgbFrame& b) {
  if (!a.same_shape(b.rows(), b.cols())) throw Error(Errc::ShapeMismatch, "image sizes differ");
}

inline double squared_error_sum(const RgbFrame& a, const RgbFrame& b) {
  check_same_shape(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i].cast<double>() - b[i].cast<double>()).squaredNorm();
  return sum;
}

inline double psnr_from_mse(double mse) { return mse == 0.0 ? kInfinity : 10.0 * std::log10(1.0 / mse); }

/// 10 log10(1 / MSE) over all pixels and channels; +inf when identical.
inline double psnr(const RgbFrame& a, const RgbFrame& b) {
  return psnr_from_mse(squared_error_sum(a, b) / (3.0 * static_cast<double>(a.size())));
}

inline double psnr(const RgbSequence& a, const RgbSequence& b) {
  if (a.size() != b.size()) throw Error(Errc::ShapeMismatch, "sequence lengths differ");
  if (a.empty()) throw Error(Errc::EmptySequence, "no frames");
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    sum += squared_error_sum(a[t], b[t]);
    count += 3.0 * static_cast<double>(a[t].size());
  }
  return psnr_from_mse(sum / count);
}

namespace detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

inline std::array<double, kSsimWindow> gaussian_kernel() {
  std::array<double, kSsimWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    k[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable Gaussian filter, "valid" region only: (H-10) x (W-10).
inline Grid<double> filter_valid(const Grid<double>& in) {
  static const auto k = gaussian_kernel();
  const int H = in.rows(), W = in.cols();
  const int oh = H - kSsimWindow + 1, ow = W - kSsimWindow + 1;
  Grid<double> rows(H, ow);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * in(r, c + i);
      rows(r, c) = s;
    }
  }
  Grid<double> out(oh, ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * rows(r + i, c);
      out(r, c) = s;
    }
  }
  return out;
}

inline double ssim_channel(const Grid<double>& x, const Grid<double>& y) {
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  Grid<double> xx(x.rows(), x.cols()), yy(x.rows(), x.cols()), xy(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x), my = filter_valid(y);
  const auto sxx = filter_valid(xx), syy = filter_valid(yy), sxy = filter_valid(xy);
  double sum = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return sum / static_cast<double>(mx.size());
}

}  // namespace detail

/// Mean SSIM, 11x11 Gaussian window (sigma 1.5), valid region, averaged over channels.
inline double ssim(const RgbFrame& a, const RgbFrame& b) {
  check_same_shape(a, b);
  if (std::min(a.rows(), a.cols()) < detail::kSsimWindow) {
    throw Error(Errc::FrameTooSmall, "SSIM needs frames of at least 11x11");
  }
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    Grid<double> x(a.rows(), a.cols()), y(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
      x[i] = a[i][ch];
      y[i] = b[i][ch];
    }
    total += detail::ssim_channel(x, y);
  }
  return total / 3.0;
}

inline double ssim(const RgbSequence& a, const RgbSequence& b) {
  if (a.size() != b.size()) throw Error(Errc::ShapeMismatch, "sequence lengths differ");
  if (a.empty()) throw Error(Errc::EmptySequence, "no frames");
  double sum = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) sum += ssim(a[t], b[t]);
  return sum / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Policy evaluation

struct SuccessRateDiff {
  double rate_sim = 0.0;
  double rate_real = 0.0;
  double diff = 0.0;
};

inline SuccessRateDiff success_rate_diff(const std::vector<bool>& sim, const std::vector<bool>& real) {
  if (sim.empty() || real.empty()) throw Error(Errc::EmptyInput, "success flags must be nonempty");
  const auto ns = static_cast<std::int64_t>(sim.size());
  const auto nr = static_cast<std::int64_t>(real.size());
  const auto ss = static_cast<std::int64_t>(std::count(sim.begin(), sim.end(), true));
  const auto sr = static_cast<std::int64_t>(std::count(real.begin(), real.end(), true));
  // one rounding from the exact rational difference
  const auto num = ss * nr - sr * ns;
  return {static_cast<double>(ss) / static_cast<double>(ns), static_cast<double>(sr) / static_cast<double>(nr),
          static_cast<double>(num < 0 ? -num : num) / static_cast<double>(ns * nr)};
}

// ---------------------------------------------------------------------------
// Report

enum class Units { Metric, Normalized };

struct MetricReport {
  Units units = Units::Metric;
  double fscore_tau = 0.01;
  std::vector<std::pair<std::string, double>> scalars;
  std::map<std::string, std::vector<double>> per_frame;

  void set(const std::string& key, double value) {
    for (auto& [k, v] : scalars) {
      if (k == key) {
        v = value;
        return;
      }
    }
    scalars.emplace_back(key, value);
  }

  std::optional<double> get(const std::string& key) const {
    for (const auto& [k, v] : scalars) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  /// Non-finite values are written as the strings "inf" / "-inf" / "nan".
  nlohmann::json to_json() const {
    auto encode = [](double v) -> nlohmann::json {
      if (std::isnan(v)) return "nan";
      if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
      return v;
    };
    nlohmann::json j;
    j["units"] = units == Units::Metric ? "metric" : "normalized";
    j["fscore_tau"] = fscore_tau;
    j["chamfer_convention"] = kChamferConvention;
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [k, v] : scalars) s[k] = encode(v);
    j["metrics"] = std::move(s);
    nlohmann::json pf = nlohmann::json::object();
    for (const auto& [k, values] : per_frame) {
      nlohmann::json arr = nlohmann::json::array();
      for (double v : values) arr.push_back(encode(v));
      pf[k] = std::move(arr);
    }
    j["per_frame"] = std::move(pf);
    return j;
  }

  /// Geometry block in the usual column order, then any image/policy metrics.
  std::string table() const {
    static const std::vector<std::pair<std::string, std::string>> geometry = {
        {"cd_l1", "CD-L1"}, {"cd_l1_temp", "CD-L1 (temp)"}, {"cd_l2", "CD-L2"},
        {"cd_l2_temp", "CD-L2 (temp)"}, {"fscore", "F-Score"}, {"fscore_temp", "F-Score (temp)"}};
    auto cell = [](std::optional<double> v) {
      if (!v) return std::string("-");
      if (std::isinf(*v)) return std::string(*v > 0 ? "inf" : "-inf");
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", *v);
      return std::string(buf);
    };
    std::string header, values;
    auto add = [&](const std::string& title, const std::string& value) {
      const std::size_t w = std::max(title.size(), value.size()) + 2;
      header += title + std::string(w - title.size(), ' ');
      values += value + std::string(w - value.size(), ' ');
    };
    for (const auto& [key, title] : geometry) add(title, cell(get(key)));
    std::string out = header + "\n" + values + "\n";
    header.clear();
    values.clear();
    for (const auto& [key, value] : scalars) {
      const bool is_geometry = std::any_of(geometry.begin(), geometry.end(), [&](const auto& g) { return g.first == key; });
      if (!is_geometry) add(key, cell(value));
    }
    if (!header.empty()) out += header + "\n" + values + "\n";
    out += std::string("units: ") + (units == Units::Metric ? "metric" : "normalized") +
           ", F-Score tau: " + cell(fscore_tau) + "\n";
    return out;
  }
};

}  // namespace kinema
