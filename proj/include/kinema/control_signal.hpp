#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinema/error.hpp"
#include "kinema/image.hpp"
#include "kinema/netpbm.hpp"
#include "kinema/parallel.hpp"
#include "kinema/random.hpp"

namespace kinema {

// ---------------------------------------------------------------------------
// Soft occupancy mask

struct SoftMaskParams {
  double ratio = 0.1;
  float value = 0.5f;
};

/// Number of pixels flagged by a ratio; round-half-away-from-zero.
inline std::size_t soft_pixel_count(double ratio, std::size_t occupied) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(occupied)));
}

/// Per frame, exactly round(ratio * occupied) occupied pixels, chosen uniformly
/// from a stream seeded by (seed, frame index), take `value`; the other occupied
/// pixels take 1 and the background 0.
inline std::vector<MaskFrame> soft_mask(const std::vector<OccupancyGrid>& occupancy, const SoftMaskParams& params,
                                        std::uint64_t seed, unsigned jobs = 1) {
  if (!(params.ratio >= 0.0 && params.ratio <= 1.0)) {
    throw Error(Errc::InvalidArgument, "soft ratio must lie in [0, 1]");
  }
  std::vector<MaskFrame> out(occupancy.size());
  parallel_for(occupancy.size(), jobs, [&](std::size_t t) {
    const auto& occ = occupancy[t];
    MaskFrame mask(occ.rows(), occ.cols(), 0.0f);
    std::vector<std::size_t> occupied;
    for (std::size_t i = 0; i < occ.size(); ++i) {
      if (occ[i]) {
        mask[i] = 1.0f;
        occupied.push_back(i);
      }
    }
    const std::size_t k = soft_pixel_count(params.ratio, occupied.size());
    if (k > 0) {
      Rng rng = make_rng(seed, t);
      std::vector<std::size_t> chosen;
      chosen.reserve(k);
      std::sample(occupied.begin(), occupied.end(), std::back_inserter(chosen), k, rng);
      for (auto i : chosen) mask[i] = params.value;
    }
    out[t] = std::move(mask);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Sequence-level min-max normalization

template <typename Scalar>
struct NormalizedPointMaps {
  BasicPointMapSequence<Scalar> frames;
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;  // every valid value was equal; all map to 0.5
};

/// Maps valid coordinates of the whole sequence jointly (one scalar extremum
/// pair over x, y and z) to [0, 1]. Invalid pixels are left as they are.
template <typename Scalar>
NormalizedPointMaps<Scalar> normalize_sequence(const BasicPointMapSequence<Scalar>& seq) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& f : seq) {
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
      if (!f.valid[i]) continue;
      for (int c = 0; c < 3; ++c) {
        lo = std::min(lo, static_cast<double>(f.coords[i][c]));
        hi = std::max(hi, static_cast<double>(f.coords[i][c]));
      }
    }
  }
  if (lo > hi) throw Error(Errc::EmptySequence, "pointmap sequence has no valid pixels");
  NormalizedPointMaps<Scalar> out{seq, lo, hi, lo == hi};
  const double range = hi - lo;
  for (auto& f : out.frames) {
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
      if (!f.valid[i]) continue;
      for (int c = 0; c < 3; ++c) {
        const double v = static_cast<double>(f.coords[i][c]);
        f.coords[i][c] = static_cast<Scalar>(out.degenerate ? 0.5 : (v - lo) / range);
      }
    }
  }
  return out;
}

template <typename Scalar>
BasicPointMapSequence<Scalar> denormalize(const NormalizedPointMaps<Scalar>& normalized) {
  BasicPointMapSequence<Scalar> out = normalized.frames;
  const double range = normalized.max - normalized.min;
  for (auto& f : out) {
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
      if (!f.valid[i]) continue;
      for (int c = 0; c < 3; ++c) {
        const double v = static_cast<double>(f.coords[i][c]);
        f.coords[i][c] = static_cast<Scalar>(normalized.degenerate ? normalized.min : v * range + normalized.min);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// World image extension and width concatenation

enum class WorldExtension { ZeroPad, RobotRgb };

/// Frame 0 is always the world image; the rest are black (ZeroPad) or robot
/// renders. A robot sequence of length T drops its first frame, T-1 is used whole.
inline RgbSequence extend_world_image(const RgbFrame& world, std::size_t frames, WorldExtension mode,
                                      const RgbSequence* robot_rgb = nullptr) {
  if (frames == 0) throw Error(Errc::InvalidArgument, "sequence length must be at least 1");
  RgbSequence out;
  out.reserve(frames);
  out.push_back(world);
  if (mode == WorldExtension::ZeroPad) {
    if (robot_rgb) throw Error(Errc::InvalidArgument, "zero padding takes no robot sequence");
    out.resize(frames, RgbFrame(world.rows(), world.cols(), Rgb::Zero()));
    return out;
  }
  if (!robot_rgb) {
    if (frames == 1) return out;
    throw Error(Errc::LengthMismatch, "robot_rgb mode needs a robot sequence");
  }
  const std::size_t n = robot_rgb->size();
  if (n != frames && n + 1 != frames) {
    throw Error(Errc::LengthMismatch, "robot sequence has " + std::to_string(n) + " frames for T=" +
                                          std::to_string(frames));
  }
  for (std::size_t k = n - (frames - 1); k < n; ++k) {
    const auto& f = (*robot_rgb)[k];
    if (!f.same_shape(world.rows(), world.cols())) throw Error(Errc::ShapeMismatch, "robot frame size differs");
    out.push_back(f);
  }
  return out;
}

/// Pseudo-RGB view of a normalized pointmap frame: x->R, y->G, z->B, invalid black.
template <typename Scalar>
RgbFrame pseudo_rgb(const PointMap<Scalar>& frame) {
  RgbFrame out(frame.height(), frame.width(), Rgb::Zero());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (frame.valid[i]) out[i] = frame.coords[i].template cast<float>();
  }
  return out;
}

/// Output frame t has width 2W: columns [0, W) from rgb[t], [W, 2W) the
/// pseudo-RGB pointmap.
template <typename Scalar>
RgbSequence concat_width(const RgbSequence& rgb, const NormalizedPointMaps<Scalar>& pm) {
  if (rgb.size() != pm.frames.size()) throw Error(Errc::ShapeMismatch, "RGB and pointmap lengths differ");
  RgbSequence out;
  out.reserve(rgb.size());
  for (std::size_t t = 0; t < rgb.size(); ++t) {
    const auto& left = rgb[t];
    const RgbFrame right = pseudo_rgb(pm.frames[t]);
    if (!left.same_shape(right.rows(), right.cols())) throw Error(Errc::ShapeMismatch, "RGB and pointmap sizes differ");
    const int H = left.rows();
    const int W = left.cols();
    RgbFrame frame(H, 2 * W, Rgb::Zero());
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        frame(r, c) = left(r, c);
        frame(r, W + c) = right(r, c);
      }
    }
    out.push_back(std::move(frame));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Temporal downsampling

/// Indices floor(i * (T_in - 1) / (target - 1)), i = 0 .. target-1. With
/// pad_short, inputs shorter than target are kept whole and the last frame repeated.
inline std::vector<std::size_t> downsample_indices(std::size_t input_frames, std::size_t target = 49,
                                                   bool pad_short = false) {
  if (target == 0) throw Error(Errc::InvalidArgument, "target frame count must be positive");
  if (input_frames == 0) throw Error(Errc::TooShort, "empty input sequence");
  std::vector<std::size_t> idx(target);
  if (input_frames < target) {
    if (!pad_short) {
      throw Error(Errc::TooShort, std::to_string(input_frames) + " frames, need " + std::to_string(target));
    }
    for (std::size_t i = 0; i < target; ++i) idx[i] = std::min(i, input_frames - 1);
    return idx;
  }
  if (target == 1) return {0};
  for (std::size_t i = 0; i < target; ++i) idx[i] = i * (input_frames - 1) / (target - 1);
  return idx;
}

template <typename T>
std::vector<T> select_frames(const std::vector<T>& seq, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(seq.at(i));
  return out;
}

template <typename T>
std::vector<T> downsample_temporal(const std::vector<T>& seq, std::size_t target = 49, bool pad_short = false) {
  return select_frames(seq, downsample_indices(seq.size(), target, pad_short));
}

// ---------------------------------------------------------------------------
// Pointmap perturbations

enum class PerturbationKind { Remove, Gaussian, Translate, Rotate };

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::Remove;
  double fraction = 0.05;   // remove
  double sigma = 0.0;       // gaussian, in pointmap units
  int du = 0;               // translate, pixels along columns
  int dv = 0;               // translate, pixels along rows
  double angle_deg = 0.0;   // rotate
  std::uint64_t seed = 0;
  int max_shift = 5;
  double max_angle_deg = 5.0;

  void check() const {
    switch (kind) {
      case PerturbationKind::Remove:
        if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(Errc::InvalidArgument, "remove fraction outside [0, 1]");
        break;
      case PerturbationKind::Gaussian:
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(Errc::InvalidArgument, "sigma must be >= 0");
        break;
      case PerturbationKind::Translate:
        if (std::abs(du) > max_shift || std::abs(dv) > max_shift) {
          throw Error(Errc::InvalidArgument, "shift exceeds " + std::to_string(max_shift) + " px");
        }
        break;
      case PerturbationKind::Rotate:
        if (!(std::abs(angle_deg) <= max_angle_deg)) {
          throw Error(Errc::InvalidArgument, "angle exceeds " + std::to_string(max_angle_deg) + " deg");
        }
        break;
    }
  }

  /// "remove:0.05", "gaussian:0.01", "translate:3,-2", "rotate:5" (short
  /// forms gaus/trans/rot accepted).
  static PerturbationSpec parse(std::string_view text, std::uint64_t seed = 0) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw Error(Errc::InvalidArgument, "perturbation needs kind:magnitude");
    const std::string kind(text.substr(0, colon));
    const std::string value(text.substr(colon + 1));
    PerturbationSpec spec;
    spec.seed = seed;
    try {
      if (kind == "remove") {
        spec.kind = PerturbationKind::Remove;
        spec.fraction = std::stod(value);
      } else if (kind == "gaussian" || kind == "gaus") {
        spec.kind = PerturbationKind::Gaussian;
        spec.sigma = std::stod(value);
      } else if (kind == "translate" || kind == "trans") {
        spec.kind = PerturbationKind::Translate;
        const auto comma = value.find(',');
        if (comma == std::string::npos) throw Error(Errc::InvalidArgument, "translate needs du,dv");
        spec.du = std::stoi(value.substr(0, comma));
        spec.dv = std::stoi(value.substr(comma + 1));
      } else if (kind == "rotate" || kind == "rot") {
        spec.kind = PerturbationKind::Rotate;
        spec.angle_deg = std::stod(value);
      } else {
        throw Error(Errc::InvalidArgument, "unknown perturbation '" + kind + "'");
      }
    } catch (const std::logic_error&) {
      throw Error(Errc::InvalidArgument, "bad perturbation magnitude '" + value + "'");
    }
    spec.check();
    return spec;
  }
};

namespace detail {

template <typename Scalar>
PointMap<Scalar> perturb_frame(const PointMap<Scalar>& in, const PerturbationSpec& spec, std::size_t t) {
  const int H = in.height();
  const int W = in.width();
  switch (spec.kind) {
    case PerturbationKind::Remove: {
      PointMap<Scalar> out = in;
      std::vector<std::size_t> valid;
      for (std::size_t i = 0; i < in.valid.size(); ++i) {
        if (in.valid[i]) valid.push_back(i);
      }
      // the survivor count is what gets rounded
      const auto keep = static_cast<std::size_t>(std::llround((1.0 - spec.fraction) * static_cast<double>(valid.size())));
      const std::size_t k = valid.size() - keep;
      Rng rng = make_rng(spec.seed, t);
      std::vector<std::size_t> chosen;
      std::sample(valid.begin(), valid.end(), std::back_inserter(chosen), k, rng);
      for (auto i : chosen) out.invalidate(i);
      return out;
    }
    case PerturbationKind::Gaussian: {
      PointMap<Scalar> out = in;
      if (spec.sigma == 0.0) return out;
      Rng rng = make_rng(spec.seed, t);
      std::normal_distribution<double> noise(0.0, spec.sigma);
      for (std::size_t i = 0; i < out.coords.size(); ++i) {
        if (!out.valid[i]) continue;
        for (int c = 0; c < 3; ++c) {
          out.coords[i][c] = static_cast<Scalar>(static_cast<double>(out.coords[i][c]) + noise(rng));
        }
      }
      return out;
    }
    case PerturbationKind::Translate: {
      PointMap<Scalar> out(H, W);
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          if (!in.valid(r, c)) continue;
          const int rr = r + spec.dv;
          const int cc = c + spec.du;
          if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
          out.coords(rr, cc) = in.coords(r, c);
          out.valid(rr, cc) = 1;
        }
      }
      return out;
    }
    case PerturbationKind::Rotate: {
      double sx = 0.0, sy = 0.0;
      std::size_t n = 0;
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          if (!in.valid(r, c)) continue;
          sx += c + 0.5;
          sy += r + 0.5;
          ++n;
        }
      }
      if (n == 0) return in;
      const double cx = sx / static_cast<double>(n);
      const double cy = sy / static_cast<double>(n);
      const double a = spec.angle_deg * std::numbers::pi / 180.0;
      const double ca = std::cos(a);
      const double sa = std::sin(a);
      PointMap<Scalar> out(H, W);
      // inverse mapping: each destination center pulls its nearest source pixel
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          const double dx = c + 0.5 - cx;
          const double dy = r + 0.5 - cy;
          const double srcx = cx + ca * dx + sa * dy;
          const double srcy = cy - sa * dx + ca * dy;
          const double fc = std::floor(srcx);
          const double fr = std::floor(srcy);
          if (fc < 0.0 || fr < 0.0 || fc >= W || fr >= H) continue;
          const int sc = static_cast<int>(fc);
          const int sr = static_cast<int>(fr);
          if (!in.valid(sr, sc)) continue;
          out.coords(r, c) = in.coords(sr, sc);
          out.valid(r, c) = 1;
        }
      }
      return out;
    }
  }
  return in;
}

}  // namespace detail

/// Robustness perturbations of a rendered pointmap sequence. Every frame draws
/// from its own (seed, frame) stream, so output is independent of `jobs`.
template <typename Scalar>
BasicPointMapSequence<Scalar> perturb(const BasicPointMapSequence<Scalar>& seq, const PerturbationSpec& spec,
                                      unsigned jobs = 1) {
  spec.check();
  BasicPointMapSequence<Scalar> out(seq.size());
  parallel_for(seq.size(), jobs, [&](std::size_t t) { out[t] = detail::perturb_frame(seq[t], spec, t); });
  return out;
}

// ---------------------------------------------------------------------------
// Pseudo-RGB export

inline std::string frame_file_name(std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05zu.ppm", t);
  return buf;
}

/// Writes frame_%05d.ppm (byte = round(255 v), x->R y->G z->B, invalid black)
/// and meta.json carrying the extrema needed to undo the normalization.
template <typename Scalar>
void export_pseudo_rgb(const NormalizedPointMaps<Scalar>& pm, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + directory.string() + ": " + ec.message());
  int H = 0, W = 0;
  for (std::size_t t = 0; t < pm.frames.size(); ++t) {
    const auto& f = pm.frames[t];
    H = f.height();
    W = f.width();
    Rgb8Frame img(H, W, Rgb8{0, 0, 0});
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (!f.valid[i]) continue;
      for (int c = 0; c < 3; ++c) img[i][c] = to_byte(static_cast<float>(f.coords[i][c]));
    }
    write_ppm(directory / frame_file_name(t), img);
  }
  nlohmann::json meta = {{"frame_count", pm.frames.size()},
                         {"height", H},
                         {"width", W},
                         {"min", pm.min},
                         {"max", pm.max},
                         {"degenerate", pm.degenerate},
                         {"channels", "xyz->rgb"},
                         {"quantization", "round(255*v)"},
                         {"frame_pattern", "frame_%05d.ppm"}};
  std::ofstream out(directory / "meta.json");
  if (!out) throw Error(Errc::IoFailure, "cannot write meta.json in " + directory.string());
  out << meta.dump(2) << "\n";
}

/// Reads an export back. Values are byte/255; pixels that are pure black are
/// treated as invalid, since the export does not store validity separately.
inline NormalizedPointMaps<float> import_pseudo_rgb(const std::filesystem::path& directory) {
  std::ifstream in(directory / "meta.json");
  if (!in) throw Error(Errc::IoFailure, "missing meta.json in " + directory.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoFailure, std::string("meta.json: ") + e.what());
  }
  NormalizedPointMaps<float> out;
  out.min = meta.at("min").get<double>();
  out.max = meta.at("max").get<double>();
  out.degenerate = meta.value("degenerate", false);
  const auto T = meta.at("frame_count").get<std::size_t>();
  for (std::size_t t = 0; t < T; ++t) {
    const Rgb8Frame img = read_ppm(directory / frame_file_name(t));
    PointMapFrame f(img.rows(), img.cols());
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (img[i][0] == 0 && img[i][1] == 0 && img[i][2] == 0) continue;
      f.valid[i] = 1;
      f.coords[i] = Eigen::Vector3f(img[i][0] / 255.0f, img[i][1] / 255.0f, img[i][2] / 255.0f);
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace kinema
