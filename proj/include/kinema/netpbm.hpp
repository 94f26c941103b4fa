#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "kinema/error.hpp"
#include "kinema/image.hpp"

namespace kinema {

using Rgb8 = std::array<std::uint8_t, 3>;
using Rgb8Frame = Grid<Rgb8>;

/// Binary PPM (P6, maxval 255): lossless 8-bit RGB frames.
inline void write_ppm(const std::filesystem::path& path, const Rgb8Frame& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << "P6\n" << image.cols() << " " << image.rows() << "\n255\n";
  for (const auto& px : image.values()) out.write(reinterpret_cast<const char*>(px.data()), 3);
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

inline Rgb8Frame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  auto next_token = [&in, &path]() {
    std::string token;
    while (in >> token) {
      if (token[0] != '#') return token;
      std::string rest;
      std::getline(in, rest);
    }
    throw Error(Errc::IoFailure, "truncated PPM header in " + path.string());
  };
  if (next_token() != "P6") throw Error(Errc::UnsupportedFormat, path.string() + " is not a binary PPM");
  const int width = std::stoi(next_token());
  const int height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (maxval != 255 || width <= 0 || height <= 0) {
    throw Error(Errc::UnsupportedFormat, path.string() + ": only 8-bit PPM is supported");
  }
  in.get();  // single whitespace before the raster
  Rgb8Frame image(height, width);
  for (auto& px : image.values()) in.read(reinterpret_cast<char*>(px.data()), 3);
  if (!in) throw Error(Errc::IoFailure, "truncated PPM raster in " + path.string());
  return image;
}

inline std::uint8_t to_byte(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(c)));
}

inline Rgb8Frame to_rgb8(const RgbFrame& frame) {
  Rgb8Frame out(frame.rows(), frame.cols());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    out[i] = {to_byte(frame[i].x()), to_byte(frame[i].y()), to_byte(frame[i].z())};
  }
  return out;
}

inline RgbFrame from_rgb8(const Rgb8Frame& frame) {
  RgbFrame out(frame.rows(), frame.cols(), Rgb::Zero());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    out[i] = Rgb(frame[i][0] / 255.0f, frame[i][1] / 255.0f, frame[i][2] / 255.0f);
  }
  return out;
}

}  // namespace kinema
