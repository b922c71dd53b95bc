#pragma once

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "kpose/error.hpp"
#include "kpose/geometry.hpp"

namespace kpose {

inline constexpr std::size_t kHeatmapSize = 64;
inline constexpr double kDefaultSigma = 2.0;

/// K channels of H x W values in [0, 1], channel-major then row-major.
struct HeatmapStack {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  HeatmapStack() = default;
  HeatmapStack(std::size_t k, std::size_t h, std::size_t w)
      : channels(k), height(h), width(w), data(k * h * w, 0.0f) {}

  std::size_t channel_size() const { return height * width; }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }

  std::span<const float> channel(std::size_t c) const {
    return {data.data() + c * channel_size(), channel_size()};
  }
  std::span<float> channel(std::size_t c) {
    return {data.data() + c * channel_size(), channel_size()};
  }

  bool same_shape(const HeatmapStack& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  friend bool operator==(const HeatmapStack&, const HeatmapStack&) = default;
};

struct GaussianParams {
  double sigma = kDefaultSigma;
};

struct FocalParams {
  double gamma = 2.0;
  double beta = 4.0;
  double clamp_eps = 1e-6;
};

inline void validate(const FocalParams& p) {
  if (!(p.gamma >= 0.0) || !(p.beta >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "focal exponents must be non-negative");
  if (!(p.clamp_eps > 0.0 && p.clamp_eps < 0.5))
    throw Error(ErrorKind::InvalidArgument, "clamp_eps must lie in (0, 0.5)");
}

inline constexpr double kHeatmapZeroCutoff = 1e-12;
inline constexpr double kPositiveLabelTolerance = 1e-9;

/// Peak-normalized Gaussian evaluated at integer pixel centers, one channel
/// per keypoint. Keypoints off the grid give truncated (or empty) channels.
inline HeatmapStack render(std::span<const Vec2> keypoints_hm, const GaussianParams& params = {},
                           std::size_t height = kHeatmapSize, std::size_t width = kHeatmapSize) {
  if (!(params.sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  HeatmapStack stack(keypoints_hm.size(), height, width);
  const double inv_two_sigma2 = 1.0 / (2.0 * params.sigma * params.sigma);
  for (std::size_t c = 0; c < keypoints_hm.size(); ++c) {
    const Vec2& kp = keypoints_hm[c];
    if (!kp.allFinite()) continue;
    for (std::size_t y = 0; y < height; ++y) {
      const double dy = static_cast<double>(y) - kp.y();
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) - kp.x();
        const double v = std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
        stack.at(c, y, x) = v < kHeatmapZeroCutoff ? 0.0f : static_cast<float>(v);
      }
    }
  }
  return stack;
}

struct DecodedKeypoint {
  Vec2 position;  // heatmap pixels, integer valued
  double peak = 0.0;
};

/// Argmax per channel; the first maximum in row-major order wins.
inline std::vector<DecodedKeypoint> decode(const HeatmapStack& stack) {
  std::vector<DecodedKeypoint> out;
  out.reserve(stack.channels);
  for (std::size_t c = 0; c < stack.channels; ++c) {
    const auto ch = stack.channel(c);
    std::size_t best = 0;
    for (std::size_t i = 1; i < ch.size(); ++i)
      if (ch[i] > ch[best]) best = i;
    DecodedKeypoint kp;
    kp.position = ch.empty() ? Vec2::Zero()
                             : Vec2(static_cast<double>(best % stack.width),
                                    static_cast<double>(best / stack.width));
    kp.peak = ch.empty() ? 0.0 : ch[best];
    out.push_back(kp);
  }
  return out;
}

/// Penalty-reduced focal loss averaged over every pixel of every channel,
/// reported with a leading minus so it is non-negative:
///   y == 1: -(1 - p)^gamma log p
///   y <  1: -(1 - y)^beta p^gamma log(1 - p)
/// Predictions are clamped to [eps, 1 - eps] first.
inline double focal_loss(const HeatmapStack& pred, const HeatmapStack& target,
                         const FocalParams& params = {}) {
  validate(params);
  if (!pred.same_shape(target))
    throw Error(ErrorKind::ShapeMismatch, "prediction and target stacks differ in shape");
  const std::size_t n = pred.data.size();
  if (n == 0) return 0.0;

  using Arr = Eigen::ArrayXd;
  const auto cs = static_cast<Eigen::Index>(pred.channel_size());
  double total = 0.0;
  // Per-channel partial sums combined in channel order.
  for (std::size_t c = 0; c < pred.channels; ++c) {
    const Arr p = Eigen::Map<const Eigen::ArrayXf>(pred.channel(c).data(), cs)
                      .cast<double>()
                      .max(params.clamp_eps)
                      .min(1.0 - params.clamp_eps);
    const Arr y = Eigen::Map<const Eigen::ArrayXf>(target.channel(c).data(), cs).cast<double>();
    const Arr pos = (1.0 - p).pow(params.gamma) * p.log();
    const Arr neg = (1.0 - y).pow(params.beta) * p.pow(params.gamma) * (1.0 - p).log();
    total += (y >= 1.0 - kPositiveLabelTolerance).select(pos, neg).sum();
  }
  return -total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// HMAP file: "HMAP", u32 K, u32 H, u32 W (little endian), then K*H*W float32 LE.

static_assert(std::endian::native == std::endian::little, "HMAP I/O assumes a little-endian host");

inline std::string encode_hmap(const HeatmapStack& stack) {
  std::string out = "HMAP";
  auto put_u32 = [&](std::size_t v) {
    if (v > UINT32_MAX) throw Error(ErrorKind::InvalidArgument, "heatmap dimension exceeds 32 bits");
    const auto u = static_cast<std::uint32_t>(v);
    char b[4];
    std::memcpy(b, &u, 4);
    out.append(b, 4);
  };
  put_u32(stack.channels);
  put_u32(stack.height);
  put_u32(stack.width);
  const std::size_t offset = out.size();
  out.resize(offset + stack.data.size() * sizeof(float));
  std::memcpy(out.data() + offset, stack.data.data(), stack.data.size() * sizeof(float));
  return out;
}

inline HeatmapStack decode_hmap(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "HMAP") != 0)
    throw Error(ErrorKind::ParseError, "missing HMAP header");
  std::uint32_t dims[3];
  std::memcpy(dims, bytes.data() + 4, 12);
  const std::size_t count = std::size_t{dims[0]} * dims[1] * dims[2];
  if (bytes.size() != 16 + count * sizeof(float))
    throw Error(ErrorKind::ParseError, "HMAP payload is " + std::to_string(bytes.size() - 16) +
                                           " bytes, expected " + std::to_string(count * 4));
  HeatmapStack stack(dims[0], dims[1], dims[2]);
  std::memcpy(stack.data.data(), bytes.data() + 16, count * sizeof(float));
  for (float v : stack.data)
    if (!(v >= 0.0f && v <= 1.0f)) throw Error(ErrorKind::ParseError, "HMAP value outside [0, 1]");
  return stack;
}

inline HeatmapStack read_hmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return decode_hmap(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
}

}  // namespace kpose
