#pragma once

// Independent brute-force reference implementations used by the tests.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "modist/contrastive.hpp"
#include "modist/tensor.hpp"

namespace oracle {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Direct transcription without max-shifting.
inline double info_nce(const std::vector<double>& q, const std::vector<double>& k,
                       const std::vector<std::vector<double>>& negs, double tau) {
  const double pos = std::exp(dot(q, k) / tau);
  double denom = pos;
  for (const auto& n : negs) denom += std::exp(dot(q, n) / tau);
  return -std::log(pos / denom);
}

struct BankEntry {
  std::vector<double> v;
  std::int64_t index;
};

inline std::vector<std::vector<double>> negatives(const std::vector<BankEntry>& bank, std::int64_t exclude) {
  std::vector<std::vector<double>> out;
  for (const auto& e : bank) {
    if (e.index != exclude) out.push_back(e.v);
  }
  return out;
}

// Per-sample scalar loop over every term of the weighted objective.
inline modist::LossBreakdown total_loss(std::span<const modist::SampleEmbeddings> batch,
                                        const std::vector<BankEntry>& vbank, const std::vector<BankEntry>& mbank,
                                        const modist::ContrastiveConfig& cfg) {
  modist::LossBreakdown out;
  for (const auto& s : batch) {
    const auto vn = negatives(vbank, s.video_index);
    out.l_v += info_nce(s.v_query.vector, s.v_key.vector, vn, cfg.tau);
    if (cfg.w_m != 0.0 || cfg.w_mv != 0.0) {
      const auto mn = negatives(mbank, s.video_index);
      out.l_m += info_nce(s.m_query.vector, s.m_key.vector, mn, cfg.tau);
      out.l_mv += info_nce(s.v_query.vector, s.m_key.vector, vn, cfg.tau) +
                  info_nce(s.m_query.vector, s.v_key.vector, mn, cfg.tau);
    }
  }
  const double n = static_cast<double>(batch.size());
  out.l_v /= n;
  out.l_m /= n;
  out.l_mv /= n;
  out.total = cfg.w_v * out.l_v + cfg.w_m * out.l_m + cfg.w_mv * out.l_mv;
  return out;
}

// Zero-padded 3D convolution, [Cin, T, H, W] -> [Cout, T', H', W'];
// weights [Cout, Cin, kt, kh, kw].
inline modist::TensorD conv3d(const modist::TensorD& x, const std::vector<double>& w, const std::vector<double>& bias,
                              int cout, int kt, int kh, int kw, int st, int sh, int sw, int pt, int ph, int pw) {
  const int cin = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int To = (T + 2 * pt - kt) / st + 1, Ho = (H + 2 * ph - kh) / sh + 1, Wo = (W + 2 * pw - kw) / sw + 1;
  modist::TensorD y({cout, To, Ho, Wo});
  for (int o = 0; o < cout; ++o)
    for (int t = 0; t < To; ++t)
      for (int h = 0; h < Ho; ++h)
        for (int q = 0; q < Wo; ++q) {
          double s = bias.empty() ? 0.0 : bias[o];
          for (int c = 0; c < cin; ++c)
            for (int a = 0; a < kt; ++a)
              for (int b = 0; b < kh; ++b)
                for (int d = 0; d < kw; ++d) {
                  const int ti = t * st - pt + a, hi = h * sh - ph + b, wi = q * sw - pw + d;
                  if (ti < 0 || ti >= T || hi < 0 || hi >= H || wi < 0 || wi >= W) continue;
                  s += w[(((static_cast<std::size_t>(o) * cin + c) * kt + a) * kh + b) * kw + d] * x.at(c, ti, hi, wi);
                }
          y.at(o, t, h, q) = s;
        }
  return y;
}

// Sobel magnitude with replicate padding, clamped to [0, clamp].
inline modist::TensorF sobel(const modist::TensorF& m, double clamp) {
  const int H = m.dim(0), W = m.dim(1);
  auto px = [&](int y, int x) {
    y = y < 0 ? 0 : (y >= H ? H - 1 : y);
    x = x < 0 ? 0 : (x >= W ? W - 1 : x);
    return static_cast<double>(m.at(y, x));
  };
  modist::TensorF out({H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
      const double g = std::sqrt(gx * gx + gy * gy);
      out.at(y, x) = static_cast<float>(g > clamp ? clamp : g);
    }
  return out;
}

}  // namespace oracle
