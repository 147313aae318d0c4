#pragma once

// Synthetic training data: procedurally textured backgrounds with textured
// convex sprites, each layer moving under its own affine map. Textures are
// evaluated analytically at continuous coordinates, so both frames and the
// dense ground-truth flow are exact by construction (no resampling chain).
// Also hosts the photometric/geometric augmentations and the local response
// normalization used by the training loss path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "uflow/grid.hpp"
#include "uflow/rng.hpp"

namespace uflow {

struct SamplePair {
  Image I1, I2;
  FlowField gt_flow;      // evaluation-only; the training iterator never sees it
  ValidityMask noc_mask;  // target lands in-frame and un-occluded
};

struct AffineMap {
  // q = M (p - c) + c + t
  double m00 = 1, m01 = 0, m10 = 0, m11 = 1;
  double cx = 0, cy = 0, tx = 0, ty = 0;

  void apply(double px, double py, double& qx, double& qy) const {
    double dx = px - cx, dy = py - cy;
    qx = m00 * dx + m01 * dy + cx + tx;
    qy = m10 * dx + m11 * dy + cy + ty;
  }

  double det() const { return m00 * m11 - m01 * m10; }

  AffineMap inverse() const {
    double d = det();
    AffineMap inv;
    inv.m00 = m11 / d;
    inv.m01 = -m01 / d;
    inv.m10 = -m10 / d;
    inv.m11 = m00 / d;
    inv.cx = cx + tx;
    inv.cy = cy + ty;
    inv.tx = cx - inv.cx;
    inv.ty = cy - inv.cy;
    return inv;  // maps q back to p: p = Minv (q - (c+t)) + c
  }
};

namespace detail {

// Infinite multi-octave value noise; lattice values are hashed from the
// seed so any continuous coordinate can be evaluated exactly. Octaves are
// centered so their variances add without clipping, and the wavelength
// ladder keeps contrast alive through 9x9 response normalization as well as
// 8x area downsampling.
class ProceduralTexture {
 public:
  ProceduralTexture() = default;
  ProceduralTexture(uint64_t seed, int channels) : seed_(seed), channels_(channels) {
    Rng rng(hash_seed(seed, 0x7e97));
    for (int c = 0; c < 3; ++c) {
      mean_[c] = rng.uniform(0.38, 0.62);
      scale_[c] = rng.uniform(0.85, 1.15);
    }
  }

  double value(double x, double y, int c) const {
    static constexpr double kWavelength[4] = {36.0, 18.0, 9.0, 4.5};
    static constexpr double kAmp[4] = {0.60, 0.48, 0.36, 0.26};
    double acc = 0.0;
    for (int o = 0; o < 4; ++o)
      acc += kAmp[o] * (octave(o, c, x / kWavelength[o], y / kWavelength[o]) - 0.5);
    double v = mean_[c] + scale_[c] * acc;
    return v < 0.02 ? 0.02 : (v > 0.98 ? 0.98 : v);
  }

 private:
  double lattice(int o, int c, int64_t i, int64_t j) const {
    uint64_t h = hash_seed(seed_, (uint64_t(o) << 8) | uint64_t(c), uint64_t(i), uint64_t(j));
    return double(h >> 11) * 0x1.0p-53;
  }

  double octave(int o, int c, double x, double y) const {
    double fx = std::floor(x), fy = std::floor(y);
    int64_t ix = int64_t(fx), iy = int64_t(fy);
    double ax = x - fx, ay = y - fy;
    double v00 = lattice(o, c, ix, iy), v10 = lattice(o, c, ix + 1, iy);
    double v01 = lattice(o, c, ix, iy + 1), v11 = lattice(o, c, ix + 1, iy + 1);
    return (v00 * (1 - ax) + v10 * ax) * (1 - ay) + (v01 * (1 - ax) + v11 * ax) * ay;
  }

  uint64_t seed_ = 0;
  int channels_ = 3;
  double mean_[3] = {0.5, 0.5, 0.5};
  double scale_[3] = {1, 1, 1};
};

struct ConvexPolygon {
  std::vector<double> vx, vy;

  bool contains(double x, double y) const {
    int n = int(vx.size());
    for (int i = 0; i < n; ++i) {
      int j = (i + 1) % n;
      double cross = (vx[j] - vx[i]) * (y - vy[i]) - (vy[j] - vy[i]) * (x - vx[i]);
      if (cross < 0.0) return false;  // vertices are CCW by construction
    }
    return true;
  }
};

}  // namespace detail

struct PairSpec {
  int width = 64, height = 64;
  int sprite_count = 3;
  double max_translation = 3.0;   // px, each layer draws its own
  double max_rotation_deg = 4.0;
  double max_scale_delta = 0.04;
  double max_shear = 0.03;
  uint64_t seed = 1;

  void validate() const {
    require(width >= 8 && height >= 8, ErrorCode::BadConfig, "PairSpec: dims too small");
    require(sprite_count >= 0, ErrorCode::BadConfig, "PairSpec: negative sprite count");
  }
};

struct GeneratedScene {
  SamplePair pair;
  std::vector<int> owner1;          // per pixel of I1: -1 background, else sprite index
  std::vector<AffineMap> maps;      // index 0 background, then sprites in z-order
  std::vector<detail::ConvexPolygon> polys;  // sprite polygons, I1 frame
};

namespace detail {

inline AffineMap draw_affine(Rng& rng, const PairSpec& spec, double cx, double cy) {
  // degenerate maps (|det| < 0.1) are rejected and redrawn
  for (;;) {
    double theta = rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg) * 3.14159265358979323846 / 180.0;
    double s = 1.0 + rng.uniform(-spec.max_scale_delta, spec.max_scale_delta);
    double shx = rng.uniform(-spec.max_shear, spec.max_shear);
    double shy = rng.uniform(-spec.max_shear, spec.max_shear);
    double ct = std::cos(theta), st = std::sin(theta);
    AffineMap a;
    // s * R(theta) * [[1, shx], [shy, 1]]
    a.m00 = s * (ct - st * shy);
    a.m01 = s * (ct * shx - st);
    a.m10 = s * (st + ct * shy);
    a.m11 = s * (st * shx + ct);
    a.cx = cx;
    a.cy = cy;
    a.tx = rng.uniform(-spec.max_translation, spec.max_translation);
    a.ty = rng.uniform(-spec.max_translation, spec.max_translation);
    if (std::abs(a.det()) >= 0.1) return a;
  }
}

inline ConvexPolygon draw_polygon(Rng& rng, double cx, double cy, double radius) {
  int n = int(rng.uniform_int(3, 6));
  std::vector<double> angles(n);
  for (auto& a : angles) a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  std::sort(angles.begin(), angles.end());
  ConvexPolygon poly;
  for (double a : angles) {
    double r = radius * rng.uniform(0.7, 1.0);
    poly.vx.push_back(cx + r * std::cos(a));
    poly.vy.push_back(cy + r * std::sin(a));
  }
  return poly;
}

}  // namespace detail

inline GeneratedScene generate_scene(const PairSpec& spec) {
  spec.validate();
  const int W = spec.width, H = spec.height;
  Rng rng(hash_seed(spec.seed, 0x5ce11e));

  GeneratedScene scene;
  int n_layers = spec.sprite_count + 1;
  std::vector<detail::ProceduralTexture> textures;
  textures.reserve(n_layers);
  textures.emplace_back(hash_seed(spec.seed, 0x7e, 0), 3);
  scene.maps.push_back(detail::draw_affine(rng, spec, (W - 1) / 2.0, (H - 1) / 2.0));

  double min_dim = std::min(W, H);
  for (int s = 0; s < spec.sprite_count; ++s) {
    double cx = rng.uniform(0.15, 0.85) * (W - 1);
    double cy = rng.uniform(0.15, 0.85) * (H - 1);
    double radius = rng.uniform(0.10, 0.22) * min_dim;
    scene.polys.push_back(detail::draw_polygon(rng, cx, cy, radius));
    scene.maps.push_back(detail::draw_affine(rng, spec, cx, cy));
    textures.emplace_back(hash_seed(spec.seed, 0x7e, uint64_t(s + 1)), 3);
  }

  std::vector<AffineMap> inverses;
  for (const auto& m : scene.maps) inverses.push_back(m.inverse());

  SamplePair& pair = scene.pair;
  pair.I1 = Image(H, W, 3);
  pair.I2 = Image(H, W, 3);
  pair.gt_flow = FlowField(H, W);
  pair.noc_mask = ValidityMask(H, W);
  scene.owner1.assign(size_t(H) * W, -1);

  // visible layer per I2 pixel, for the occlusion part of the mask
  std::vector<int> owner2(size_t(H) * W, -1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      int who = -1;
      for (int s = spec.sprite_count - 1; s >= 0; --s) {
        double px, py;
        inverses[s + 1].apply(x, y, px, py);
        if (scene.polys[s].contains(px, py)) {
          who = s;
          break;
        }
      }
      owner2[size_t(y) * W + x] = who;
      if (who >= 0) {
        double px, py;
        inverses[who + 1].apply(x, y, px, py);
        for (int c = 0; c < 3; ++c) pair.I2.at(x, y, c) = textures[who + 1].value(px, py, c);
      } else {
        double px, py;
        inverses[0].apply(x, y, px, py);
        for (int c = 0; c < 3; ++c) pair.I2.at(x, y, c) = textures[0].value(px, py, c);
      }
    }

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      int who = -1;
      for (int s = spec.sprite_count - 1; s >= 0; --s)
        if (scene.polys[s].contains(x, y)) {
          who = s;
          break;
        }
      scene.owner1[size_t(y) * W + x] = who;
      const auto& tex = textures[who + 1];
      for (int c = 0; c < 3; ++c) pair.I1.at(x, y, c) = tex.value(x, y, c);

      double qx, qy;
      scene.maps[who + 1].apply(x, y, qx, qy);
      pair.gt_flow.u.at(x, y) = qx - x;
      pair.gt_flow.v.at(x, y) = qy - y;

      bool ok = qx >= 0.0 && qx <= W - 1 && qy >= 0.0 && qy <= H - 1;
      if (ok) {
        // every target pixel with nonzero bilinear weight must be visible
        // from the same layer, otherwise the pixel counts as occluded
        int x0 = int(std::floor(qx)), y0 = int(std::floor(qy));
        double fx = qx - x0, fy = qy - y0;
        for (int dy = 0; dy <= 1 && ok; ++dy)
          for (int dx = 0; dx <= 1 && ok; ++dx) {
            if ((dx == 1 && fx == 0.0) || (dy == 1 && fy == 0.0)) continue;
            int nx = x0 + dx, ny = y0 + dy;
            if (nx < 0 || nx >= W || ny < 0 || ny >= H) continue;  // zero-weight at the rim
            if (owner2[size_t(ny) * W + nx] != who) ok = false;
          }
      }
      pair.noc_mask.set(x, y, ok);
    }

  return scene;
}

inline SamplePair generate_pair(const PairSpec& spec) { return generate_scene(spec).pair; }

// Background-only scene under an exact constant translation; ground truth
// is the constant field (tx, ty).
inline SamplePair generate_translation_pair(int height, int width, double tx, double ty,
                                            uint64_t seed) {
  PairSpec spec;
  spec.width = width;
  spec.height = height;
  spec.sprite_count = 0;
  spec.max_rotation_deg = 0.0;
  spec.max_scale_delta = 0.0;
  spec.max_shear = 0.0;
  spec.max_translation = 0.0;
  spec.seed = seed;
  GeneratedScene scene = generate_scene(spec);
  // overwrite the (zero) background motion with the requested translation
  detail::ProceduralTexture tex(hash_seed(seed, 0x7e, 0), 3);
  const int W = width, H = height;
  SamplePair pair = std::move(scene.pair);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) pair.I2.at(x, y, c) = tex.value(x - tx, y - ty, c);
      pair.gt_flow.u.at(x, y) = tx;
      pair.gt_flow.v.at(x, y) = ty;
      double qx = x + tx, qy = y + ty;
      pair.noc_mask.set(x, y, qx >= 0.0 && qx <= W - 1 && qy >= 0.0 && qy <= H - 1);
    }
  return pair;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentConfig {
  double noise_sigma = 0.015;
  double contrast_lo = 0.9, contrast_hi = 1.1;
  double color_lo = 0.9, color_hi = 1.1;
  double gamma_lo = 0.8, gamma_hi = 1.25;
  double brightness_lo = -0.08, brightness_hi = 0.08;
  double translation_range = 2.0;  // shared similarity transform, px
  bool allow_flip = true;
  double rotation_range_deg = 4.0;
  double scale_lo = 0.97, scale_hi = 1.03;
  double relative_translation = 2.0;  // extra frame-2 shift, px
  uint64_t seed = 0;

  void validate() const {
    require(noise_sigma >= 0.0, ErrorCode::BadConfig, "aug: negative noise sigma");
    require(contrast_lo <= contrast_hi && color_lo <= color_hi && gamma_lo <= gamma_hi &&
                brightness_lo <= brightness_hi && scale_lo <= scale_hi,
            ErrorCode::BadConfig, "aug: range bounds out of order");
    require(gamma_lo > 0.0, ErrorCode::BadConfig, "aug: gamma must be positive");
  }
};

struct PhotoDraw {
  double color_mult[3] = {1, 1, 1};
  double contrast = 1.0;
  double gamma = 1.0;
  double brightness = 0.0;
};

inline PhotoDraw draw_photo_params(const AugmentConfig& cfg, Rng& rng) {
  PhotoDraw d;
  for (int c = 0; c < 3; ++c) d.color_mult[c] = rng.uniform(cfg.color_lo, cfg.color_hi);
  d.contrast = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
  d.gamma = rng.uniform(cfg.gamma_lo, cfg.gamma_hi);
  d.brightness = rng.uniform(cfg.brightness_lo, cfg.brightness_hi);
  return d;
}

// Applies, in fixed order: per-channel color, contrast about 0.5, gamma,
// additive brightness, additive Gaussian noise; clamps to [0,1] at the end.
inline Image apply_photometric(const Image& img, const PhotoDraw& d, double noise_sigma,
                               Rng& noise_rng) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = img.at(x, y, c);
        v *= d.color_mult[img.channels == 3 ? c : 0];
        v += (d.contrast - 1.0) * (v - 0.5);  // contrast about 0.5; exact identity at 1
        v = std::pow(v > 0.0 ? v : 0.0, d.gamma);
        v += d.brightness;
        if (noise_sigma > 0.0) v += noise_rng.normal(0.0, noise_sigma);
        out.at(x, y, c) = std::clamp(v, 0.0, 1.0);
      }
  return out;
}

inline Image photometric_augment(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  PhotoDraw d = draw_photo_params(cfg, rng);
  return apply_photometric(img, d, cfg.noise_sigma, rng);
}

struct GeoDraw {
  bool flip = false;
  double angle_rad = 0.0;
  double scale = 1.0;
  double tx = 0.0, ty = 0.0;
  double rel_tx = 0.0, rel_ty = 0.0;
};

inline GeoDraw draw_geo_params(const AugmentConfig& cfg, Rng& rng) {
  GeoDraw d;
  d.flip = cfg.allow_flip && rng.bernoulli(0.5);
  d.angle_rad = rng.uniform(-cfg.rotation_range_deg, cfg.rotation_range_deg) *
                3.14159265358979323846 / 180.0;
  d.scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  d.tx = rng.uniform(-cfg.translation_range, cfg.translation_range);
  d.ty = rng.uniform(-cfg.translation_range, cfg.translation_range);
  d.rel_tx = rng.uniform(-cfg.relative_translation, cfg.relative_translation);
  d.rel_ty = rng.uniform(-cfg.relative_translation, cfg.relative_translation);
  return d;
}

namespace detail {

// shared similarity transform T(p) = M (p - c) + c + t about the image center
struct Similarity {
  double m00, m01, m10, m11, cx, cy, tx, ty;

  static Similarity from_draw(const GeoDraw& d, int width, int height) {
    double f = d.flip ? -1.0 : 1.0;
    double ct = std::cos(d.angle_rad), st = std::sin(d.angle_rad);
    Similarity s;
    s.m00 = d.scale * ct * f;
    s.m01 = -d.scale * st;
    s.m10 = d.scale * st * f;
    s.m11 = d.scale * ct;
    s.cx = (width - 1) / 2.0;
    s.cy = (height - 1) / 2.0;
    s.tx = d.tx;
    s.ty = d.ty;
    return s;
  }

  void inverse_apply(double x, double y, double& px, double& py) const {
    double dx = x - cx - tx, dy = y - cy - ty;
    double det = m00 * m11 - m01 * m10;
    px = (m11 * dx - m01 * dy) / det + cx;
    py = (-m10 * dx + m00 * dy) / det + cy;
  }
};

inline Image resample(const Image& img, const Similarity& s, double extra_tx = 0.0,
                      double extra_ty = 0.0) {
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double px, py;
      s.inverse_apply(x - extra_tx, y - extra_ty, px, py);
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = sample_bilinear_clamped(img, px, py, c);
    }
  return out;
}

}  // namespace detail

// Images-only variant; this is the one the training path uses (no ground
// truth enters here by construction).
inline void geometric_augment_images(const Image& I1, const Image& I2, const GeoDraw& d,
                                     Image& out1, Image& out2) {
  detail::Similarity s = detail::Similarity::from_draw(d, I1.width, I1.height);
  out1 = detail::resample(I1, s);
  out2 = detail::resample(I2, s, d.rel_tx, d.rel_ty);
}

// Full variant: resamples both frames, transforms the flow vectors by the
// similarity's linear part, adds the relative translation, and rebuilds the
// validity mask.
inline SamplePair geometric_augment(const SamplePair& pair, const AugmentConfig& cfg, Rng& rng) {
  GeoDraw d = draw_geo_params(cfg, rng);
  const int W = pair.I1.width, H = pair.I1.height;
  detail::Similarity s = detail::Similarity::from_draw(d, W, H);

  SamplePair out;
  out.I1 = detail::resample(pair.I1, s);
  out.I2 = detail::resample(pair.I2, s, d.rel_tx, d.rel_ty);
  out.gt_flow = FlowField(H, W);
  out.noc_mask = ValidityMask(H, W);

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double px, py;
      s.inverse_apply(x, y, px, py);
      bool src_inside = px >= 0.0 && px <= W - 1 && py >= 0.0 && py <= H - 1;
      double fu = sample_bilinear_clamped(pair.gt_flow.u, px, py);
      double fv = sample_bilinear_clamped(pair.gt_flow.v, px, py);
      double nu = s.m00 * fu + s.m01 * fv + d.rel_tx;
      double nv = s.m10 * fu + s.m11 * fv + d.rel_ty;
      out.gt_flow.u.at(x, y) = nu;
      out.gt_flow.v.at(x, y) = nv;

      int nx = int(std::lround(std::clamp(px, 0.0, double(W - 1))));
      int ny = int(std::lround(std::clamp(py, 0.0, double(H - 1))));
      bool ok = src_inside && pair.noc_mask.at(nx, ny);
      double qx = x + nu, qy = y + nv;
      if (qx < 0.0 || qx > W - 1 || qy < 0.0 || qy > H - 1) ok = false;
      out.noc_mask.set(x, y, ok);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Local response normalization: out = in / (windowed mean + kappa), window
// clipped at the borders.
inline Image response_normalize(const Image& img, int window = 9, double kappa = 0.01) {
  require(window % 2 == 1 && window >= 1, ErrorCode::BadConfig, "response window must be odd");
  const int H = img.height, W = img.width, C = img.channels;
  const int r = window / 2;
  Image out(H, W, C);

  // per-channel integral image, (H+1) x (W+1)
  std::vector<double> integral(size_t(H + 1) * (W + 1));
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y <= H; ++y) integral[size_t(y) * (W + 1)] = 0.0;
    for (int x = 0; x <= W; ++x) integral[x] = 0.0;
    for (int y = 1; y <= H; ++y)
      for (int x = 1; x <= W; ++x)
        integral[size_t(y) * (W + 1) + x] = img.at(x - 1, y - 1, c) +
                                            integral[size_t(y - 1) * (W + 1) + x] +
                                            integral[size_t(y) * (W + 1) + x - 1] -
                                            integral[size_t(y - 1) * (W + 1) + x - 1];
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        int x0 = std::max(0, x - r), x1 = std::min(W - 1, x + r);
        int y0 = std::max(0, y - r), y1 = std::min(H - 1, y + r);
        double sum = integral[size_t(y1 + 1) * (W + 1) + x1 + 1] -
                     integral[size_t(y0) * (W + 1) + x1 + 1] -
                     integral[size_t(y1 + 1) * (W + 1) + x0] + integral[size_t(y0) * (W + 1) + x0];
        double mean = sum / (double(x1 - x0 + 1) * (y1 - y0 + 1));
        out.at(x, y, c) = img.at(x, y, c) / (mean + kappa);
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training-sample assembly. The pair fed to the network carries the full
// augmentation; the pair consumed by the photometric loss carries geometric
// augmentation only. Both share one geometric draw, and (per config) both
// are response-normalized as the last stage, so their registration is
// identical and identity photometric parameters make them equal.

struct TrainSample {
  Image net_I1, net_I2;   // photometric + geometric
  Image loss_I1, loss_I2; // geometric only
};

struct TrainSampleConfig {
  AugmentConfig aug;
  bool response_norm = true;
  int window = 9;
  double kappa = 0.01;
};

inline TrainSample make_train_sample(const Image& I1, const Image& I2,
                                     const TrainSampleConfig& cfg, uint64_t seed) {
  Rng geo_rng(hash_seed(seed, 0x6e0));
  GeoDraw gd = draw_geo_params(cfg.aug, geo_rng);

  TrainSample ts;
  Image g1, g2;
  geometric_augment_images(I1, I2, gd, g1, g2);

  Rng photo_rng(hash_seed(seed, 0x4d0));
  PhotoDraw pd = draw_photo_params(cfg.aug, photo_rng);
  Image n1 = apply_photometric(g1, pd, cfg.aug.noise_sigma, photo_rng);
  Image n2 = apply_photometric(g2, pd, cfg.aug.noise_sigma, photo_rng);

  if (cfg.response_norm) {
    g1 = response_normalize(g1, cfg.window, cfg.kappa);
    g2 = response_normalize(g2, cfg.window, cfg.kappa);
    n1 = response_normalize(n1, cfg.window, cfg.kappa);
    n2 = response_normalize(n2, cfg.window, cfg.kappa);
  }
  ts.loss_I1 = std::move(g1);
  ts.loss_I2 = std::move(g2);
  ts.net_I1 = std::move(n1);
  ts.net_I2 = std::move(n2);
  return ts;
}

}  // namespace uflow
