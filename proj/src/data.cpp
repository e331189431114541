#include "pgn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pgn {

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  h = h - std::floor(h);  // wrap to [0,1)
  const float hh = h * 6.0f;
  const int sector = static_cast<int>(hh) % 6;
  const float f = hh - std::floor(hh);
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

namespace {

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

void put_pixel(std::vector<float>& img, int size, int y, int x, float r, float g, float b) {
  img[static_cast<size_t>(0 * size * size + y * size + x)] = clamp01(r);
  img[static_cast<size_t>(1 * size * size + y * size + x)] = clamp01(g);
  img[static_cast<size_t>(2 * size * size + y * size + x)] = clamp01(b);
}

void draw_distractors(std::vector<float>& img, int size, Rng& rng, int count) {
  for (int d = 0; d < count; ++d) {
    const bool disc = rng.below(2) == 0;
    const int ext = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(size / 3)));
    const int cy = static_cast<int>(rng.below(static_cast<uint64_t>(size)));
    const int cx = static_cast<int>(rng.below(static_cast<uint64_t>(size)));
    const float g = static_cast<float>(rng.uniform(0.05, 0.95));
    for (int y = std::max(0, cy - ext); y < std::min(size, cy + ext); ++y)
      for (int x = std::max(0, cx - ext); x < std::min(size, cx + ext); ++x) {
        if (disc) {
          const int dy = y - cy, dx = x - cx;
          if (dy * dy + dx * dx > ext * ext) continue;
        }
        put_pixel(img, size, y, x, g, g, g);
      }
  }
}

void fill_global_hue(std::vector<float>& img, int size, int label, int num_classes, int domain,
                     Rng& rng) {
  // class hues sit at bin centers so jitter stays inside one hue bin;
  // domains shift the palette by half a class spacing and shrink saturation
  const float spacing = 1.0f / static_cast<float>(num_classes);
  const float hue =
      (static_cast<float>(label) + 0.5f + 0.5f * static_cast<float>(domain)) * spacing +
      static_cast<float>(rng.uniform(-0.18, 0.18)) * spacing;
  const float sat0 = static_cast<float>(rng.uniform(0.55, 0.95)) * (domain == 0 ? 1.0f : 0.8f);
  const float val0 = static_cast<float>(rng.uniform(0.5, 0.9));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float s = clamp01(sat0 + static_cast<float>(rng.uniform(-0.05, 0.05)));
      const float v = clamp01(val0 + static_cast<float>(rng.uniform(-0.06, 0.06)));
      float r, g, b;
      hsv_to_rgb(hue, s, v, r, g, b);
      put_pixel(img, size, y, x, r, g, b);
    }
  draw_distractors(img, size, rng, 1 + static_cast<int>(rng.below(3)));
}

void fill_texture(std::vector<float>& img, int size, int label, int num_classes, Rng& rng) {
  // stripes: orientation from the class parity, period from the class index
  const bool vertical = (label % 2) == 1;
  const int period = 2 + (label % num_classes) / 2;
  const int phase = static_cast<int>(rng.below(static_cast<uint64_t>(period * 2)));
  const float hi = static_cast<float>(rng.uniform(0.7, 0.95));
  const float lo = static_cast<float>(rng.uniform(0.05, 0.3));
  const float hue = static_cast<float>(rng.uniform(0.0, 1.0));  // class-irrelevant tint
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int coord = (vertical ? x : y) + phase;
      const bool on = (coord / period) % 2 == 0;
      float r, g, b;
      hsv_to_rgb(hue, 0.25f, on ? hi : lo, r, g, b);
      const float n = static_cast<float>(rng.uniform(-0.03, 0.03));
      put_pixel(img, size, y, x, r + n, g + n, b + n);
    }
}

void fill_layout(std::vector<float>& img, int size, int label, int num_classes, Rng& rng) {
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_classes))));
  const int cell = size / grid;
  const int gy = label / grid, gx = label % grid;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float g = static_cast<float>(rng.uniform(0.05, 0.25));
      put_pixel(img, size, y, x, g, g, g);
    }
  const float cy = (static_cast<float>(gy) + 0.5f) * static_cast<float>(cell) +
                   static_cast<float>(rng.uniform(-0.2, 0.2)) * static_cast<float>(cell);
  const float cx = (static_cast<float>(gx) + 0.5f) * static_cast<float>(cell) +
                   static_cast<float>(rng.uniform(-0.2, 0.2)) * static_cast<float>(cell);
  const float sigma = 0.35f * static_cast<float>(cell);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float dy = (static_cast<float>(y) - cy) / sigma;
      const float dx = (static_cast<float>(x) - cx) / sigma;
      const float a = std::exp(-0.5f * (dy * dy + dx * dx));
      if (a < 0.02f) continue;
      const size_t i = static_cast<size_t>(y * size + x);
      const size_t plane = static_cast<size_t>(size) * size;
      put_pixel(img, size, y, x, img[i] + a, img[plane + i] + a * 0.9f, img[2 * plane + i] + a * 0.7f);
    }
}

}  // namespace

Sample gen_synthetic(const SyntheticSpec& spec, Split split, int64_t index) {
  const int64_t total = split == Split::Train ? spec.train_samples : spec.test_samples;
  require(index >= 0 && index < total, ErrorCode::IndexOutOfRange,
          "sample " + std::to_string(index) + " of " + std::to_string(total));
  Sample s;
  s.label = static_cast<int>(index % spec.num_classes);
  s.domain = static_cast<int>((index / spec.num_classes) % spec.num_domains);
  Rng rng(mix64(mix64(spec.seed, static_cast<uint64_t>(split) + 1),
                static_cast<uint64_t>(index)));
  s.pixels.assign(static_cast<size_t>(3 * spec.image_size * spec.image_size), 0.0f);
  switch (spec.cue) {
    case SyntheticSpec::Cue::GlobalHue:
      fill_global_hue(s.pixels, spec.image_size, s.label, spec.num_classes, s.domain, rng);
      break;
    case SyntheticSpec::Cue::Texture:
      fill_texture(s.pixels, spec.image_size, s.label, spec.num_classes, rng);
      break;
    case SyntheticSpec::Cue::Layout:
      fill_layout(s.pixels, spec.image_size, s.label, spec.num_classes, rng);
      break;
  }
  return s;
}

Dataset make_synthetic(const SyntheticSpec& spec, Split split) {
  Dataset ds;
  ds.image_size = spec.image_size;
  ds.num_classes = spec.num_classes;
  const int64_t total = split == Split::Train ? spec.train_samples : spec.test_samples;
  ds.images.reserve(static_cast<size_t>(total));
  for (int64_t i = 0; i < total; ++i) {
    Sample s = gen_synthetic(spec, split, i);
    ds.images.push_back(std::move(s.pixels));
    ds.labels.push_back(s.label);
    ds.domains.push_back(s.domain);
  }
  return ds;
}

Dataset read_cifar(const std::string& path, CifarVariant variant) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::BadLength, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const size_t record = variant == CifarVariant::Cifar10 ? 3073 : 3074;
  const int num_classes = variant == CifarVariant::Cifar10 ? 10 : 100;
  require(!bytes.empty() && bytes.size() % record == 0, ErrorCode::BadLength,
          path + ": " + std::to_string(bytes.size()) + " bytes is not a multiple of " +
              std::to_string(record));
  Dataset ds;
  ds.image_size = 32;
  ds.num_classes = num_classes;
  const size_t n = bytes.size() / record;
  for (size_t i = 0; i < n; ++i) {
    const uint8_t* rec = bytes.data() + i * record;
    // cifar100 records lead with the coarse label; the fine label is kept
    const int label = variant == CifarVariant::Cifar10 ? rec[0] : rec[1];
    require(label < num_classes, ErrorCode::BadLabel,
            "record " + std::to_string(i) + " label " + std::to_string(label));
    const uint8_t* px = rec + (variant == CifarVariant::Cifar10 ? 1 : 2);
    std::vector<float> img(3072);
    for (size_t j = 0; j < 3072; ++j) img[j] = static_cast<float>(px[j]) / 255.0f;
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
    ds.domains.push_back(0);
  }
  return ds;
}

void export_cifar_layout(const Dataset& ds, const std::string& path) {
  require(ds.num_classes <= 256, ErrorCode::BadLabel, "labels do not fit one byte");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorCode::BadLength, "cannot open " + path + " for writing");
  for (int64_t i = 0; i < ds.size(); ++i) {
    f.put(static_cast<char>(ds.labels[static_cast<size_t>(i)]));
    for (float v : ds.images[static_cast<size_t>(i)]) {
      const int q = static_cast<int>(std::lround(clamp01(v) * 255.0f));
      f.put(static_cast<char>(q));
    }
  }
  require(f.good(), ErrorCode::BadLength, "short write to " + path);
}

int dominant_hue_bin(const std::vector<float>& pixels, int image_size, int bins) {
  const size_t plane = static_cast<size_t>(image_size) * image_size;
  std::vector<double> mass(static_cast<size_t>(bins), 0.0);
  for (size_t i = 0; i < plane; ++i) {
    const float r = pixels[i], g = pixels[plane + i], b = pixels[2 * plane + i];
    const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const float c = mx - mn;
    if (c < 0.05f) continue;  // grayscale pixels carry no hue
    float h;
    if (mx == r)
      h = std::fmod((g - b) / c + 6.0f, 6.0f);
    else if (mx == g)
      h = (b - r) / c + 2.0f;
    else
      h = (r - g) / c + 4.0f;
    h /= 6.0f;
    int bin = static_cast<int>(h * static_cast<float>(bins));
    if (bin >= bins) bin = bins - 1;
    mass[static_cast<size_t>(bin)] += c;  // weight by saturation
  }
  return static_cast<int>(std::max_element(mass.begin(), mass.end()) - mass.begin());
}

std::vector<float> resize_bilinear(const std::vector<float>& src, int src_size, int dst_size) {
  if (src_size == dst_size) return src;
  const size_t sp = static_cast<size_t>(src_size) * src_size;
  const size_t dp = static_cast<size_t>(dst_size) * dst_size;
  std::vector<float> out(3 * dp);
  const float scale = static_cast<float>(src_size) / static_cast<float>(dst_size);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < dst_size; ++y)
      for (int x = 0; x < dst_size; ++x) {
        // align_corners=false sampling
        const float sy = (static_cast<float>(y) + 0.5f) * scale - 0.5f;
        const float sx = (static_cast<float>(x) + 0.5f) * scale - 0.5f;
        const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
        const float fy = sy - static_cast<float>(y0), fx = sx - static_cast<float>(x0);
        auto at = [&](int yy, int xx) {
          yy = std::clamp(yy, 0, src_size - 1);
          xx = std::clamp(xx, 0, src_size - 1);
          return src[static_cast<size_t>(c) * sp + static_cast<size_t>(yy) * src_size + xx];
        };
        const float v = at(y0, x0) * (1 - fy) * (1 - fx) + at(y0, x0 + 1) * (1 - fy) * fx +
                        at(y0 + 1, x0) * fy * (1 - fx) + at(y0 + 1, x0 + 1) * fy * fx;
        out[static_cast<size_t>(c) * dp + static_cast<size_t>(y) * dst_size + x] = v;
      }
  return out;
}

}  // namespace pgn
