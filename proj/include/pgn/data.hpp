#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgn/errors.hpp"
#include "pgn/rng.hpp"

namespace pgn {

// Synthetic image tasks where the class is carried by a global cue while
// local shapes are distractors. The generator is pure: (spec, split, index)
// fully determines a sample, so workers can generate by index range.
//
// global_hue: the background is tinted with a class hue (with jitter well
// below the class spacing); grayscale rectangles and discs are overlaid as
// class-irrelevant distractors. By construction the best classifier reads
// the global tint, so a per-image prompt can summarize it while any fixed
// prompt cannot - that separation is what the input-dependency experiments
// measure.
//
// texture: class selects stripe orientation and period.
// layout: class selects the grid cell holding a bright blob.
struct SyntheticSpec {
  int num_classes = 10;
  int num_domains = 1;
  int train_samples = 5000;
  int test_samples = 1000;
  int image_size = 32;
  uint64_t seed = 0;
  enum class Cue { GlobalHue, Texture, Layout } cue = Cue::GlobalHue;
};

enum class Split { Train = 0, Test = 1 };

struct Sample {
  std::vector<float> pixels;  // 3 * size * size, channel-major, in [0, 1]
  int label = 0;
  int domain = 0;
};

Sample gen_synthetic(const SyntheticSpec& spec, Split split, int64_t index);

struct Dataset {
  int image_size = 0;
  int num_classes = 0;
  std::vector<std::vector<float>> images;
  std::vector<int> labels;
  std::vector<int> domains;

  int64_t size() const { return static_cast<int64_t>(images.size()); }
};

Dataset make_synthetic(const SyntheticSpec& spec, Split split);

enum class CifarVariant { Cifar10, Cifar100 };

// CIFAR binary: 3073-byte records (label + 3072 pixels) for cifar10,
// 3074-byte records (coarse + fine label + 3072 pixels) for cifar100;
// channel-major R,G,B planes, row-major within a plane, scaled by 1/255.
Dataset read_cifar(const std::string& path, CifarVariant variant);

// writes a dataset back out in the cifar10-style record layout (u8 pixels)
void export_cifar_layout(const Dataset& ds, const std::string& path);

// dominant hue bin of an image, used by the token retrieval checks;
// bins split the hue circle evenly
int dominant_hue_bin(const std::vector<float>& pixels, int image_size, int bins);

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

// bilinear resize of a channel-major image (no antialiasing)
std::vector<float> resize_bilinear(const std::vector<float>& src, int src_size, int dst_size);

}  // namespace pgn
