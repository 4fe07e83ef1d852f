#ifndef ADVPC_DATASET_HPP
#define ADVPC_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "advpc/tensor.hpp"

namespace advpc {

struct Example {
  Tensor image;  // {C,H,W}, pixels in [0,1]
  int label = 0;
};

enum class Provenance { Synthetic, Imported };

struct Dataset {
  std::vector<Example> examples;
  Provenance provenance = Provenance::Synthetic;
  int class_count = 10;

  std::size_t size() const { return examples.size(); }
  Shape image_shape() const;
};

// Deterministic 10-class glyph corpus: 1x28x28 grayscale, jittered placement,
// per-image intensity and pixel noise, labels assigned round-robin so any
// split stays balanced. Pixels are quantized to f32-representable values so
// the file round-trip below is bit-exact.
Dataset make_synthetic_dataset(int count, std::uint64_t seed);

// Classic IDX image/label pair (big-endian headers, u8 pixels scaled to
// [0,1]).
Dataset import_idx(const std::string& images_path, const std::string& labels_path);

// Binary container: magic "ADVD", version u16 = 1, u32 count, u32 C,H,W,
// f32 pixels row-major per example, then u16 labels. Little-endian.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace advpc

#endif  // ADVPC_DATASET_HPP
