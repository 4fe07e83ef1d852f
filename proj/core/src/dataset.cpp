#include "advpc/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "advpc/errors.hpp"
#include "advpc/rng.hpp"
#include "wire.hpp"

namespace advpc {

namespace {

// 7x7 glyph masks, one per class; scaled 3x and jittered onto the canvas.
constexpr int kGlyphDim = 7;
constexpr int kGlyphScale = 3;
constexpr int kCanvas = 28;
constexpr int kClassCount = 10;

const char* const kGlyphs[kClassCount][kGlyphDim] = {
    {"#######", "#     #", "#     #", "#     #", "#     #", "#     #", "#######"},
    {"   #   ", "  ##   ", "   #   ", "   #   ", "   #   ", "   #   ", "  ###  "},
    {"#######", "      #", "      #", "#######", "#      ", "#      ", "#######"},
    {"#######", "      #", "      #", " ######", "      #", "      #", "#######"},
    {"#     #", "#     #", "#     #", "#######", "      #", "      #", "      #"},
    {"#######", "#      ", "#      ", "#######", "      #", "      #", "#######"},
    {"#######", "#      ", "#      ", "#######", "#     #", "#     #", "#######"},
    {"#######", "      #", "     # ", "    #  ", "   #   ", "  #    ", " #     "},
    {"#######", "#     #", "#     #", "#######", "#     #", "#     #", "#######"},
    {"#######", "#     #", "#     #", "#######", "      #", "      #", "#######"},
};

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Shape Dataset::image_shape() const {
  if (examples.empty()) throw ContractError("image_shape of an empty dataset");
  return examples[0].image.shape();
}

Dataset make_synthetic_dataset(int count, std::uint64_t seed) {
  if (count < 1) throw ContractError("make_synthetic_dataset: count must be positive");
  Dataset ds;
  ds.provenance = Provenance::Synthetic;
  ds.class_count = kClassCount;
  ds.examples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
    const int label = i % kClassCount;
    const int top = 3 + static_cast<int>(rng.next_below(5)) - 2;   // [1,5]
    const int left = 3 + static_cast<int>(rng.next_below(5)) - 2;  // [1,5]
    const double fg = rng.next_range(0.7, 1.0);
    Tensor img(Shape{1, kCanvas, kCanvas});
    for (int gy = 0; gy < kGlyphDim; ++gy)
      for (int gx = 0; gx < kGlyphDim; ++gx) {
        if (kGlyphs[label][gy][gx] != '#') continue;
        for (int dy = 0; dy < kGlyphScale; ++dy)
          for (int dx = 0; dx < kGlyphScale; ++dx) {
            const int y = top + gy * kGlyphScale + dy;
            const int x = left + gx * kGlyphScale + dx;
            img[static_cast<std::size_t>(y) * kCanvas + x] = fg;
          }
      }
    for (std::size_t p = 0; p < img.size(); ++p) {
      const double noisy = img[p] + 0.06 * rng.next_normal();
      img[p] = quantize_f32(std::clamp(noisy, 0.0, 1.0));
    }
    ds.examples.push_back(Example{std::move(img), label});
  }
  return ds;
}

Dataset import_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError(images_path + ": cannot open");
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError(labels_path + ": cannot open");

  if (wire::get_u32_be(imgs, images_path) != 0x00000803u)
    throw BadMagicError(images_path + ": not an IDX image file");
  if (wire::get_u32_be(labs, labels_path) != 0x00000801u)
    throw BadMagicError(labels_path + ": not an IDX label file");

  const std::uint32_t n_img = wire::get_u32_be(imgs, images_path);
  const std::uint32_t rows = wire::get_u32_be(imgs, images_path);
  const std::uint32_t cols = wire::get_u32_be(imgs, images_path);
  const std::uint32_t n_lab = wire::get_u32_be(labs, labels_path);
  if (n_img != n_lab)
    throw FileFormatError(images_path + ": image count " + std::to_string(n_img) +
                          " does not match label count " + std::to_string(n_lab));
  if (rows == 0 || cols == 0) throw FileFormatError(images_path + ": zero image extent");

  Dataset ds;
  ds.provenance = Provenance::Imported;
  ds.class_count = kClassCount;
  ds.examples.reserve(n_img);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    wire::get_bytes(imgs, buf.data(), buf.size(), images_path);
    Tensor img(Shape{1, static_cast<int>(rows), static_cast<int>(cols)});
    for (std::size_t p = 0; p < buf.size(); ++p)
      img[p] = static_cast<double>(static_cast<float>(buf[p]) / 255.0f);
    unsigned char lab = 0;
    wire::get_bytes(labs, &lab, 1, labels_path);
    if (lab >= kClassCount)
      throw FileFormatError(labels_path + ": label " + std::to_string(int(lab)) +
                            " outside the 10-class range");
    ds.examples.push_back(Example{std::move(img), static_cast<int>(lab)});
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  if (ds.examples.empty()) throw ContractError("save_dataset: empty dataset");
  const Shape shape = ds.image_shape();
  if (shape.size() != 3) throw ContractError("save_dataset: images must be {C,H,W}");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path + ": cannot open for writing");
  os.write("ADVD", 4);
  wire::put_u16(os, 1);
  wire::put_u32(os, static_cast<std::uint32_t>(ds.examples.size()));
  for (int d : shape) wire::put_u32(os, static_cast<std::uint32_t>(d));
  for (const Example& e : ds.examples) {
    if (e.image.shape() != shape)
      throw ContractError("save_dataset: inconsistent image shapes");
    for (std::size_t p = 0; p < e.image.size(); ++p) {
      const double v = e.image[p];
      if (v < 0.0 || v > 1.0)
        throw ContractError("save_dataset: pixel outside [0,1]");
      wire::put_f32(os, static_cast<float>(v));
    }
  }
  for (const Example& e : ds.examples) {
    if (e.label < 0 || e.label > 0xFFFF)
      throw ContractError("save_dataset: label does not fit u16");
    wire::put_u16(os, static_cast<std::uint16_t>(e.label));
  }
  if (!os) throw IoError(path + ": write failed");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path + ": cannot open");
  char magic[4] = {};
  wire::get_bytes(is, reinterpret_cast<unsigned char*>(magic), 4, path);
  if (std::string(magic, 4) != "ADVD")
    throw BadMagicError(path + ": not a dataset file");
  const std::uint16_t version = wire::get_u16(is, path);
  if (version != 1)
    throw VersionMismatchError(path + ": dataset version " + std::to_string(version) +
                               ", expected 1");
  const std::uint32_t count = wire::get_u32(is, path);
  const int c = static_cast<int>(wire::get_u32(is, path));
  const int h = static_cast<int>(wire::get_u32(is, path));
  const int w = static_cast<int>(wire::get_u32(is, path));
  if (count == 0 || c < 1 || h < 1 || w < 1)
    throw FileFormatError(path + ": bad dataset header");
  const std::size_t pixel_count = static_cast<std::size_t>(c) * h * w;

  Dataset ds;
  ds.provenance = Provenance::Imported;
  ds.class_count = kClassCount;
  ds.examples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor img(Shape{c, h, w});
    for (std::size_t p = 0; p < pixel_count; ++p) {
      const double v = static_cast<double>(wire::get_f32(is, path));
      if (!(v >= 0.0 && v <= 1.0))
        throw FileFormatError(path + ": pixel outside [0,1]");
      img[p] = v;
    }
    ds.examples.push_back(Example{std::move(img), 0});
  }
  for (std::uint32_t i = 0; i < count; ++i)
    ds.examples[i].label = static_cast<int>(wire::get_u16(is, path));
  return ds;
}

}  // namespace advpc
