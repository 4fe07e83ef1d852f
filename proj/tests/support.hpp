#ifndef ADVPC_TESTS_SUPPORT_HPP
#define ADVPC_TESTS_SUPPORT_HPP

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "advpc/dataset.hpp"
#include "advpc/model.hpp"
#include "advpc/model_zoo.hpp"
#include "advpc/rng.hpp"
#include "advpc/tensor.hpp"

namespace advpc::testing {

// Loss is w.x regardless of the label, so the input gradient is the
// constant vector w: attack steps become exactly predictable by hand.
class LinearLossModel : public Model {
 public:
  explicit LinearLossModel(Tensor w) : w_(std::move(w)) {}

  Shape input_shape() const override { return w_.shape(); }
  int class_count() const override { return 2; }
  const std::string& id() const override { return id_; }

  NodeId build_logits(Tape& tape, NodeId x) const override {
    const int n = static_cast<int>(w_.size());
    std::vector<double> rows(w_.data(), w_.data() + w_.size());
    for (std::size_t i = 0; i < w_.size(); ++i) rows.push_back(-w_[i]);
    const NodeId flat = tape.reshape(x, Shape{n});
    const NodeId w = tape.constant(Tensor(Shape{2, n}, std::move(rows)));
    const NodeId b = tape.constant(Tensor(Shape{2}));
    return tape.dense(flat, w, b);
  }

  NodeId build_loss(Tape& tape, NodeId logits, int) const override {
    // Selects logits[0] = w.x as the loss, so dL/dx == w bit-for-bit.
    const NodeId selector = tape.constant(Tensor(Shape{1, 2}, {1.0, 0.0}));
    const NodeId bias = tape.constant(Tensor(Shape{1}));
    return tape.dense(logits, selector, bias);
  }

 private:
  Tensor w_;
  std::string id_ = "linear-loss";
};

// Logits never depend on the input, so the input gradient is exactly zero:
// the degenerate-gradient paths can be exercised on purpose.
class ConstantLogitsModel : public Model {
 public:
  ConstantLogitsModel(Shape input_shape, Tensor logits)
      : input_shape_(std::move(input_shape)), logits_(std::move(logits)) {}

  Shape input_shape() const override { return input_shape_; }
  int class_count() const override { return static_cast<int>(logits_.size()); }
  const std::string& id() const override { return id_; }
  NodeId build_logits(Tape& tape, NodeId) const override {
    return tape.constant(logits_);
  }

 private:
  Shape input_shape_;
  Tensor logits_;
  std::string id_ = "constant-logits";
};

// Scales another model's loss by a constant; with a power of two the
// gradient direction is preserved exactly, so normalization-based updates
// must not change at all.
class ScaledLossModel : public Model {
 public:
  ScaledLossModel(const Model& inner, double factor)
      : inner_(inner), factor_(factor), id_("scaled:" + inner.id()) {}

  Shape input_shape() const override { return inner_.input_shape(); }
  int class_count() const override { return inner_.class_count(); }
  const std::string& id() const override { return id_; }
  NodeId build_logits(Tape& tape, NodeId x) const override {
    return inner_.build_logits(tape, x);
  }
  NodeId build_loss(Tape& tape, NodeId logits, int label) const override {
    return tape.scale(inner_.build_loss(tape, logits, label), factor_);
  }

 private:
  const Model& inner_;
  double factor_;
  std::string id_;
};

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = 0.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_range(lo, hi);
  return t;
}

// Self-deleting scratch directory for file-format tests.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto tick =
        std::chrono::steady_clock::now().time_since_epoch().count();
    path = std::filesystem::temp_directory_path() /
           ("advpc-test-" + std::to_string(tick) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Shared fixtures, trained once per test process. Sized for speed: the
// corpus is small but large enough for stable accuracy.
const Dataset& unit_corpus();          // 240 synthetic examples
const Checkpoint& unit_checkpoint();   // cnn-small trained on unit_corpus()
const Classifier& unit_model();
const Classifier& unit_mlp();          // mlp-2 twin for transfer/ensemble cases

}  // namespace advpc::testing

#endif  // ADVPC_TESTS_SUPPORT_HPP
