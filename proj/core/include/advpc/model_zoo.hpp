#ifndef ADVPC_MODEL_ZOO_HPP
#define ADVPC_MODEL_ZOO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advpc/dataset.hpp"
#include "advpc/model.hpp"

namespace advpc {

struct ModelSpec {
  Architecture architecture = Architecture::CnnSmall;
  Shape input_shape{1, 28, 28};
  int class_count = 10;
  std::uint64_t init_seed = 1;
};

struct AdversarialTraining {
  double epsilon = 0.1;  // budget of the on-the-fly perturbations
};

struct TrainConfig {
  int epochs = 5;
  int batch_size = 32;
  // Zero is allowed and leaves the weights at their initialization.
  double learning_rate = 0.1;
  std::uint64_t rng_seed = 1;
  // When set, half of every batch is replaced by single-step sign
  // perturbations crafted against the current weights.
  std::optional<AdversarialTraining> adversarial;
};

struct Checkpoint {
  ModelSpec spec;
  std::vector<Tensor> params;
  int epochs = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool adversarial = false;

  // "cnn-small#1", with "-adv" spliced in for robust twins.
  std::string reference() const;
};

// He-normal weights / zero biases, f32-quantized so a save/load round-trip
// is bit-exact from the very first step.
std::vector<Tensor> init_params(const ModelSpec& spec);

// Deterministic single-threaded SGD: the same spec + dataset + config always
// produce a bit-identical checkpoint. The last 20% of the dataset is the
// held-out split used for test accuracy.
Checkpoint train(const ModelSpec& spec, const Dataset& dataset, const TrainConfig& cfg);

Classifier make_classifier(const Checkpoint& cp);

// Binary container: magic "ADVM", version u16 = 1, serialized spec and
// metadata, per-tensor (u32 rank, u32 extents..., f32 payload), then a CRC32
// of all payload bytes. Little-endian throughout.
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

double accuracy(const Model& m, const std::vector<Example>& examples);

}  // namespace advpc

#endif  // ADVPC_MODEL_ZOO_HPP
