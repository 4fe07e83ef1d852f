#include "advpc/model_zoo.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "advpc/errors.hpp"
#include "advpc/rng.hpp"
#include "wire.hpp"

namespace advpc {

namespace {

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void quantize_params(std::vector<Tensor>& params) {
  for (Tensor& p : params)
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = quantize_f32(p[i]);
}

int fan_in_of(const Shape& weight_shape) {
  // Dense weights are [out,in]; conv weights are [OC,IC,KH,KW].
  int fan = 1;
  for (std::size_t i = 1; i < weight_shape.size(); ++i) fan *= weight_shape[i];
  return fan;
}

// One sign-step perturbation against the current weights, used by the
// adversarial training mode. Mirrors the single-step attack arithmetic.
Tensor sign_step_example(const Classifier& model, const Tensor& x, int label,
                         double epsilon) {
  ForwardPass pass = forward_loss(model, x, label);
  const Tensor g = input_gradient(pass);
  return clip_ball(x, add_scaled(x, epsilon, sign(g)), epsilon, 0.0, 1.0);
}

}  // namespace

std::string Checkpoint::reference() const {
  std::ostringstream os;
  os << architecture_name(spec.architecture) << (adversarial ? "-adv" : "") << "#"
     << spec.init_seed;
  return os.str();
}

std::vector<Tensor> init_params(const ModelSpec& spec) {
  const std::vector<Shape> shapes =
      architecture_param_shapes(spec.architecture, spec.input_shape, spec.class_count);
  Rng rng = Rng::derive(spec.init_seed, 0x1717);
  std::vector<Tensor> params;
  params.reserve(shapes.size());
  for (const Shape& s : shapes) {
    Tensor t(s);
    if (s.size() > 1) {
      const double sd = std::sqrt(2.0 / fan_in_of(s));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = sd * rng.next_normal();
    }
    params.push_back(std::move(t));
  }
  quantize_params(params);
  return params;
}

Classifier make_classifier(const Checkpoint& cp) {
  return Classifier(cp.spec.architecture, cp.spec.input_shape, cp.spec.class_count,
                    cp.params, cp.reference());
}

double accuracy(const Model& m, const std::vector<Example>& examples) {
  if (examples.empty()) throw EmptySubsetError("accuracy over an empty set");
  std::size_t hits = 0;
  for (const Example& e : examples)
    if (predict(m, e.image) == e.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

Checkpoint train(const ModelSpec& spec, const Dataset& dataset, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ContractError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ContractError("train: batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0.0)) throw ContractError("train: learning_rate must be >= 0");
  if (cfg.adversarial && !(cfg.adversarial->epsilon > 0.0))
    throw ContractError("train: adversarial epsilon must be > 0");
  if (dataset.examples.size() < 5)
    throw ContractError("train: dataset too small to split");
  if (dataset.image_shape() != spec.input_shape)
    throw ContractError("train: dataset images " + shape_str(dataset.image_shape()) +
                        " do not match the spec input " + shape_str(spec.input_shape));
  for (const Example& e : dataset.examples)
    if (e.label < 0 || e.label >= spec.class_count)
      throw ContractError("train: label outside [0," +
                          std::to_string(spec.class_count) + ")");

  const std::size_t n = dataset.examples.size();
  const std::size_t n_test = n / 5;
  const std::size_t n_train = n - n_test;

  std::vector<Tensor> params = init_params(spec);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with a per-epoch substream keeps runs reproducible.
    Rng shuffle_rng = Rng::derive(cfg.rng_seed, 0x5EED0000ull + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n_train; i > 1; --i) {
      const std::size_t j = shuffle_rng.next_below(static_cast<std::uint32_t>(i));
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t batch_n = stop - start;

      // The crafting view of the model holds the weights as of batch start.
      Classifier snapshot(spec.architecture, spec.input_shape, spec.class_count,
                          params, "train-snapshot");

      std::vector<Tensor> grad_acc;
      grad_acc.reserve(params.size());
      for (const Tensor& p : params) grad_acc.push_back(Tensor(p.shape()));

      for (std::size_t bi = 0; bi < batch_n; ++bi) {
        const Example& e = dataset.examples[order[start + bi]];
        Tensor x = e.image;
        if (cfg.adversarial && bi % 2 == 0)
          x = sign_step_example(snapshot, x, e.label, cfg.adversarial->epsilon);

        Tape tape(true);
        const NodeId xn = tape.constant(x);
        std::vector<NodeId> param_nodes;
        const NodeId logits = snapshot.build_trainable(tape, xn, param_nodes);
        const NodeId loss = tape.softmax_cross_entropy(logits, e.label);
        const double loss_v = tape.value(loss)[0];
        if (!std::isfinite(loss_v))
          throw TrainingError("loss diverged at epoch " + std::to_string(epoch + 1));
        tape.backward(loss);
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
          const Tensor g = tape.grad(param_nodes[pi]);
          for (std::size_t k = 0; k < g.size(); ++k) grad_acc[pi][k] += g[k];
        }
      }

      const double step = cfg.learning_rate / static_cast<double>(batch_n);
      for (std::size_t pi = 0; pi < params.size(); ++pi)
        for (std::size_t k = 0; k < params[pi].size(); ++k)
          params[pi][k] -= step * grad_acc[pi][k];
    }
  }

  quantize_params(params);

  Checkpoint cp;
  cp.spec = spec;
  cp.params = std::move(params);
  cp.epochs = cfg.epochs;
  cp.adversarial = cfg.adversarial.has_value();

  const Classifier model = make_classifier(cp);
  const std::vector<Example> train_split(dataset.examples.begin(),
                                         dataset.examples.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<Example> test_split(dataset.examples.begin() + static_cast<std::ptrdiff_t>(n_train),
                                        dataset.examples.end());
  cp.train_accuracy = accuracy(model, train_split);
  cp.test_accuracy = test_split.empty() ? 0.0 : accuracy(model, test_split);
  return cp;
}

// ---- checkpoint file format -------------------------------------------------

namespace {

std::uint32_t arch_code(Architecture a) {
  switch (a) {
    case Architecture::Mlp2: return 0;
    case Architecture::CnnSmall: return 1;
    case Architecture::CnnWide: return 2;
  }
  throw ContractError("unknown architecture enum value");
}

Architecture arch_from_code(std::uint32_t code, const std::string& path) {
  switch (code) {
    case 0: return Architecture::Mlp2;
    case 1: return Architecture::CnnSmall;
    case 2: return Architecture::CnnWide;
  }
  throw FileFormatError(path + ": unknown architecture code " + std::to_string(code));
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path + ": cannot open for writing");
  os.write("ADVM", 4);
  wire::put_u16(os, 1);
  wire::put_u32(os, arch_code(cp.spec.architecture));
  if (cp.spec.input_shape.size() != 3)
    throw ContractError("save_checkpoint: input shape must be {C,H,W}");
  for (int d : cp.spec.input_shape) wire::put_u32(os, static_cast<std::uint32_t>(d));
  wire::put_u32(os, static_cast<std::uint32_t>(cp.spec.class_count));
  wire::put_u64(os, cp.spec.init_seed);
  wire::put_u32(os, static_cast<std::uint32_t>(cp.epochs));
  wire::put_f64(os, cp.train_accuracy);
  wire::put_f64(os, cp.test_accuracy);
  wire::put_u16(os, cp.adversarial ? 1 : 0);
  wire::put_u32(os, static_cast<std::uint32_t>(cp.params.size()));

  std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
  for (const Tensor& p : cp.params) {
    wire::put_u32(os, static_cast<std::uint32_t>(p.shape().size()));
    for (int d : p.shape()) wire::put_u32(os, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float f = static_cast<float>(p[i]);
      unsigned char bytes[4];
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
      os.write(reinterpret_cast<const char*>(bytes), 4);
      crc = static_cast<std::uint32_t>(
          crc32(crc, reinterpret_cast<const Bytef*>(bytes), 4));
    }
  }
  wire::put_u32(os, crc);
  if (!os) throw IoError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path + ": cannot open");
  char magic[4] = {};
  wire::get_bytes(is, reinterpret_cast<unsigned char*>(magic), 4, path);
  if (std::string(magic, 4) != "ADVM")
    throw BadMagicError(path + ": not a checkpoint file");
  const std::uint16_t version = wire::get_u16(is, path);
  if (version != 1)
    throw VersionMismatchError(path + ": checkpoint version " + std::to_string(version) +
                               ", expected 1");

  Checkpoint cp;
  cp.spec.architecture = arch_from_code(wire::get_u32(is, path), path);
  cp.spec.input_shape.clear();
  for (int i = 0; i < 3; ++i)
    cp.spec.input_shape.push_back(static_cast<int>(wire::get_u32(is, path)));
  cp.spec.class_count = static_cast<int>(wire::get_u32(is, path));
  cp.spec.init_seed = wire::get_u64(is, path);
  cp.epochs = static_cast<int>(wire::get_u32(is, path));
  cp.train_accuracy = wire::get_f64(is, path);
  cp.test_accuracy = wire::get_f64(is, path);
  cp.adversarial = wire::get_u16(is, path) != 0;
  const std::uint32_t tensor_count = wire::get_u32(is, path);

  std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, Z_NULL, 0));
  for (std::uint32_t t = 0; t < tensor_count; ++t) {
    const std::uint32_t rank = wire::get_u32(is, path);
    if (rank == 0 || rank > 8) throw FileFormatError(path + ": bad tensor rank");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = wire::get_u32(is, path);
      if (d == 0 || d > (1u << 24)) throw FileFormatError(path + ": bad tensor extent");
      shape.push_back(static_cast<int>(d));
    }
    Tensor tensor(shape);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      unsigned char bytes[4];
      wire::get_bytes(is, bytes, 4, path);
      crc = static_cast<std::uint32_t>(
          crc32(crc, reinterpret_cast<const Bytef*>(bytes), 4));
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | bytes[b];
      tensor[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    cp.params.push_back(std::move(tensor));
  }
  const std::uint32_t stored_crc = wire::get_u32(is, path);
  if (stored_crc != crc)
    throw ChecksumError(path + ": payload checksum mismatch");

  // Shapes must agree with what the architecture dictates.
  const std::vector<Shape> want =
      architecture_param_shapes(cp.spec.architecture, cp.spec.input_shape, cp.spec.class_count);
  if (want.size() != cp.params.size())
    throw FileFormatError(path + ": parameter count does not match architecture");
  for (std::size_t i = 0; i < want.size(); ++i)
    if (cp.params[i].shape() != want[i])
      throw FileFormatError(path + ": parameter " + std::to_string(i) +
                            " shape does not match architecture");
  return cp;
}

}  // namespace advpc
