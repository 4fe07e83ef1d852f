#ifndef ADVPC_MODEL_HPP
#define ADVPC_MODEL_HPP

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "advpc/autodiff.hpp"

namespace advpc {

// A differentiable image classifier. Implementations build their logits
// graph on a caller-owned tape so gradients can flow to the input.
class Model {
 public:
  virtual ~Model() = default;
  virtual Shape input_shape() const = 0;  // {C,H,W}
  virtual int class_count() const = 0;
  virtual const std::string& id() const = 0;
  virtual NodeId build_logits(Tape& tape, NodeId x) const = 0;
  // Scalar loss from logits; the default is softmax cross-entropy
  // (natural log). Overridable so tests can scale or replace the loss.
  virtual NodeId build_loss(Tape& tape, NodeId logits, int label) const;
};

// One recorded forward pass; feed to input_gradient to get d(loss)/d(x).
struct ForwardPass {
  double loss = 0.0;
  Tensor logits;
  Tape tape{true};
  NodeId x_node = -1;
  NodeId loss_node = -1;
};

ForwardPass forward_loss(const Model& m, const Tensor& x, int label);

// Consumes the pass's tape (a second call on the same pass throws).
Tensor input_gradient(ForwardPass& pass);

// Forward-only helpers (no tape bookkeeping).
double loss_value(const Model& m, const Tensor& x, int label);
Tensor logits_of(const Model& m, const Tensor& x);
// Arg-max with ties resolved to the lowest class index.
int predict(const Model& m, const Tensor& x);
int argmax_lowest(const Tensor& logits);

// Central differences (L(x+h e_i) - L(x-h e_i)) / 2h per coordinate; the
// independent check the reverse-mode gradient is validated against.
Tensor finite_diff_gradient(const Model& m, const Tensor& x, int label, double h);

// ---- fixed architecture set ------------------------------------------------

enum class Architecture { Mlp2, CnnSmall, CnnWide };

Architecture architecture_from_string(const std::string& name);
std::string architecture_name(Architecture arch);

struct DenseDesc { int in = 0, out = 0; };
struct Conv2dDesc { int in_ch = 0, out_ch = 0, k = 0, pad = 0; };
struct ReluDesc {};
struct MaxPool2Desc {};
struct FlattenDesc {};
using LayerDesc = std::variant<DenseDesc, Conv2dDesc, ReluDesc, MaxPool2Desc, FlattenDesc>;

// Layer stack for an architecture given the nominal input shape; dense
// extents are derived from that shape.
std::vector<LayerDesc> architecture_layers(Architecture arch, const Shape& input_shape,
                                           int class_count);
// Parameter tensor shapes in layer order: (w, b) per dense/conv layer.
std::vector<Shape> architecture_param_shapes(Architecture arch, const Shape& input_shape,
                                             int class_count);

// Stack-of-layers classifier over owned weights. Convolutional stacks accept
// any spatial size whose flattened tail matches the trained dense layer
// (28 to 31 px for the stock shapes), which is what resize/pad gradient
// transforms rely on.
class Classifier : public Model {
 public:
  Classifier(Architecture arch, Shape input_shape, int class_count,
             std::vector<Tensor> params, std::string id);

  Shape input_shape() const override { return input_shape_; }
  int class_count() const override { return class_count_; }
  const std::string& id() const override { return id_; }
  NodeId build_logits(Tape& tape, NodeId x) const override;

  // Variant for training: parameters enter the tape as leaves and their
  // node ids are reported so the caller can read their gradients.
  NodeId build_trainable(Tape& tape, NodeId x, std::vector<NodeId>& param_nodes) const;

  Architecture architecture() const { return arch_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor>& mutable_params() { return params_; }

 private:
  NodeId build(Tape& tape, NodeId x, std::vector<NodeId>* param_nodes) const;

  Architecture arch_;
  Shape input_shape_;
  int class_count_;
  std::vector<Tensor> params_;
  std::vector<LayerDesc> layers_;
  std::string id_;
};

// Weighted fusion of member logits: sum_i w_i * logits_i, with the weights
// normalized to sum to 1. Gradients flow through every member.
class EnsembleModel : public Model {
 public:
  EnsembleModel(std::vector<const Model*> members, std::vector<double> weights);

  Shape input_shape() const override;
  int class_count() const override;
  const std::string& id() const override { return id_; }
  NodeId build_logits(Tape& tape, NodeId x) const override;

  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<const Model*> members_;
  std::vector<double> weights_;
  std::string id_;
};

}  // namespace advpc

#endif  // ADVPC_MODEL_HPP
