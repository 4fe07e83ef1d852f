#include "advpc/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "advpc/errors.hpp"

namespace advpc {

NodeId Model::build_loss(Tape& tape, NodeId logits, int label) const {
  return tape.softmax_cross_entropy(logits, label);
}

ForwardPass forward_loss(const Model& m, const Tensor& x, int label) {
  ForwardPass pass;
  pass.x_node = pass.tape.leaf(x);
  const NodeId logits = m.build_logits(pass.tape, pass.x_node);
  pass.logits = pass.tape.value(logits);
  pass.loss_node = m.build_loss(pass.tape, logits, label);
  pass.loss = pass.tape.value(pass.loss_node)[0];
  return pass;
}

Tensor input_gradient(ForwardPass& pass) {
  pass.tape.backward(pass.loss_node);
  return pass.tape.grad(pass.x_node);
}

double loss_value(const Model& m, const Tensor& x, int label) {
  Tape tape(false);
  const NodeId xn = tape.leaf(x);
  const NodeId logits = m.build_logits(tape, xn);
  return tape.value(m.build_loss(tape, logits, label))[0];
}

Tensor logits_of(const Model& m, const Tensor& x) {
  Tape tape(false);
  return tape.value(m.build_logits(tape, tape.leaf(x)));
}

int argmax_lowest(const Tensor& logits) {
  if (logits.empty()) throw ContractError("argmax of an empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best);
}

int predict(const Model& m, const Tensor& x) { return argmax_lowest(logits_of(m, x)); }

Tensor finite_diff_gradient(const Model& m, const Tensor& x, int label, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_gradient: h must be positive");
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    probe[i] = xi + h;
    const double up = loss_value(m, probe, label);
    probe[i] = xi - h;
    const double down = loss_value(m, probe, label);
    probe[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ---- architectures ----------------------------------------------------------

Architecture architecture_from_string(const std::string& name) {
  if (name == "mlp-2") return Architecture::Mlp2;
  if (name == "cnn-small") return Architecture::CnnSmall;
  if (name == "cnn-wide") return Architecture::CnnWide;
  throw ContractError("unknown architecture '" + name +
                      "' (expected mlp-2, cnn-small or cnn-wide)");
}

std::string architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::Mlp2: return "mlp-2";
    case Architecture::CnnSmall: return "cnn-small";
    case Architecture::CnnWide: return "cnn-wide";
  }
  throw ContractError("unknown architecture enum value");
}

std::vector<LayerDesc> architecture_layers(Architecture arch, const Shape& input_shape,
                                           int class_count) {
  if (input_shape.size() != 3)
    throw ContractError("architecture input shape must be {C,H,W}");
  if (class_count < 2) throw ContractError("class_count must be at least 2");
  const int c = input_shape[0], h = input_shape[1], w = input_shape[2];
  const int flat = c * h * w;
  std::vector<LayerDesc> layers;
  switch (arch) {
    case Architecture::Mlp2:
      layers.push_back(FlattenDesc{});
      layers.push_back(DenseDesc{flat, 128});
      layers.push_back(ReluDesc{});
      layers.push_back(DenseDesc{128, class_count});
      break;
    case Architecture::CnnSmall: {
      layers.push_back(Conv2dDesc{c, 8, 3, 1});
      layers.push_back(ReluDesc{});
      layers.push_back(MaxPool2Desc{});
      layers.push_back(Conv2dDesc{8, 16, 3, 1});
      layers.push_back(ReluDesc{});
      layers.push_back(MaxPool2Desc{});
      layers.push_back(FlattenDesc{});
      const int fh = (h / 2) / 2, fw = (w / 2) / 2;
      layers.push_back(DenseDesc{16 * fh * fw, class_count});
      break;
    }
    case Architecture::CnnWide: {
      layers.push_back(Conv2dDesc{c, 16, 5, 2});
      layers.push_back(ReluDesc{});
      layers.push_back(MaxPool2Desc{});
      layers.push_back(Conv2dDesc{16, 24, 3, 1});
      layers.push_back(ReluDesc{});
      layers.push_back(MaxPool2Desc{});
      layers.push_back(FlattenDesc{});
      const int fh = (h / 2) / 2, fw = (w / 2) / 2;
      layers.push_back(DenseDesc{24 * fh * fw, 64});
      layers.push_back(ReluDesc{});
      layers.push_back(DenseDesc{64, class_count});
      break;
    }
  }
  return layers;
}

std::vector<Shape> architecture_param_shapes(Architecture arch, const Shape& input_shape,
                                             int class_count) {
  std::vector<Shape> shapes;
  for (const LayerDesc& layer : architecture_layers(arch, input_shape, class_count)) {
    if (const auto* d = std::get_if<DenseDesc>(&layer)) {
      shapes.push_back(Shape{d->out, d->in});
      shapes.push_back(Shape{d->out});
    } else if (const auto* cv = std::get_if<Conv2dDesc>(&layer)) {
      shapes.push_back(Shape{cv->out_ch, cv->in_ch, cv->k, cv->k});
      shapes.push_back(Shape{cv->out_ch});
    }
  }
  return shapes;
}

// ---- Classifier -------------------------------------------------------------

Classifier::Classifier(Architecture arch, Shape input_shape, int class_count,
                       std::vector<Tensor> params, std::string id)
    : arch_(arch),
      input_shape_(std::move(input_shape)),
      class_count_(class_count),
      params_(std::move(params)),
      layers_(architecture_layers(arch, input_shape_, class_count)),
      id_(std::move(id)) {
  const std::vector<Shape> want = architecture_param_shapes(arch_, input_shape_, class_count_);
  if (want.size() != params_.size())
    throw ContractError("classifier '" + id_ + "': expected " +
                        std::to_string(want.size()) + " parameter tensors, got " +
                        std::to_string(params_.size()));
  for (std::size_t i = 0; i < want.size(); ++i)
    if (params_[i].shape() != want[i])
      throw ContractError("classifier '" + id_ + "': parameter " + std::to_string(i) +
                          " has shape " + shape_str(params_[i].shape()) + ", expected " +
                          shape_str(want[i]));
}

NodeId Classifier::build(Tape& tape, NodeId x, std::vector<NodeId>* param_nodes) const {
  const Tensor& in = tape.value(x);
  if (in.shape().size() != 3 || in.shape()[0] != input_shape_[0])
    throw ContractError("classifier '" + id_ + "': input must be {" +
                        std::to_string(input_shape_[0]) + ",H,W}, got " +
                        shape_str(in.shape()));
  std::size_t pi = 0;
  auto param = [&](std::size_t i) {
    return param_nodes ? (*param_nodes)[i]
                       : tape.constant(params_[i]);
  };
  if (param_nodes) {
    param_nodes->clear();
    for (const Tensor& p : params_) param_nodes->push_back(tape.leaf(p));
  }
  NodeId cur = x;
  for (const LayerDesc& layer : layers_) {
    if (const auto* d = std::get_if<DenseDesc>(&layer)) {
      const NodeId w = param(pi++);
      const NodeId b = param(pi++);
      if (tape.value(cur).shape().size() != 1)
        cur = tape.reshape(cur, Shape{static_cast<int>(tape.value(cur).size())});
      cur = tape.dense(cur, w, b);
      (void)d;
    } else if (const auto* cv = std::get_if<Conv2dDesc>(&layer)) {
      const NodeId w = param(pi++);
      const NodeId b = param(pi++);
      cur = tape.conv2d(cur, w, b, cv->pad);
    } else if (std::holds_alternative<ReluDesc>(layer)) {
      cur = tape.relu(cur);
    } else if (std::holds_alternative<MaxPool2Desc>(layer)) {
      cur = tape.max_pool2(cur);
    } else {
      cur = tape.reshape(cur, Shape{static_cast<int>(tape.value(cur).size())});
    }
  }
  return cur;
}

NodeId Classifier::build_logits(Tape& tape, NodeId x) const {
  return build(tape, x, nullptr);
}

NodeId Classifier::build_trainable(Tape& tape, NodeId x,
                                   std::vector<NodeId>& param_nodes) const {
  return build(tape, x, &param_nodes);
}

// ---- EnsembleModel ----------------------------------------------------------

EnsembleModel::EnsembleModel(std::vector<const Model*> members, std::vector<double> weights)
    : members_(std::move(members)), weights_(std::move(weights)) {
  if (members_.empty()) throw ContractError("ensemble: needs at least one member");
  if (weights_.empty()) weights_.assign(members_.size(), 1.0);
  if (weights_.size() != members_.size())
    throw ContractError("ensemble: weight count does not match member count");
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw ContractError("ensemble: weights must be positive");
    sum += w;
  }
  for (double& w : weights_) w /= sum;
  const Shape shape = members_[0]->input_shape();
  const int classes = members_[0]->class_count();
  std::ostringstream name;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const Model* m = members_[i];
    if (m->input_shape() != shape || m->class_count() != classes)
      throw ContractError("ensemble: member '" + m->id() +
                          "' disagrees on input shape or class count");
    name << (i ? "+" : "") << m->id();
  }
  id_ = name.str();
}

Shape EnsembleModel::input_shape() const { return members_[0]->input_shape(); }

int EnsembleModel::class_count() const { return members_[0]->class_count(); }

NodeId EnsembleModel::build_logits(Tape& tape, NodeId x) const {
  NodeId acc = tape.scale(members_[0]->build_logits(tape, x), weights_[0]);
  for (std::size_t i = 1; i < members_.size(); ++i)
    acc = tape.add(acc, tape.scale(members_[i]->build_logits(tape, x), weights_[i]));
  return acc;
}

}  // namespace advpc
