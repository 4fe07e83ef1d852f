#ifndef ADVPC_AUTODIFF_HPP
#define ADVPC_AUTODIFF_HPP

#include <functional>
#include <vector>

#include "advpc/tensor.hpp"

namespace advpc {

using NodeId = int;

// Reverse-mode tape. Nodes are appended in forward order, so every operand
// precedes its consumers; the backward sweep simply walks ids in reverse,
// which is a reverse topological order by construction. A tape built with
// recording=false only computes values (cheap forward-only evaluation).
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Differentiable input (gradient accumulates here).
  NodeId leaf(Tensor value);
  // Value that never receives a gradient (weights during attacks, labels...).
  NodeId constant(Tensor value);

  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId reshape(NodeId a, Shape shape);
  NodeId relu(NodeId a);
  // x: [in] (rank 1), w: [out,in], b: [out].
  NodeId dense(NodeId x, NodeId w, NodeId b);
  // x: [IC,H,W], w: [OC,IC,KH,KW], b: [OC]; stride 1, zero padding `pad`.
  NodeId conv2d(NodeId x, NodeId w, NodeId b, int pad);
  // 2x2 window, stride 2, floor on odd extents; ties go to the first
  // element in scan order.
  NodeId max_pool2(NodeId a);
  // Per-channel bilinear interpolation with half-pixel centers; an output
  // size equal to the input size copies values bit-for-bit.
  NodeId bilinear_resize(NodeId a, int out_h, int out_w);
  // Embed [C,H,W] into a zero canvas [C,out_h,out_w] at (top, left).
  NodeId pad2d(NodeId a, int top, int left, int out_h, int out_w);
  // Scalar loss, natural log; label must be in [0, C).
  NodeId softmax_cross_entropy(NodeId logits, int label);

  const Tensor& value(NodeId id) const;
  bool recording() const { return recording_; }

  // Single reverse sweep seeded with d(root)/d(root) = 1. The tape is
  // consumed: a second call throws ContractError.
  void backward(NodeId root);
  bool consumed() const { return consumed_; }

  // After backward: gradient of the root w.r.t. this node's value; a node
  // the root does not depend on yields zeros.
  Tensor grad(NodeId id) const;

 private:
  struct Node {
    Tensor value;
    // Routes the incoming gradient to the node's parents.
    std::function<void(Tape&, const Tensor&)> pull;
    bool needs_grad = false;
  };

  NodeId push(Tensor value, bool needs_grad,
              std::function<void(Tape&, const Tensor&)> pull);
  bool needs(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  void check_id(NodeId id) const;
  void accumulate(NodeId id, const Tensor& g);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool recording_;
  bool consumed_ = false;
};

}  // namespace advpc

#endif  // ADVPC_AUTODIFF_HPP
