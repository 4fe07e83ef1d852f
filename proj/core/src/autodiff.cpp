#include "advpc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "advpc/errors.hpp"

namespace advpc {

namespace {

Tensor with_shape(const Tensor& t, Shape shape) {
  std::vector<double> data(t.data(), t.data() + t.size());
  return Tensor(std::move(shape), std::move(data));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.shape().size() != rank)
    throw ContractError(std::string(op) + ": expected rank " +
                        std::to_string(rank) + ", got shape " + shape_str(t.shape()));
}

}  // namespace

void Tape::check_id(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw ContractError("tape: node id out of range");
}

NodeId Tape::push(Tensor value, bool needs_grad,
                  std::function<void(Tape&, const Tensor&)> pull) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = recording_ && needs_grad;
  if (n.needs_grad) n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value) { return push(std::move(value), true, nullptr); }

NodeId Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

const Tensor& Tape::value(NodeId id) const {
  check_id(id);
  return nodes_[static_cast<std::size_t>(id)].value;
}

void Tape::accumulate(NodeId id, const Tensor& g) {
  Tensor& slot = grads_[static_cast<std::size_t>(id)];
  if (slot.empty()) {
    slot = g;
    return;
  }
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

void Tape::backward(NodeId root) {
  check_id(root);
  if (!recording_)
    throw ContractError("tape: backward on a non-recording tape");
  if (consumed_) throw ContractError("tape: already consumed by a backward pass");
  if (value(root).size() != 1)
    throw ContractError("tape: backward root must be a scalar");
  consumed_ = true;
  grads_.assign(nodes_.size(), Tensor());
  grads_[static_cast<std::size_t>(root)] = Tensor::scalar(1.0);
  for (NodeId id = root; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty() || !n.pull) continue;
    n.pull(*this, g);
  }
}

Tensor Tape::grad(NodeId id) const {
  check_id(id);
  if (!consumed_) throw ContractError("tape: grad queried before backward");
  const Tensor& g = grads_[static_cast<std::size_t>(id)];
  if (!g.empty()) return g;
  return Tensor(value(id).shape());
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb))
    throw ContractError("add: shape mismatch " + shape_str(va.shape()) + " vs " +
                        shape_str(vb.shape()));
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  const bool na = needs(a), nb = needs(b);
  return push(std::move(out), na || nb, [a, b, na, nb](Tape& t, const Tensor& g) {
    if (na) t.accumulate(a, g);
    if (nb) t.accumulate(b, g);
  });
}

NodeId Tape::scale(NodeId a, double c) {
  const Tensor& va = value(a);
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * va[i];
  return push(std::move(out), needs(a), [a, c](Tape& t, const Tensor& g) {
    Tensor ga(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = c * g[i];
    t.accumulate(a, ga);
  });
}

NodeId Tape::reshape(NodeId a, Shape shape) {
  const Tensor& va = value(a);
  if (shape_size(shape) != va.size())
    throw ContractError("reshape: size mismatch for " + shape_str(shape));
  Shape in_shape = va.shape();
  Tensor out = with_shape(va, std::move(shape));
  return push(std::move(out), needs(a), [a, in_shape](Tape& t, const Tensor& g) {
    t.accumulate(a, with_shape(g, in_shape));
  });
}

NodeId Tape::relu(NodeId a) {
  const Tensor& va = value(a);
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] > 0.0 ? va[i] : 0.0;
  return push(std::move(out), needs(a), [a](Tape& t, const Tensor& g) {
    const Tensor& v = t.value(a);
    Tensor ga(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = v[i] > 0.0 ? g[i] : 0.0;
    t.accumulate(a, ga);
  });
}

NodeId Tape::dense(NodeId x, NodeId w, NodeId b) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  const Tensor& vb = value(b);
  require_rank(vx, 1, "dense input");
  require_rank(vw, 2, "dense weight");
  require_rank(vb, 1, "dense bias");
  const int out_n = vw.shape()[0];
  const int in_n = vw.shape()[1];
  if (vx.shape()[0] != in_n)
    throw ContractError("dense: input size " + shape_str(vx.shape()) +
                        " does not match weight " + shape_str(vw.shape()));
  if (vb.shape()[0] != out_n)
    throw ContractError("dense: bias size does not match weight rows");

  Tensor out(Shape{out_n});
  for (int o = 0; o < out_n; ++o) {
    double acc = vb[static_cast<std::size_t>(o)];
    const double* wrow = vw.data() + static_cast<std::size_t>(o) * in_n;
    for (int i = 0; i < in_n; ++i) acc += wrow[i] * vx[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] = acc;
  }
  const bool nx = needs(x), nw = needs(w), nb = needs(b);
  return push(std::move(out), nx || nw || nb,
              [x, w, b, nx, nw, nb, out_n, in_n](Tape& t, const Tensor& g) {
    const Tensor& vx = t.value(x);
    const Tensor& vw = t.value(w);
    if (nx) {
      Tensor gx(vx.shape());
      for (int o = 0; o < out_n; ++o) {
        const double go = g[static_cast<std::size_t>(o)];
        const double* wrow = vw.data() + static_cast<std::size_t>(o) * in_n;
        for (int i = 0; i < in_n; ++i) gx[static_cast<std::size_t>(i)] += go * wrow[i];
      }
      t.accumulate(x, gx);
    }
    if (nw) {
      Tensor gw(vw.shape());
      for (int o = 0; o < out_n; ++o) {
        const double go = g[static_cast<std::size_t>(o)];
        double* grow = gw.data() + static_cast<std::size_t>(o) * in_n;
        for (int i = 0; i < in_n; ++i) grow[i] = go * vx[static_cast<std::size_t>(i)];
      }
      t.accumulate(w, gw);
    }
    if (nb) t.accumulate(b, g);
  });
}

NodeId Tape::conv2d(NodeId x, NodeId w, NodeId b, int pad) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  const Tensor& vb = value(b);
  require_rank(vx, 3, "conv2d input");
  require_rank(vw, 4, "conv2d weight");
  require_rank(vb, 1, "conv2d bias");
  if (pad < 0) throw ContractError("conv2d: negative padding");
  const int ic = vx.shape()[0], h = vx.shape()[1], wd = vx.shape()[2];
  const int oc = vw.shape()[0], kic = vw.shape()[1], kh = vw.shape()[2], kw = vw.shape()[3];
  if (kic != ic)
    throw ContractError("conv2d: channel mismatch " + shape_str(vx.shape()) +
                        " vs " + shape_str(vw.shape()));
  if (vb.shape()[0] != oc) throw ContractError("conv2d: bias size does not match filters");
  const int oh = h + 2 * pad - kh + 1;
  const int ow = wd + 2 * pad - kw + 1;
  if (oh < 1 || ow < 1) throw ContractError("conv2d: kernel larger than padded input");

  Tensor out(Shape{oc, oh, ow});
  const auto xat = [&](int c, int y, int xx) {
    return vx[(static_cast<std::size_t>(c) * h + y) * wd + xx];
  };
  for (int o = 0; o < oc; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = vb[static_cast<std::size_t>(o)];
        for (int c = 0; c < ic; ++c) {
          const double* wbase =
              vw.data() + ((static_cast<std::size_t>(o) * ic + c) * kh) * kw;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox + kx - pad;
              if (ix < 0 || ix >= wd) continue;
              acc += wbase[ky * kw + kx] * xat(c, iy, ix);
            }
          }
        }
        out[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] = acc;
      }
    }
  }
  const bool nx = needs(x), nw = needs(w), nb = needs(b);
  return push(std::move(out), nx || nw || nb,
              [x, w, b, nx, nw, nb, pad, ic, h, wd, oc, kh, kw, oh, ow](
                  Tape& t, const Tensor& g) {
    const Tensor& vx = t.value(x);
    const Tensor& vw = t.value(w);
    Tensor gx = nx ? Tensor(vx.shape()) : Tensor();
    Tensor gw = nw ? Tensor(vw.shape()) : Tensor();
    Tensor gb = nb ? Tensor(Shape{oc}) : Tensor();
    for (int o = 0; o < oc; ++o) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double go = g[(static_cast<std::size_t>(o) * oh + oy) * ow + ox];
          if (nb) gb[static_cast<std::size_t>(o)] += go;
          for (int c = 0; c < ic; ++c) {
            const std::size_t wbase = ((static_cast<std::size_t>(o) * ic + c) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy + ky - pad;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox + kx - pad;
                if (ix < 0 || ix >= wd) continue;
                const std::size_t xi = (static_cast<std::size_t>(c) * h + iy) * wd + ix;
                if (nx) gx[xi] += go * vw[wbase + ky * kw + kx];
                if (nw) gw[wbase + ky * kw + kx] += go * vx[xi];
              }
            }
          }
        }
      }
    }
    if (nx) t.accumulate(x, gx);
    if (nw) t.accumulate(w, gw);
    if (nb) t.accumulate(b, gb);
  });
}

NodeId Tape::max_pool2(NodeId a) {
  const Tensor& va = value(a);
  require_rank(va, 3, "max_pool2 input");
  const int c = va.shape()[0], h = va.shape()[1], w = va.shape()[2];
  const int oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) throw ContractError("max_pool2: input smaller than window");
  Tensor out(Shape{c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const double v =
                va[(static_cast<std::size_t>(ch) * h + 2 * oy + dy) * w + 2 * ox + dx];
            if (v > best) best = v;
          }
        out[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] = best;
      }
    }
  }
  return push(std::move(out), needs(a), [a, c, h, w, oh, ow](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    Tensor ga(va.shape());
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          // First strict maximum in scan order receives the gradient.
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t i =
                  (static_cast<std::size_t>(ch) * h + 2 * oy + dy) * w + 2 * ox + dx;
              if (va[i] > best) {
                best = va[i];
                best_i = i;
              }
            }
          ga[best_i] += g[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox];
        }
      }
    }
    t.accumulate(a, ga);
  });
}

NodeId Tape::bilinear_resize(NodeId a, int out_h, int out_w) {
  const Tensor& va = value(a);
  require_rank(va, 3, "bilinear_resize input");
  if (out_h < 1 || out_w < 1) throw ContractError("bilinear_resize: bad output size");
  const int c = va.shape()[0], h = va.shape()[1], w = va.shape()[2];
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;

  // Half-pixel sample positions; clamped at the borders. fy == fx == 0 picks
  // a single source pixel with no arithmetic, so equal sizes copy exactly.
  struct Taps {
    int y0, y1, x0, x1;
    double fy, fx;
  };
  auto taps_at = [h, w, sy, sx](int oy, int ox) {
    Taps tp{};
    const double py = (oy + 0.5) * sy - 0.5;
    const double px = (ox + 0.5) * sx - 0.5;
    const double fy0 = std::floor(py);
    const double fx0 = std::floor(px);
    tp.fy = py - fy0;
    tp.fx = px - fx0;
    const int y0 = static_cast<int>(fy0);
    const int x0 = static_cast<int>(fx0);
    tp.y0 = std::clamp(y0, 0, h - 1);
    tp.y1 = std::clamp(y0 + 1, 0, h - 1);
    tp.x0 = std::clamp(x0, 0, w - 1);
    tp.x1 = std::clamp(x0 + 1, 0, w - 1);
    return tp;
  };

  Tensor out(Shape{c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch) {
    const double* src = va.data() + static_cast<std::size_t>(ch) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(ch) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const Taps tp = taps_at(oy, ox);
        double v;
        if (tp.fy == 0.0 && tp.fx == 0.0) {
          v = src[tp.y0 * w + tp.x0];
        } else {
          v = 0.0;
          const double w00 = (1.0 - tp.fy) * (1.0 - tp.fx);
          const double w01 = (1.0 - tp.fy) * tp.fx;
          const double w10 = tp.fy * (1.0 - tp.fx);
          const double w11 = tp.fy * tp.fx;
          if (w00 != 0.0) v += w00 * src[tp.y0 * w + tp.x0];
          if (w01 != 0.0) v += w01 * src[tp.y0 * w + tp.x1];
          if (w10 != 0.0) v += w10 * src[tp.y1 * w + tp.x0];
          if (w11 != 0.0) v += w11 * src[tp.y1 * w + tp.x1];
        }
        dst[oy * out_w + ox] = v;
      }
    }
  }
  return push(std::move(out), needs(a),
              [a, c, h, w, out_h, out_w, taps_at](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    Tensor ga(va.shape());
    for (int ch = 0; ch < c; ++ch) {
      double* gsrc = ga.data() + static_cast<std::size_t>(ch) * h * w;
      const double* gdst = g.data() + static_cast<std::size_t>(ch) * out_h * out_w;
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
          const Taps tp = taps_at(oy, ox);
          const double go = gdst[oy * out_w + ox];
          if (tp.fy == 0.0 && tp.fx == 0.0) {
            gsrc[tp.y0 * w + tp.x0] += go;
            continue;
          }
          const double w00 = (1.0 - tp.fy) * (1.0 - tp.fx);
          const double w01 = (1.0 - tp.fy) * tp.fx;
          const double w10 = tp.fy * (1.0 - tp.fx);
          const double w11 = tp.fy * tp.fx;
          if (w00 != 0.0) gsrc[tp.y0 * w + tp.x0] += w00 * go;
          if (w01 != 0.0) gsrc[tp.y0 * w + tp.x1] += w01 * go;
          if (w10 != 0.0) gsrc[tp.y1 * w + tp.x0] += w10 * go;
          if (w11 != 0.0) gsrc[tp.y1 * w + tp.x1] += w11 * go;
        }
      }
    }
    t.accumulate(a, ga);
  });
}

NodeId Tape::pad2d(NodeId a, int top, int left, int out_h, int out_w) {
  const Tensor& va = value(a);
  require_rank(va, 3, "pad2d input");
  const int c = va.shape()[0], h = va.shape()[1], w = va.shape()[2];
  if (top < 0 || left < 0 || top + h > out_h || left + w > out_w)
    throw ContractError("pad2d: content does not fit the canvas");
  Tensor out(Shape{c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch) {
    const double* src = va.data() + static_cast<std::size_t>(ch) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(ch) * out_h * out_w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) dst[(top + y) * out_w + left + x] = src[y * w + x];
  }
  return push(std::move(out), needs(a),
              [a, c, h, w, top, left, out_h, out_w](Tape& t, const Tensor& g) {
    Tensor ga(t.value(a).shape());
    for (int ch = 0; ch < c; ++ch) {
      double* gsrc = ga.data() + static_cast<std::size_t>(ch) * h * w;
      const double* gdst = g.data() + static_cast<std::size_t>(ch) * out_h * out_w;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) gsrc[y * w + x] = gdst[(top + y) * out_w + left + x];
    }
    t.accumulate(a, ga);
  });
}

NodeId Tape::softmax_cross_entropy(NodeId logits, int label) {
  const Tensor& z = value(logits);
  require_rank(z, 1, "softmax_cross_entropy logits");
  const int cc = z.shape()[0];
  if (label < 0 || label >= cc)
    throw ContractError("softmax_cross_entropy: label " + std::to_string(label) +
                        " outside [0," + std::to_string(cc) + ")");
  double m = z[0];
  for (int i = 1; i < cc; ++i) m = std::max(m, z[static_cast<std::size_t>(i)]);
  double sum = 0.0;
  for (int i = 0; i < cc; ++i) sum += std::exp(z[static_cast<std::size_t>(i)] - m);
  const double lse = m + std::log(sum);
  Tensor out = Tensor::scalar(lse - z[static_cast<std::size_t>(label)]);
  return push(std::move(out), needs(logits),
              [logits, label, cc, lse](Tape& t, const Tensor& g) {
    const Tensor& z = t.value(logits);
    const double go = g[0];
    Tensor gz(z.shape());
    for (int i = 0; i < cc; ++i) {
      const double p = std::exp(z[static_cast<std::size_t>(i)] - lse);
      gz[static_cast<std::size_t>(i)] = go * (p - (i == label ? 1.0 : 0.0));
    }
    t.accumulate(logits, gz);
  });
}

}  // namespace advpc
