#include "spikegrasp/nn.hpp"

#include <algorithm>
#include <cmath>

namespace spikegrasp::nn {

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->needs_grad = false;
  return n;
}

Var parameter(Tensor t, std::string name) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->needs_grad = true;
  n->name = std::move(name);
  n->ensure_grad().fill(0.0);
  return n;
}

static Var make_op(Tensor val, std::vector<Var> parents,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->needs_grad) n->needs_grad = true;
  if (n->needs_grad) n->backward = std::move(backward);
  return n;
}

void backward(const Var& root) {
  require(root->val.numel() == 1, errc::precondition,
          "backward root must be scalar");
  // iterative postorder
  static int epoch = 0;
  ++epoch;
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.push_back({root.get(), 0});
  root->visit_mark = epoch;
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx].get();
      ++idx;
      if (parent->visit_mark != epoch && parent->needs_grad) {
        parent->visit_mark = epoch;
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order)
    if (n != root.get()) n->ensure_grad().fill(0.0);
  root->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

// -------------------------------------------------------------------------
// elementwise
// -------------------------------------------------------------------------

static void check_same(const Var& a, const Var& b, const char* op) {
  require(a->val.same_shape(b->val), errc::shape_mismatch,
          std::string(op) + ": shape mismatch " + a->val.shape_str() + " vs " +
              b->val.shape_str());
}

Var add(const Var& a, const Var& b) {
  check_same(a, b, "add");
  Tensor out(a->val.shape());
  const double* pa = a->val.data();
  const double* pb = b->val.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    const double* g = n.grad.data();
    for (int k = 0; k < 2; ++k) {
      if (!n.parents[k]->needs_grad) continue;
      double* d = n.parents[k]->ensure_grad().data();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same(a, b, "sub");
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = a->val[i] - b->val[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    const double* g = n.grad.data();
    if (n.parents[0]->needs_grad) {
      double* d = n.parents[0]->ensure_grad().data();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += g[i];
    }
    if (n.parents[1]->needs_grad) {
      double* d = n.parents[1]->ensure_grad().data();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same(a, b, "mul");
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = a->val[i] * b->val[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    const double* g = n.grad.data();
    const double* va = n.parents[0]->val.data();
    const double* vb = n.parents[1]->val.data();
    if (n.parents[0]->needs_grad) {
      double* d = n.parents[0]->ensure_grad().data();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += g[i] * vb[i];
    }
    if (n.parents[1]->needs_grad) {
      double* d = n.parents[1]->ensure_grad().data();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += g[i] * va[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] * s;
  return make_op(std::move(out), {a}, [s](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    double* d = n.parents[0]->ensure_grad().data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += g[i] * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] + s;
  return make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    double* d = n.parents[0]->ensure_grad().data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += g[i];
  });
}

Var relu(const Var& a) {
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = a->val[i] > 0.0 ? a->val[i] : 0.0;
  return make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    double* d = n.parents[0]->ensure_grad().data();
    const double* g = n.grad.data();
    const double* v = n.parents[0]->val.data();
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      if (v[i] > 0.0) d[i] += g[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-a->val[i]));
  return make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    double* d = n.parents[0]->ensure_grad().data();
    const double* g = n.grad.data();
    const double* s = n.val.data();
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      d[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Tensor out(a->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = std::min(hi, std::max(lo, a->val[i]));
  return make_op(std::move(out), {a}, [lo, hi](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    double* d = n.parents[0]->ensure_grad().data();
    const double* g = n.grad.data();
    const double* v = n.parents[0]->val.data();
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      if (v[i] > lo && v[i] < hi) d[i] += g[i];
  });
}

double spike_surrogate_scalar(double v, double theta, double gamma) {
  double u = std::fabs(v - theta);
  return u >= gamma ? 0.0 : (gamma - u) / (gamma * gamma);
}

double spike_forward_scalar(double v, double theta, double gamma,
                            SpikeMode mode) {
  if (mode == SpikeMode::hard) return v >= theta ? 1.0 : 0.0;
  double u = v - theta;
  if (u <= -gamma) return 0.0;
  if (u >= gamma) return 1.0;
  if (u <= 0.0) {
    double w = u + gamma;
    return w * w / (2.0 * gamma * gamma);
  }
  double w = gamma - u;
  return 1.0 - w * w / (2.0 * gamma * gamma);
}

Var spike(const Var& v, double theta, double gamma, SpikeMode mode) {
  Tensor out(v->val.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = spike_forward_scalar(v->val[i], theta, gamma, mode);
  return make_op(std::move(out), {v}, [theta, gamma](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    double* d = n.parents[0]->ensure_grad().data();
    const double* g = n.grad.data();
    const double* x = n.parents[0]->val.data();
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      d[i] += g[i] * spike_surrogate_scalar(x[i], theta, gamma);
  });
}

// -------------------------------------------------------------------------
// structure
// -------------------------------------------------------------------------

Var concat_channels(const std::vector<Var>& parts) {
  require(!parts.empty(), errc::precondition, "concat of nothing");
  int h = parts[0]->val.dim(1), w = parts[0]->val.dim(2);
  int c_total = 0;
  for (const auto& p : parts) {
    require(p->val.ndim() == 3 && p->val.dim(1) == h && p->val.dim(2) == w,
            errc::shape_mismatch, "concat: spatial mismatch");
    c_total += p->val.dim(0);
  }
  Tensor out({c_total, h, w});
  std::size_t plane = static_cast<std::size_t>(h) * w;
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::size_t n = p->val.numel();
    std::copy(p->val.data(), p->val.data() + n, out.data() + off);
    off += n;
  }
  return make_op(std::move(out), parts, [plane](Node& n) {
    (void)plane;
    std::size_t off = 0;
    const double* g = n.grad.data();
    for (auto& p : n.parents) {
      std::size_t cnt = p->val.numel();
      if (p->needs_grad) {
        double* d = p->ensure_grad().data();
        for (std::size_t i = 0; i < cnt; ++i) d[i] += g[off + i];
      }
      off += cnt;
    }
  });
}

Var slice_channels(const Var& a, int c0, int c1) {
  require(a->val.ndim() == 3 && c0 >= 0 && c1 <= a->val.dim(0) && c0 < c1,
          errc::shape_mismatch, "slice out of range");
  int h = a->val.dim(1), w = a->val.dim(2);
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({c1 - c0, h, w});
  std::copy(a->val.data() + c0 * plane, a->val.data() + c1 * plane,
            out.data());
  return make_op(std::move(out), {a}, [c0, plane](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    double* d = n.parents[0]->ensure_grad().data() + c0 * plane;
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += g[i];
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require(a->val.ndim() == 2 && b->val.ndim() == 2 &&
              a->val.dim(0) == b->val.dim(0),
          errc::shape_mismatch, "concat_cols: row mismatch");
  int n_rows = a->val.dim(0), ca = a->val.dim(1), cb = b->val.dim(1);
  Tensor out({n_rows, ca + cb});
  for (int i = 0; i < n_rows; ++i) {
    for (int j = 0; j < ca; ++j) out.at2(i, j) = a->val.at2(i, j);
    for (int j = 0; j < cb; ++j) out.at2(i, ca + j) = b->val.at2(i, j);
  }
  return make_op(std::move(out), {a, b}, [ca, cb](Node& n) {
    int rows = n.val.dim(0);
    if (n.parents[0]->needs_grad) {
      Tensor& d = n.parents[0]->ensure_grad();
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < ca; ++j) d.at2(i, j) += n.grad.at2(i, j);
    }
    if (n.parents[1]->needs_grad) {
      Tensor& d = n.parents[1]->ensure_grad();
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cb; ++j) d.at2(i, j) += n.grad.at2(i, ca + j);
    }
  });
}

Var slice_cols(const Var& a, int c0, int c1) {
  require(a->val.ndim() == 2 && c0 >= 0 && c1 <= a->val.dim(1) && c0 < c1,
          errc::shape_mismatch, "slice_cols out of range");
  int n_rows = a->val.dim(0);
  Tensor out({n_rows, c1 - c0});
  for (int i = 0; i < n_rows; ++i)
    for (int j = c0; j < c1; ++j) out.at2(i, j - c0) = a->val.at2(i, j);
  return make_op(std::move(out), {a}, [c0](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& d = n.parents[0]->ensure_grad();
    int rows = n.val.dim(0), cols = n.val.dim(1);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) d.at2(i, c0 + j) += n.grad.at2(i, j);
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  require(!rows.empty(), errc::precondition, "stack of nothing");
  int c = static_cast<int>(rows[0]->val.numel());
  Tensor out({static_cast<int>(rows.size()), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(static_cast<int>(rows[i]->val.numel()) == c, errc::shape_mismatch,
            "stack_rows: length mismatch");
    std::copy(rows[i]->val.data(), rows[i]->val.data() + c,
              out.data() + i * static_cast<std::size_t>(c));
  }
  return make_op(std::move(out), rows, [c](Node& n) {
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      if (!n.parents[i]->needs_grad) continue;
      double* d = n.parents[i]->ensure_grad().data();
      for (int j = 0; j < c; ++j) d[j] += g[i * static_cast<std::size_t>(c) + j];
    }
  });
}

// align-corners-false bilinear sampling grid
static void resize_weights(int in, int out, int i_out, int& i0, int& i1,
                           double& w1) {
  double src = (i_out + 0.5) * (static_cast<double>(in) / out) - 0.5;
  if (src < 0.0) src = 0.0;
  if (src > in - 1.0) src = in - 1.0;
  i0 = static_cast<int>(src);
  if (i0 > in - 2) i0 = in - 2 < 0 ? 0 : in - 2;
  i1 = std::min(i0 + 1, in - 1);
  w1 = src - i0;
}

Var bilinear_resize(const Var& a, int out_h, int out_w) {
  require(a->val.ndim() == 3, errc::shape_mismatch, "resize expects (C,H,W)");
  int c = a->val.dim(0), in_h = a->val.dim(1), in_w = a->val.dim(2);
  if (in_h == out_h && in_w == out_w) return a;
  Tensor out({c, out_h, out_w});
  for (int oy = 0; oy < out_h; ++oy) {
    int y0, y1;
    double wy;
    resize_weights(in_h, out_h, oy, y0, y1, wy);
    for (int ox = 0; ox < out_w; ++ox) {
      int x0, x1;
      double wx;
      resize_weights(in_w, out_w, ox, x0, x1, wx);
      for (int ch = 0; ch < c; ++ch) {
        double v = (1 - wy) * ((1 - wx) * a->val.at3(ch, y0, x0) +
                               wx * a->val.at3(ch, y0, x1)) +
                   wy * ((1 - wx) * a->val.at3(ch, y1, x0) +
                         wx * a->val.at3(ch, y1, x1));
        out.at3(ch, oy, ox) = v;
      }
    }
  }
  return make_op(std::move(out), {a}, [out_h, out_w](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& d = n.parents[0]->ensure_grad();
    int c = d.dim(0), in_h = d.dim(1), in_w = d.dim(2);
    for (int oy = 0; oy < out_h; ++oy) {
      int y0, y1;
      double wy;
      resize_weights(in_h, out_h, oy, y0, y1, wy);
      for (int ox = 0; ox < out_w; ++ox) {
        int x0, x1;
        double wx;
        resize_weights(in_w, out_w, ox, x0, x1, wx);
        for (int ch = 0; ch < c; ++ch) {
          double g = n.grad.at3(ch, oy, ox);
          d.at3(ch, y0, x0) += g * (1 - wy) * (1 - wx);
          d.at3(ch, y0, x1) += g * (1 - wy) * wx;
          d.at3(ch, y1, x0) += g * wy * (1 - wx);
          d.at3(ch, y1, x1) += g * wy * wx;
        }
      }
    }
  });
}

Var avgpool_last(const Var& a) {
  require(a->val.ndim() == 3, errc::shape_mismatch, "pool expects 3D");
  int d0 = a->val.dim(0), d1 = a->val.dim(1), d2 = a->val.dim(2);
  require(d2 % 2 == 0 && d2 >= 2, errc::shape_mismatch,
          "pool needs even last dimension");
  Tensor out({d0, d1, d2 / 2});
  for (int i = 0; i < d0; ++i)
    for (int j = 0; j < d1; ++j)
      for (int k = 0; k < d2 / 2; ++k)
        out.at3(i, j, k) =
            0.5 * (a->val.at3(i, j, 2 * k) + a->val.at3(i, j, 2 * k + 1));
  return make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& d = n.parents[0]->ensure_grad();
    int d0 = n.val.dim(0), d1 = n.val.dim(1), dh = n.val.dim(2);
    for (int i = 0; i < d0; ++i)
      for (int j = 0; j < d1; ++j)
        for (int k = 0; k < dh; ++k) {
          double g = 0.5 * n.grad.at3(i, j, k);
          d.at3(i, j, 2 * k) += g;
          d.at3(i, j, 2 * k + 1) += g;
        }
  });
}

// -------------------------------------------------------------------------
// contractions
// -------------------------------------------------------------------------

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  require(x->val.ndim() == 3 && w->val.ndim() == 4, errc::shape_mismatch,
          "conv2d expects (C,H,W) input and (O,C,kh,kw) weights");
  int ci = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
  int co = w->val.dim(0), kh = w->val.dim(2), kw = w->val.dim(3);
  require(w->val.dim(1) == ci, errc::shape_mismatch,
          "conv2d channel mismatch");
  require(b->val.ndim() == 1 && b->val.dim(0) == co, errc::shape_mismatch,
          "conv2d bias mismatch");
  int oh = (h + 2 * pad - kh) / stride + 1;
  int ow = (wd + 2 * pad - kw) / stride + 1;
  require(oh > 0 && ow > 0, errc::shape_mismatch, "conv2d output is empty");

  Tensor out({co, oh, ow});
  const double* xv = x->val.data();
  const double* wv = w->val.data();
  for (int o = 0; o < co; ++o) {
    double bias = b->val[static_cast<std::size_t>(o)];
    double* op = out.data() + static_cast<std::size_t>(o) * oh * ow;
    for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i)
      op[i] = bias;
    for (int c = 0; c < ci; ++c) {
      const double* xp = xv + static_cast<std::size_t>(c) * h * wd;
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          double weight =
              wv[((static_cast<std::size_t>(o) * ci + c) * kh + ky) * kw + kx];
          if (weight == 0.0) continue;
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const double* xrow = xp + static_cast<std::size_t>(iy) * wd;
            double* orow = op + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              orow[ox] += weight * xrow[ix];
            }
          }
        }
    }
  }

  return make_op(std::move(out), {x, w, b}, [stride, pad](Node& n) {
    const Var& x = n.parents[0];
    const Var& w = n.parents[1];
    const Var& b = n.parents[2];
    int ci = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
    int co = w->val.dim(0), kh = w->val.dim(2), kw = w->val.dim(3);
    int oh = n.val.dim(1), ow = n.val.dim(2);
    const double* g = n.grad.data();
    const double* xv = x->val.data();
    const double* wv = w->val.data();

    if (b->needs_grad) {
      double* db = b->ensure_grad().data();
      for (int o = 0; o < co; ++o) {
        const double* gp = g + static_cast<std::size_t>(o) * oh * ow;
        double s = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i)
          s += gp[i];
        db[o] += s;
      }
    }
    double* dx = x->needs_grad ? x->ensure_grad().data() : nullptr;
    double* dw = w->needs_grad ? w->ensure_grad().data() : nullptr;
    for (int o = 0; o < co; ++o) {
      const double* gp = g + static_cast<std::size_t>(o) * oh * ow;
      for (int c = 0; c < ci; ++c) {
        const double* xp = xv + static_cast<std::size_t>(c) * h * wd;
        double* dxp = dx ? dx + static_cast<std::size_t>(c) * h * wd : nullptr;
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            std::size_t widx =
                ((static_cast<std::size_t>(o) * ci + c) * kh + ky) * kw + kx;
            double weight = wv[widx];
            double wsum = 0.0;
            for (int oy = 0; oy < oh; ++oy) {
              int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= h) continue;
              const double* grow = gp + static_cast<std::size_t>(oy) * ow;
              const double* xrow = xp + static_cast<std::size_t>(iy) * wd;
              double* dxrow =
                  dxp ? dxp + static_cast<std::size_t>(iy) * wd : nullptr;
              for (int ox = 0; ox < ow; ++ox) {
                int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wd) continue;
                double gv = grow[ox];
                if (dxrow) dxrow[ix] += weight * gv;
                wsum += xrow[ix] * gv;
              }
            }
            if (dw) dw[widx] += wsum;
          }
      }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require(x->val.ndim() == 2 && w->val.ndim() == 2, errc::shape_mismatch,
          "linear expects (N,Ci) and (Co,Ci)");
  int n_rows = x->val.dim(0), ci = x->val.dim(1), co = w->val.dim(0);
  require(w->val.dim(1) == ci, errc::shape_mismatch, "linear: Ci mismatch");
  require(b->val.ndim() == 1 && b->val.dim(0) == co, errc::shape_mismatch,
          "linear: bias mismatch");
  Tensor out({n_rows, co});
  for (int i = 0; i < n_rows; ++i)
    for (int o = 0; o < co; ++o) {
      double s = b->val[static_cast<std::size_t>(o)];
      for (int c = 0; c < ci; ++c) s += x->val.at2(i, c) * w->val.at2(o, c);
      out.at2(i, o) = s;
    }
  return make_op(std::move(out), {x, w, b}, [](Node& n) {
    const Var& x = n.parents[0];
    const Var& w = n.parents[1];
    const Var& b = n.parents[2];
    int n_rows = x->val.dim(0), ci = x->val.dim(1), co = w->val.dim(0);
    for (int i = 0; i < n_rows; ++i)
      for (int o = 0; o < co; ++o) {
        double g = n.grad.at2(i, o);
        if (g == 0.0) continue;
        if (x->needs_grad) {
          Tensor& dx = x->ensure_grad();
          for (int c = 0; c < ci; ++c) dx.at2(i, c) += g * w->val.at2(o, c);
        }
        if (w->needs_grad) {
          Tensor& dw = w->ensure_grad();
          for (int c = 0; c < ci; ++c) dw.at2(o, c) += g * x->val.at2(i, c);
        }
        if (b->needs_grad) b->ensure_grad()[static_cast<std::size_t>(o)] += g;
      }
  });
}

Var correlate(const Var& fl, const Var& fr) {
  require(fl->val.ndim() == 3 && fl->val.same_shape(fr->val),
          errc::shape_mismatch, "correlate expects matching (C,H,W)");
  int c = fl->val.dim(0), h = fl->val.dim(1), w = fl->val.dim(2);
  Tensor out({h, w, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < w; ++k) {
        double s = 0.0;
        for (int ch = 0; ch < c; ++ch)
          s += fl->val.at3(ch, i, j) * fr->val.at3(ch, i, k);
        out.at3(i, j, k) = s;
      }
  return make_op(std::move(out), {fl, fr}, [](Node& n) {
    const Var& fl = n.parents[0];
    const Var& fr = n.parents[1];
    int c = fl->val.dim(0), h = fl->val.dim(1), w = fl->val.dim(2);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int k = 0; k < w; ++k) {
          double g = n.grad.at3(i, j, k);
          if (g == 0.0) continue;
          for (int ch = 0; ch < c; ++ch) {
            if (fl->needs_grad)
              fl->ensure_grad().at3(ch, i, j) += g * fr->val.at3(ch, i, k);
            if (fr->needs_grad)
              fr->ensure_grad().at3(ch, i, k) += g * fl->val.at3(ch, i, j);
          }
        }
  });
}

Var lookup(const std::vector<Var>& levels, const Var& idx, int radius) {
  require(!levels.empty(), errc::precondition, "lookup without levels");
  require(radius >= 0, errc::precondition, "radius must be >= 0");
  require(idx->val.ndim() == 2, errc::shape_mismatch, "idx must be (H,W)");
  int h = idx->val.dim(0), w = idx->val.dim(1);
  for (const auto& lv : levels)
    require(lv->val.ndim() == 3 && lv->val.dim(0) == h && lv->val.dim(1) == w,
            errc::shape_mismatch, "lookup level shape mismatch");

  int taps = 2 * radius + 1;
  int n_levels = static_cast<int>(levels.size());
  Tensor out({n_levels * taps, h, w});
  for (int l = 0; l < n_levels; ++l) {
    const Tensor& vol = levels[static_cast<std::size_t>(l)]->val;
    int d = vol.dim(2);
    double inv_scale = 1.0 / static_cast<double>(1 << l);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double pos = idx->val.at2(y, x) * inv_scale;
        for (int o = -radius; o <= radius; ++o) {
          double sp = pos + o;
          double v;
          if (sp <= 0.0)
            v = vol.at3(y, x, 0);
          else if (sp >= d - 1)
            v = vol.at3(y, x, d - 1);
          else {
            int k0 = static_cast<int>(sp);
            double f = sp - k0;
            v = (1 - f) * vol.at3(y, x, k0) + f * vol.at3(y, x, k0 + 1);
          }
          out.at3(l * taps + o + radius, y, x) = v;
        }
      }
  }

  std::vector<Var> parents = levels;
  parents.push_back(idx);
  return make_op(std::move(out), std::move(parents), [radius](Node& n) {
    int n_levels = static_cast<int>(n.parents.size()) - 1;
    const Var& idx = n.parents.back();
    int taps = 2 * radius + 1;
    int h = idx->val.dim(0), w = idx->val.dim(1);
    for (int l = 0; l < n_levels; ++l) {
      Var& lev = n.parents[static_cast<std::size_t>(l)];
      const Tensor& vol = lev->val;
      int d = vol.dim(2);
      double inv_scale = 1.0 / static_cast<double>(1 << l);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double pos = idx->val.at2(y, x) * inv_scale;
          for (int o = -radius; o <= radius; ++o) {
            double g = n.grad.at3(l * taps + o + radius, y, x);
            if (g == 0.0) continue;
            double sp = pos + o;
            if (sp <= 0.0) {
              if (lev->needs_grad) lev->ensure_grad().at3(y, x, 0) += g;
            } else if (sp >= d - 1) {
              if (lev->needs_grad) lev->ensure_grad().at3(y, x, d - 1) += g;
            } else {
              int k0 = static_cast<int>(sp);
              double f = sp - k0;
              if (lev->needs_grad) {
                lev->ensure_grad().at3(y, x, k0) += g * (1 - f);
                lev->ensure_grad().at3(y, x, k0 + 1) += g * f;
              }
              if (idx->needs_grad)
                idx->ensure_grad().at2(y, x) +=
                    g * (vol.at3(y, x, k0 + 1) - vol.at3(y, x, k0)) *
                    inv_scale;
            }
          }
        }
    }
  });
}

Var gather_pixels(const Var& x, const std::vector<std::pair<int, int>>& yx) {
  require(x->val.ndim() == 3, errc::shape_mismatch, "gather expects (C,H,W)");
  int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
  for (auto [y, px] : yx)
    require(y >= 0 && y < h && px >= 0 && px < w, errc::out_of_range,
            "gather pixel out of bounds");
  Tensor out({static_cast<int>(yx.size()), c});
  for (std::size_t i = 0; i < yx.size(); ++i)
    for (int ch = 0; ch < c; ++ch)
      out.at2(static_cast<int>(i), ch) =
          x->val.at3(ch, yx[i].first, yx[i].second);
  auto coords = yx;
  return make_op(std::move(out), {x}, [coords](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& d = n.parents[0]->ensure_grad();
    int c = d.dim(0);
    for (std::size_t i = 0; i < coords.size(); ++i)
      for (int ch = 0; ch < c; ++ch)
        d.at3(ch, coords[i].first, coords[i].second) +=
            n.grad.at2(static_cast<int>(i), ch);
  });
}

Var max_rows(const Var& a) {
  require(a->val.ndim() == 2, errc::shape_mismatch, "max_rows expects (N,C)");
  int n_rows = a->val.dim(0), c = a->val.dim(1);
  Tensor out({c});
  std::vector<int> arg(static_cast<std::size_t>(c), 0);
  for (int j = 0; j < c; ++j) {
    double best = a->val.at2(0, j);
    for (int i = 1; i < n_rows; ++i)
      if (a->val.at2(i, j) > best) {
        best = a->val.at2(i, j);
        arg[static_cast<std::size_t>(j)] = i;
      }
    out[static_cast<std::size_t>(j)] = best;
  }
  return make_op(std::move(out), {a}, [arg](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    Tensor& d = n.parents[0]->ensure_grad();
    int c = n.val.dim(0);
    for (int j = 0; j < c; ++j)
      d.at2(arg[static_cast<std::size_t>(j)], j) +=
          n.grad[static_cast<std::size_t>(j)];
  });
}

// -------------------------------------------------------------------------
// reductions / losses
// -------------------------------------------------------------------------

Var sum(const Var& a) {
  Tensor out({1});
  double s = 0.0;
  for (std::size_t i = 0; i < a->val.numel(); ++i) s += a->val[i];
  out[0] = s;
  return make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->needs_grad) return;
    double g = n.grad[0];
    double* d = n.parents[0]->ensure_grad().data();
    for (std::size_t i = 0; i < n.parents[0]->val.numel(); ++i) d[i] += g;
  });
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a->val.numel()));
}

double smooth_l1_scalar(double diff) {
  double ad = std::fabs(diff);
  return ad < 1.0 ? 0.5 * diff * diff : ad - 0.5;
}

Var smooth_l1_masked(const Var& pred, const Tensor& target,
                     const Tensor& mask) {
  require(pred->val.same_shape(target) && pred->val.same_shape(mask),
          errc::shape_mismatch, "smooth_l1: shape mismatch");
  double count = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < mask.numel(); ++i)
    if (mask[i] != 0.0) {
      count += 1.0;
      total += smooth_l1_scalar(pred->val[i] - target[i]);
    }
  Tensor out({1});
  out[0] = count > 0.0 ? total / count : 0.0;
  Tensor tgt = target;
  Tensor msk = mask;
  return make_op(std::move(out), {pred}, [tgt, msk, count](Node& n) {
    if (!n.parents[0]->needs_grad || count == 0.0) return;
    double g = n.grad[0] / count;
    double* d = n.parents[0]->ensure_grad().data();
    const double* p = n.parents[0]->val.data();
    for (std::size_t i = 0; i < msk.numel(); ++i) {
      if (msk[i] == 0.0) continue;
      double diff = p[i] - tgt[i];
      double slope = diff < -1.0 ? -1.0 : (diff > 1.0 ? 1.0 : diff);
      d[i] += g * slope;
    }
  });
}

Var binary_cross_entropy(const Var& prob, const Tensor& target, double floor) {
  require(prob->val.same_shape(target), errc::shape_mismatch,
          "bce: shape mismatch");
  std::size_t n = prob->val.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p = std::min(1.0 - floor, std::max(floor, prob->val[i]));
    double y = target[i];
    total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  Tensor out({1});
  out[0] = total / static_cast<double>(n);
  Tensor tgt = target;
  return make_op(std::move(out), {prob}, [tgt, floor, n](Node& n_) {
    if (!n_.parents[0]->needs_grad) return;
    double g = n_.grad[0] / static_cast<double>(n);
    double* d = n_.parents[0]->ensure_grad().data();
    const double* pv = n_.parents[0]->val.data();
    for (std::size_t i = 0; i < n; ++i) {
      double p = pv[i];
      if (p <= floor || p >= 1.0 - floor) continue;  // clamped region
      d[i] += g * (-tgt[i] / p + (1.0 - tgt[i]) / (1.0 - p));
    }
  });
}

// -------------------------------------------------------------------------
// optimizer
// -------------------------------------------------------------------------

void AdamOptimizer::step(ParamStore& store, double lr_scale) {
  if (m_.empty()) {
    for (const auto& p : store.params) {
      m_.emplace_back(p->val.shape());
      v_.emplace_back(p->val.shape());
    }
  }
  require(m_.size() == store.params.size(), errc::precondition,
          "optimizer bound to a different parameter set");
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  double lr = lr_ * lr_scale;
  for (std::size_t k = 0; k < store.params.size(); ++k) {
    Var& p = store.params[k];
    const double* g = p->ensure_grad().data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    double* w = p->val.data();
    for (std::size_t i = 0; i < p->val.numel(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace spikegrasp::nn
