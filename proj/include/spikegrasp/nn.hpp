#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "spikegrasp/tensor.hpp"

namespace spikegrasp::nn {

// Tape-based reverse-mode autodiff over Tensor. Graphs are built eagerly per
// forward pass and released afterwards; parameters are long-lived leaves that
// accumulate gradients across the backward sweep.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor val;
  Tensor grad;  // allocated lazily, same shape as val
  std::vector<Var> parents;
  std::function<void(Node&)> backward;
  bool needs_grad = false;
  int visit_mark = 0;
  std::string name;  // set for parameters

  Tensor& ensure_grad() {
    if (grad.numel() != val.numel()) grad = Tensor(val.shape());
    return grad;
  }
};

Var constant(Tensor t);
Var parameter(Tensor t, std::string name);

// Runs reverse-mode accumulation from a scalar root (shape (1)).
void backward(const Var& root);

// --- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Spiking nonlinearity. Hard mode: Heaviside(v - theta) forward, triangular
// surrogate backward. Relaxed mode: the C1 piecewise-quadratic ramp whose
// exact derivative is that same triangle, so finite differences and the
// analytic gradient agree.
enum class SpikeMode { hard, relaxed };
Var spike(const Var& v, double theta, double gamma, SpikeMode mode);
double spike_forward_scalar(double v, double theta, double gamma,
                            SpikeMode mode);
double spike_surrogate_scalar(double v, double theta, double gamma);

// --- structure -------------------------------------------------------------

Var concat_channels(const std::vector<Var>& parts);         // (C_i,H,W) -> (sum,H,W)
Var slice_channels(const Var& a, int c0, int c1);           // [c0,c1)
Var concat_cols(const Var& a, const Var& b);                // (N,Ca)+(N,Cb)
Var slice_cols(const Var& a, int c0, int c1);               // (N,C) -> (N,c1-c0)
Var stack_rows(const std::vector<Var>& rows);               // N x (C) -> (N,C)
Var bilinear_resize(const Var& a, int out_h, int out_w);    // (C,H,W)
Var avgpool_last(const Var& a);                             // (A,B,D)->(A,B,D/2)

// --- contractions ----------------------------------------------------------

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var linear(const Var& x, const Var& w, const Var& b);  // (N,Ci)x(Co,Ci)->(N,Co)

// All-pairs correlation along rows: out[i,j,k] = sum_c fl[c,i,j]*fr[c,i,k].
Var correlate(const Var& fl, const Var& fr);

// Multi-level linear-interpolated gather along the last volume axis,
// clamped at the borders. idx holds per-pixel fractional positions at level
// 0 scale; level l samples at idx / 2^l with offsets -radius..radius.
Var lookup(const std::vector<Var>& levels, const Var& idx, int radius);

// Rows gathered from a (C,H,W) field at integer pixel coords -> (N,C).
Var gather_pixels(const Var& x, const std::vector<std::pair<int, int>>& yx);

// Column-wise max over rows: (N,C) -> (C); gradient routed to the first
// maximizing row.
Var max_rows(const Var& a);

// --- reductions / losses ----------------------------------------------------

Var sum(const Var& a);
Var mean(const Var& a);
// Mean smooth-L1 over entries where mask != 0; zero when the mask is empty.
Var smooth_l1_masked(const Var& pred, const Tensor& target, const Tensor& mask);
// Mean 2-class cross-entropy on probabilities clamped to [floor, 1-floor].
Var binary_cross_entropy(const Var& prob, const Tensor& target, double floor);

double smooth_l1_scalar(double diff);

// --- parameters ------------------------------------------------------------

struct ParamStore {
  std::vector<Var> params;

  Var add(Tensor t, std::string name) {
    params.push_back(parameter(std::move(t), std::move(name)));
    return params.back();
  }
  void zero_grads() {
    for (auto& p : params) {
      p->ensure_grad().fill(0.0);
    }
  }
  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p->val.numel();
    return n;
  }
};

// Adam with per-epoch multiplicative decay, single-threaded and deterministic.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store, double lr_scale);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace spikegrasp::nn
