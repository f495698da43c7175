#pragma once

#include <functional>
#include <vector>

#include "spikegrasp/nn.hpp"
#include "spikegrasp/rng.hpp"

namespace spikegrasp::losses {

using nn::Tensor;
using nn::Var;

struct LossBreakdown {
  double objectness = 0.0;  // L_obj
  double pointwise = 0.0;   // L_p
  double viewwise = 0.0;    // L_v
  double score = 0.0;       // L_s
  double width = 0.0;       // L_w
  double total = 0.0;
  double alpha = 1.0, beta = 1.0, lambda = 1.0;
};

// Predictions enter as graph nodes so the same code path serves evaluation
// and training; labels and masks are plain tensors.
struct LossInputs {
  Var objectness_prob;  // (1,H,W) or (H,W)-shaped probabilities
  Var graspness;        // matching shape
  Var view_scores;      // (S,V) sigmoid scores per seed
  Var grasp_scores;     // (S,A*D)
  Var grasp_widths;     // (S,A*D)

  Tensor objectness_label;  // binary
  Tensor graspness_label;
  Tensor object_mask;       // mask for L_p (object pixels)
  Tensor view_label;        // (S,V)
  Tensor seed_mask;         // (S,V) rows active for seeds on objects
  Tensor score_label;       // (S,A*D)
  Tensor score_mask;        // (S,A*D) rows for seeds on objects
  Tensor width_label;       // (S,A*D)
  Tensor width_mask;        // (S,A*D): positive ground-truth scores
};

struct LossResult {
  Var total;
  LossBreakdown breakdown;
};

//   L = L_obj + alpha * (L_p + lambda * L_v) + beta * (L_s + L_w)
// Cross-entropy for the objectness classification, smooth-L1 for every
// regression term, each restricted to its mask (empty mask -> 0).
LossResult multitask_loss(const LossInputs& inputs, double alpha, double beta,
                          double lambda, double ce_floor);

// Central-difference verification of the analytic gradients of an arbitrary
// scalar graph against its own relaxed forward evaluation.
struct GradCheckReport {
  double max_rel_error = 0.0;
  int probes = 0;
};
GradCheckReport grad_check(nn::ParamStore& params,
                           const std::function<Var()>& loss_fn, double eps,
                           int n_probes, Rng& rng);

}  // namespace spikegrasp::losses
