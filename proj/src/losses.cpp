#include "spikegrasp/losses.hpp"

#include <algorithm>
#include <cmath>

#include "spikegrasp/error.hpp"

namespace spikegrasp::losses {

LossResult multitask_loss(const LossInputs& inputs, double alpha, double beta,
                          double lambda, double ce_floor) {
  Tensor ones_like(inputs.graspness_label.shape());
  ones_like.fill(1.0);

  Var l_obj = nn::binary_cross_entropy(inputs.objectness_prob,
                                       inputs.objectness_label, ce_floor);
  Var l_p = nn::smooth_l1_masked(inputs.graspness, inputs.graspness_label,
                                 inputs.object_mask);
  Var l_v = nn::smooth_l1_masked(inputs.view_scores, inputs.view_label,
                                 inputs.seed_mask);
  Var l_s = nn::smooth_l1_masked(inputs.grasp_scores, inputs.score_label,
                                 inputs.score_mask);
  Var l_w = nn::smooth_l1_masked(inputs.grasp_widths, inputs.width_label,
                                 inputs.width_mask);

  Var total = nn::add(
      l_obj, nn::add(nn::scale(nn::add(l_p, nn::scale(l_v, lambda)), alpha),
                     nn::scale(nn::add(l_s, l_w), beta)));

  LossResult result;
  result.total = total;
  result.breakdown.objectness = l_obj->val[0];
  result.breakdown.pointwise = l_p->val[0];
  result.breakdown.viewwise = l_v->val[0];
  result.breakdown.score = l_s->val[0];
  result.breakdown.width = l_w->val[0];
  result.breakdown.total = total->val[0];
  result.breakdown.alpha = alpha;
  result.breakdown.beta = beta;
  result.breakdown.lambda = lambda;
  return result;
}

GradCheckReport grad_check(nn::ParamStore& params,
                           const std::function<Var()>& loss_fn, double eps,
                           int n_probes, Rng& rng) {
  require(eps >= 1e-6 && eps <= 1e-3, errc::precondition,
          "eps must lie in [1e-6, 1e-3]");
  require(n_probes >= 1, errc::precondition, "need at least one probe");
  require(!params.params.empty(), errc::precondition, "no parameters");

  params.zero_grads();
  Var loss = loss_fn();
  nn::backward(loss);

  GradCheckReport report;
  report.probes = n_probes;
  for (int probe = 0; probe < n_probes; ++probe) {
    std::size_t tensor_idx = rng.uniform_int(
        static_cast<std::uint32_t>(params.params.size()));
    nn::Var& p = params.params[tensor_idx];
    std::size_t elem = rng.uniform_int(
        static_cast<std::uint32_t>(p->val.numel()));

    double analytic = p->ensure_grad()[elem];
    double saved = p->val[elem];
    p->val[elem] = saved + eps;
    double up = loss_fn()->val[0];
    p->val[elem] = saved - eps;
    double down = loss_fn()->val[0];
    p->val[elem] = saved;

    double fd = (up - down) / (2.0 * eps);
    // differences below the central-difference noise floor (the loss is
    // evaluated to ~1e-15 relative, divided by 2*eps) are indistinguishable
    // from zero and do not witness a wrong gradient
    double noise_floor =
        1e-13 * std::max(1.0, std::fabs(loss->val[0])) / (2.0 * eps);
    double diff = std::fabs(analytic - fd);
    double rel =
        diff <= noise_floor
            ? 0.0
            : diff / std::max({std::fabs(analytic), std::fabs(fd), 1e-8});
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  return report;
}

}  // namespace spikegrasp::losses
