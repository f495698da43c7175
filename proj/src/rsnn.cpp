#include "spikegrasp/rsnn.hpp"

#include <cmath>

#include "spikegrasp/error.hpp"

namespace spikegrasp::rsnn {

void AlifParams::validate() const {
  require(tau_mem > 0 && tau_mem < 1, errc::precondition,
          "tau_mem must lie in (0,1)");
  require(tau_adapt > 0 && tau_adapt < 1, errc::precondition,
          "tau_adapt must lie in (0,1)");
  require(threshold_base > 0, errc::precondition,
          "threshold_base must be > 0");
  require(beta_adapt >= 0, errc::precondition, "beta_adapt must be >= 0");
  require(gamma > 0, errc::precondition, "gamma must be > 0");
}

NeuronState make_neuron_state(const std::vector<int>& shape) {
  return NeuronState{Tensor(shape), Tensor(shape), Tensor(shape)};
}

NeuronState alif_step(const NeuronState& state, const Tensor& input_current,
                      const AlifParams& params) {
  params.validate();
  require(state.v.same_shape(input_current), errc::shape_mismatch,
          "alif_step: input shape mismatch");
  NeuronState next = state;
  for (std::size_t i = 0; i < input_current.numel(); ++i) {
    double theta_prev =
        params.threshold_base + params.beta_adapt * state.a[i];
    double v = params.tau_mem * state.v[i] + input_current[i] -
               theta_prev * state.spikes[i];
    double a = params.tau_adapt * state.a[i] + state.spikes[i];
    double theta = params.threshold_base + params.beta_adapt * a;
    next.v[i] = v;
    next.a[i] = a;
    next.spikes[i] = v >= theta ? 1.0 : 0.0;
  }
  return next;
}

AlifVarState make_alif_var_state(const std::vector<int>& shape) {
  return AlifVarState{nn::constant(Tensor(shape)), nn::constant(Tensor(shape)),
                      nn::constant(Tensor(shape))};
}

AlifVarState alif_step_var(const AlifVarState& state, const Var& input_current,
                           const AlifParams& params, SpikeMode mode) {
  // theta from the previous step's adaptation drives the soft reset
  Var theta_prev =
      nn::add_scalar(nn::scale(state.a, params.beta_adapt),
                     params.threshold_base);
  Var v = nn::add(nn::scale(state.v, params.tau_mem),
                  nn::sub(input_current, nn::mul(theta_prev, state.s)));
  Var a = nn::add(nn::scale(state.a, params.tau_adapt), state.s);
  // spike test against the refreshed threshold: v - beta * a >= theta0
  Var v_eff = nn::sub(v, nn::scale(a, params.beta_adapt));
  Var s = nn::spike(v_eff, params.threshold_base, params.gamma, mode);
  return AlifVarState{v, a, s};
}

Tensor decode_membrane(const std::vector<Tensor>& spike_train,
                       double tau_out) {
  require(!spike_train.empty(), errc::precondition, "empty spike train");
  require(tau_out > 0 && tau_out < 1, errc::precondition,
          "tau_out must lie in (0,1)");
  Tensor v(spike_train[0].shape());
  for (const auto& s : spike_train) {
    require(s.same_shape(v), errc::shape_mismatch,
            "spike train frames differ in shape");
    for (std::size_t i = 0; i < v.numel(); ++i)
      v[i] = tau_out * v[i] + s[i];
  }
  for (std::size_t i = 0; i < v.numel(); ++i) v[i] = std::max(0.0, v[i]);
  return v;
}

double decode_membrane_scalar(const std::vector<double>& train,
                              double tau_out) {
  double v = 0.0;
  for (double s : train) v = tau_out * v + s;
  return std::max(0.0, v);
}

UpdateModule::UpdateModule(int x_channels_, int hidden_, int out_channels_,
                           const AlifParams& alif_, double tau_out_,
                           std::uint64_t seed, nn::ParamStore& store)
    : x_channels(x_channels_),
      hidden(hidden_),
      out_channels(out_channels_),
      alif(alif_),
      tau_out(tau_out_) {
  alif.validate();
  require(tau_out > 0 && tau_out < 1, errc::precondition,
          "tau_out must lie in (0,1)");
  Rng rng(seed, /*stream=*/0x0a11f);
  conv_in = pathway::Conv2d(x_channels + 2 * hidden, hidden, 3, 1, 1, rng,
                            store, "update.conv_in");
  conv_mid =
      pathway::Conv2d(hidden, hidden, 3, 1, 1, rng, store, "update.conv_mid");
  conv_out =
      pathway::Conv2d(hidden, hidden, 3, 1, 1, rng, store, "update.conv_out");
  conv_dec = pathway::Conv2d(hidden, out_channels, 3, 1, 1, rng, store,
                             "update.conv_dec");
}

TraceBinding bind_trace(const UpdateModule& module, int height, int width,
                        cost::CostTrace& trace) {
  TraceBinding binding;
  for (int s = 0; s < 3; ++s) {
    int h = height >> s, w = width >> s;
    cost::LayerTopology t;
    t.kernel = 3;
    t.height = h;
    t.width = w;

    t.name = "conv_in.s" + std::to_string(s);
    t.c_in_total = module.x_channels + 2 * module.hidden;
    t.c_in_spike = 2 * module.hidden;
    t.c_out = module.hidden;
    binding.conv_in_id[s] = trace.add_layer(t);

    t.name = "conv_mid.s" + std::to_string(s);
    t.c_in_total = module.hidden;
    t.c_in_spike = module.hidden;
    binding.conv_mid_id[s] = trace.add_layer(t);

    t.name = "conv_out.s" + std::to_string(s);
    binding.conv_out_id[s] = trace.add_layer(t);
  }
  cost::LayerTopology t;
  t.name = "conv_dec";
  t.kernel = 3;
  t.height = height;
  t.width = width;
  t.c_in_total = module.hidden;
  t.c_in_spike = module.hidden;
  t.c_out = module.out_channels;
  binding.conv_dec_id = trace.add_layer(t);
  return binding;
}

UpdateResult update_iteration(const Var& h, const Var& corr_feats,
                              const Var& context_feats,
                              const UpdateModule& module, int t_inner,
                              SpikeMode mode, cost::CostTrace* trace,
                              const TraceBinding* binding, int step_offset) {
  require(t_inner >= 1, errc::precondition, "t_inner must be >= 1");
  require(h->val.ndim() == 3, errc::shape_mismatch, "h must be (C,H,W)");
  int height = h->val.dim(1), width = h->val.dim(2);
  require(corr_feats->val.dim(1) == height &&
              corr_feats->val.dim(2) == width &&
              context_feats->val.dim(1) == height &&
              context_feats->val.dim(2) == width,
          errc::shape_mismatch, "update inputs must share resolution");

  Var x0 = nn::concat_channels({h, corr_feats, context_feats});
  require(x0->val.dim(0) == module.x_channels, errc::shape_mismatch,
          "update module built for a different channel count");

  const int n_scales = 3;
  int hs[n_scales], ws[n_scales];
  Var xs[n_scales];
  for (int s = 0; s < n_scales; ++s) {
    hs[s] = height >> s;
    ws[s] = width >> s;
    require(hs[s] >= 1 && ws[s] >= 1, errc::shape_mismatch,
            "field too small for three scales");
    xs[s] = s == 0 ? x0 : nn::bilinear_resize(x0, hs[s], ws[s]);
  }

  AlifVarState layer1[n_scales], layer2[n_scales], layer3[n_scales];
  Var last3[n_scales];
  for (int s = 0; s < n_scales; ++s) {
    std::vector<int> shape{module.hidden, hs[s], ws[s]};
    layer1[s] = make_alif_var_state(shape);
    layer2[s] = make_alif_var_state(shape);
    layer3[s] = make_alif_var_state(shape);
    last3[s] = nn::constant(Tensor(shape));
  }
  AlifVarState out_state =
      make_alif_var_state({module.out_channels, height, width});
  Var v_dec = nn::constant(Tensor({module.out_channels, height, width}));

  double active = 0.0, total = 0.0;
  auto tally = [&](const Var& sp) {
    for (std::size_t i = 0; i < sp->val.numel(); ++i)
      if (sp->val[i] != 0.0) active += 1.0;
    total += static_cast<double>(sp->val.numel());
  };

  for (int t = 0; t < t_inner; ++t) {
    int step = step_offset + t;
    Var cross[n_scales];
    cross[0] = nn::bilinear_resize(last3[1], hs[0], ws[0]);
    cross[1] = nn::scale(
        nn::add(nn::bilinear_resize(last3[0], hs[1], ws[1]),
                nn::bilinear_resize(last3[2], hs[1], ws[1])),
        0.5);
    cross[2] = nn::bilinear_resize(last3[1], hs[2], ws[2]);

    Var new_last3[n_scales];
    for (int s = 0; s < n_scales; ++s) {
      Var spikes_in = nn::concat_channels({last3[s], cross[s]});
      if (trace && binding)
        trace->record(binding->conv_in_id[s], step, spikes_in->val);
      Var in1 = nn::concat_channels({xs[s], spikes_in});
      layer1[s] = alif_step_var(layer1[s], module.conv_in.forward(in1),
                                module.alif, mode);
      tally(layer1[s].s);

      if (trace && binding)
        trace->record(binding->conv_mid_id[s], step, layer1[s].s->val);
      layer2[s] = alif_step_var(layer2[s],
                                module.conv_mid.forward(layer1[s].s),
                                module.alif, mode);
      tally(layer2[s].s);

      if (trace && binding)
        trace->record(binding->conv_out_id[s], step, layer2[s].s->val);
      layer3[s] = alif_step_var(layer3[s],
                                module.conv_out.forward(layer2[s].s),
                                module.alif, mode);
      tally(layer3[s].s);
      new_last3[s] = layer3[s].s;
    }

    if (trace && binding)
      trace->record(binding->conv_dec_id, step, new_last3[0]->val);
    out_state = alif_step_var(out_state,
                              module.conv_dec.forward(new_last3[0]),
                              module.alif, mode);
    tally(out_state.s);
    v_dec = nn::add(nn::scale(v_dec, module.tau_out), out_state.s);

    for (int s = 0; s < n_scales; ++s) last3[s] = new_last3[s];
  }

  Var delta_learned = nn::relu(v_dec);
  Var zero_disparity = nn::constant(Tensor({1, height, width}));
  Var delta = nn::concat_channels({zero_disparity, delta_learned});
  require(delta->val.dim(0) == h->val.dim(0), errc::shape_mismatch,
          "hidden field must hold 1 + out_channels channels");

  UpdateResult result;
  result.delta = delta;
  result.h_next = nn::add(h, delta);
  result.activity = total > 0.0 ? active / total : 0.0;
  return result;
}

}  // namespace spikegrasp::rsnn
