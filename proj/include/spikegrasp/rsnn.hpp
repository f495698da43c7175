#pragma once

#include <vector>

#include "spikegrasp/costmeter.hpp"
#include "spikegrasp/nn.hpp"
#include "spikegrasp/pathway.hpp"

namespace spikegrasp::rsnn {

using nn::SpikeMode;
using nn::Tensor;
using nn::Var;

struct AlifParams {
  double tau_mem = 0.8;
  double tau_adapt = 0.95;
  double threshold_base = 0.5;
  double beta_adapt = 0.2;
  double gamma = 0.5;  // surrogate half-width

  void validate() const;
};

// Plain per-neuron state for the reference dynamics:
//   theta  = threshold_base + beta * a            (previous step's a)
//   v     <- tau_mem * v + input - theta * s_prev (soft reset)
//   a     <- tau_adapt * a + s_prev
//   spike  = 1  iff  v >= threshold_base + beta * a
struct NeuronState {
  Tensor v, a, spikes;
};

NeuronState make_neuron_state(const std::vector<int>& shape);
NeuronState alif_step(const NeuronState& state, const Tensor& input_current,
                      const AlifParams& params);

// Graph-side twin of the same dynamics.
struct AlifVarState {
  Var v, a, s;
};
AlifVarState make_alif_var_state(const std::vector<int>& shape);
AlifVarState alif_step_var(const AlifVarState& state, const Var& input_current,
                           const AlifParams& params, SpikeMode mode);

// Exponentially decaying membrane readout, computed recurrently:
//   v_T = sum_t tau_out^(T-t) * s_t, rectified.
Tensor decode_membrane(const std::vector<Tensor>& spike_train, double tau_out);
double decode_membrane_scalar(const std::vector<double>& train,
                              double tau_out);

// Three shared-weight spiking conv layers run at 1/4, 1/8 and 1/16 scale
// with bilinear exchange of the last layer's activations between adjacent
// scales, plus a spiking output layer at 1/4 whose decoded membrane is the
// hidden-state increment. Channel 0 of h (the disparity channel) is left
// untouched by the increment.
struct UpdateModule {
  int x_channels = 0;    // concat(h, correlation taps, context)
  int hidden = 0;        // spiking layer width
  int out_channels = 0;  // learned channels of h
  AlifParams alif;
  double tau_out = 0.9;

  pathway::Conv2d conv_in;   // (x + 2*hidden) -> hidden
  pathway::Conv2d conv_mid;  // hidden -> hidden
  pathway::Conv2d conv_out;  // hidden -> hidden
  pathway::Conv2d conv_dec;  // hidden -> out_channels (output spiking layer)

  UpdateModule() = default;
  UpdateModule(int x_channels, int hidden, int out_channels,
               const AlifParams& alif, double tau_out, std::uint64_t seed,
               nn::ParamStore& store);
};

// Trace layer ids for one spatial geometry; built once per pipeline run.
struct TraceBinding {
  int conv_in_id[3] = {-1, -1, -1};
  int conv_mid_id[3] = {-1, -1, -1};
  int conv_out_id[3] = {-1, -1, -1};
  int conv_dec_id = -1;
};
TraceBinding bind_trace(const UpdateModule& module, int height, int width,
                        cost::CostTrace& trace);

struct UpdateResult {
  Var h_next;
  Var delta;          // h_next - h, exactly
  double activity;    // fraction of active neuron-steps in this iteration
};

UpdateResult update_iteration(const Var& h, const Var& corr_feats,
                              const Var& context_feats,
                              const UpdateModule& module, int t_inner,
                              SpikeMode mode,
                              cost::CostTrace* trace = nullptr,
                              const TraceBinding* binding = nullptr,
                              int step_offset = 0);

}  // namespace spikegrasp::rsnn
