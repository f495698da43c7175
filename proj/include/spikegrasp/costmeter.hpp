#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikegrasp/tensor.hpp"

namespace spikegrasp::cost {

// Topology of one spiking convolution layer. Synapse counts are border-aware
// (an input pixel near the edge reaches fewer output positions), so the
// saturated event count equals the synapse count exactly.
struct LayerTopology {
  std::string name;
  int c_in_total = 0;   // all input channels (dense ANN equivalent)
  int c_in_spike = 0;   // spike-carrying input channels (AC-triggering)
  int c_out = 0;
  int kernel = 0;       // stride 1, pad (kernel-1)/2 assumed
  int height = 0, width = 0;
  std::int64_t synapses_total = 0;
  std::int64_t synapses_spike = 0;

  // #output taps a single input pixel feeds, border-aware, times c_out.
  std::int64_t fanout(int y, int x) const;
  void finalize();  // fills the synapse totals from the geometry
};

struct StepRecord {
  int layer = 0;
  int step = 0;
  std::int64_t events = 0;  // nonzero entries in spike-carrying channels
  std::int64_t ac_ops = 0;  // sum of border-aware fan-outs over those events
};

// Optional raw event masks, kept only when a replay oracle needs them.
struct MaskRecord {
  int layer = 0;
  int step = 0;
  nn::Tensor spikes;  // (c_in_spike, H, W)
};

struct CostTrace {
  std::vector<LayerTopology> layers;
  std::vector<StepRecord> steps;
  bool keep_masks = false;
  std::vector<MaskRecord> masks;

  int add_layer(LayerTopology topo) {
    topo.finalize();
    layers.push_back(std::move(topo));
    return static_cast<int>(layers.size()) - 1;
  }
  void record(int layer, int step, const nn::Tensor& spike_channels);
};

struct OpCounts {
  std::int64_t n_ac_snn = 0;
  std::int64_t n_mac_snn = 0;  // ~0 when inputs are binary spike streams
  std::int64_t n_mac_ann = 0;  // dense equivalent: synapses x steps
  std::int64_t dense_ac_bound = 0;
  double spike_activity = 0.0;  // n_ac_snn / dense_ac_bound
};

OpCounts count_ops(const CostTrace& trace);

// Operation-weighted complexity ratio:
//   (n_mac_snn * w_mac + n_ac_snn * w_ac) / (n_mac_ann * w_mac)
double cost_ratio(const OpCounts& counts, double w_mac = 4.6,
                  double w_ac = 0.9);

// CSV trace file: one topology row per layer, one row per layer-step.
void save_trace(const CostTrace& trace, const std::string& path);
CostTrace load_trace(const std::string& path);

// cost.csv: counts, activity, ratio, weights, plus the documented
// discrepancy between the formula and the published table figure.
void write_cost_report(const std::string& path, const OpCounts& counts,
                       double w_mac, double w_ac);

}  // namespace spikegrasp::cost
