#pragma once

#include "snn/config.hpp"
#include "snn/matrix.hpp"

namespace snn {

// Learnable parameters plus fixed connectivity masks. Delay matrices hold the
// real-valued parameters; the binary forward pass rounds them on the fly.
// Synaptic mode stores one row per postsynaptic neuron, axonal mode a single
// shared row.
struct NetworkParams {
    Matrix w_in;   // [n_hidden x n_in]
    Matrix w_rec;  // [n_hidden x n_hidden], empty if not recurrent
    Matrix w_out;  // [n_out x n_hidden]
    Matrix b_fb;   // [n_hidden x n_out], feedback for the learning signal
    Matrix d_in;   // synaptic: [n_hidden x n_in]; axonal: [1 x n_in]; else empty
    Matrix d_rec;  // same convention over presynaptic hidden units
    MaskMatrix mask_in;
    MaskMatrix mask_rec;

    static NetworkParams init(const NetworkConfig& cfg);

    // Delay parameter for synapse (j, i); row collapses in axonal mode.
    double delay_in(int j, int i) const { return d_in(d_in.rows == 1 ? 0 : j, i); }
    double delay_rec(int j, int k) const { return d_rec(d_rec.rows == 1 ? 0 : j, k); }

    bool masked_in(int j, int i) const { return !mask_in.empty() && mask_in(j, i) == 0; }
    bool masked_rec(int j, int k) const { return !mask_rec.empty() && mask_rec(j, k) == 0; }

    // b_fb = w_out^T under symmetric feedback; no-op for random feedback.
    void refresh_feedback(FeedbackMode mode);
};

// Integer buffer offsets for every connection, precomputed once per sample.
struct EffectiveDelays {
    std::vector<int> in;   // same row convention as d_in; empty if no input delays
    std::vector<int> rec;
    int in_rows = 0, in_cols = 0;
    int rec_rows = 0, rec_cols = 0;

    int of_in(int j, int i) const { return in.empty() ? 0 : in[(in_rows == 1 ? 0 : j) * static_cast<std::size_t>(in_cols) + i]; }
    int of_rec(int j, int k) const { return rec.empty() ? 0 : rec[(rec_rows == 1 ? 0 : j) * static_cast<std::size_t>(rec_cols) + k]; }
};

EffectiveDelays build_effective_delays(const NetworkParams& params, const NetworkConfig& cfg);

}  // namespace snn
