#pragma once

#include <cstdint>
#include <vector>

#include "snn/config.hpp"
#include "snn/data.hpp"
#include "snn/params.hpp"
#include "snn/state.hpp"

namespace snn {

// Spike raster and readout trajectory of one sample. Row t holds the hidden
// spikes and readout potentials produced after consuming input frame t.
struct ForwardResult {
    int T = 0;
    int n_hidden = 0;
    int n_out = 0;
    std::vector<std::uint8_t> raster;   // [T x n_hidden]
    std::vector<double> readout;        // [T x n_out]

    std::uint8_t spike(int t, int j) const { return raster[static_cast<std::size_t>(t) * n_hidden + j]; }
    double out(int t, int k) const { return readout[static_cast<std::size_t>(t) * n_out + k]; }
    const double* out_row(int t) const { return readout.data() + static_cast<std::size_t>(t) * n_out; }
    const std::uint8_t* raster_row(int t) const { return raster.data() + static_cast<std::size_t>(t) * n_hidden; }
};

// Advance the hidden layer by one frame:
//   v' = alpha*v + sum_i w_in*x[t-eff] (+ sum_k w_rec*z[t-1-eff]) - z*v_th
//   z' = 1 iff v' > v_th (strict)
// The frame is pushed into the input buffer before the delayed reads, so
// offset 0 reads the current frame. The previous z (the spike emitted from the
// previous potential) drives the subtractive reset. Buffers advance by one.
void lif_step(NetworkState& state, const std::uint8_t* x_frame, const NetworkParams& params,
              const NetworkConfig& cfg, const EffectiveDelays& eff);

// Convenience overload that derives the integer delays on the fly.
void lif_step(NetworkState& state, const std::uint8_t* x_frame, const NetworkParams& params,
              const NetworkConfig& cfg);

// y' = kappa*y + w_out*z. Never spikes, never resets.
void readout_step(std::vector<double>& y, const std::uint8_t* z, const NetworkParams& params,
                  const NetworkConfig& cfg);

// Runs the full binary forward pass with zeroed initial state.
ForwardResult forward_sample(const DenseSample& sample, const NetworkParams& params,
                             const NetworkConfig& cfg);

}  // namespace snn
