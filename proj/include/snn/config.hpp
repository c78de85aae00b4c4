#pragma once

#include <cstdint>
#include <string>

namespace snn {

enum class DelayMode { None, Axonal, Synaptic };
enum class FeedbackMode { Symmetric, Random };
enum class OptimizerKind { Sgd, Adam };
enum class DelayInit { Uniform, Zero };

std::string to_string(DelayMode m);
std::string to_string(FeedbackMode m);
std::string to_string(OptimizerKind m);
std::string to_string(DelayInit m);

// exp(-dt/tau); membrane and readout leak per timestep.
double decay_factor(double tau_ms, double dt_ms);

// Maps a real delay parameter in [-(d_max-1)/2, +(d_max-1)/2] to the integer
// buffer offset in [0, d_max-1] used by the binary forward pass. Rounding is
// half-away-from-zero. The lower clamp bound means "no delay".
int effective_delay(double d_param, int d_max);

// All scalar hyperparameters of one network.
struct NetworkConfig {
    int n_in = 116;
    int n_hidden = 128;
    int n_out = 20;
    bool recurrent = false;
    DelayMode delay_mode = DelayMode::None;
    bool delays_on_input = true;  // delay placement per connection group
    bool delays_on_recurrent = true;

    double dt_ms = 10.0;
    double tau_m_ms = 20.0;
    double tau_out_ms = 1000.0;  // readout holds state for ~the whole sequence
    double v_th = 1.0;
    double gamma_pd = 0.3;
    double sigma = 2.0;  // spike-kernel width, timesteps
    int d_max = 25;      // odd; parameters live in [-(d_max-1)/2, +(d_max-1)/2]

    double lr_w = 1e-4;
    double lr_d = 1e-2;
    double sparsity = 0.0;  // fraction of connections masked out, [0,1)
    double w_scale = 1.0;   // multiplier on the 1/sqrt(fan_in) init range

    std::uint64_t seed = 1;
    FeedbackMode feedback = FeedbackMode::Symmetric;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    DelayInit delay_init = DelayInit::Uniform;

    double alpha() const { return decay_factor(tau_m_ms, dt_ms); }
    double kappa() const { return decay_factor(tau_out_ms, dt_ms); }
    double delay_halfspan() const { return (d_max - 1) / 2.0; }

    bool input_delays_active() const { return delay_mode != DelayMode::None && delays_on_input; }
    bool recurrent_delays_active() const {
        return recurrent && delay_mode != DelayMode::None && delays_on_recurrent;
    }

    // Throws ConfigError on any invalid field.
    void validate() const;
};

}  // namespace snn
