#pragma once

#include <cstdint>
#include <vector>

#include "snn/config.hpp"
#include "snn/data.hpp"
#include "snn/matrix.hpp"
#include "snn/network.hpp"
#include "snn/params.hpp"

namespace snn {

// Piecewise-linear spike derivative: (gamma/v_th) * max(0, 1 - |(v-v_th)/v_th|).
double surrogate_grad(double v, double v_th, double gamma_pd);

// Gaussian spike kernel exp(-(t-t_k-d)^2 / 2 sigma^2) / (sqrt(2 pi) sigma).
double gauss_kernel(double t, double t_k, double d, double sigma);

// Derivative of gauss_kernel with respect to the delay argument d.
double gauss_kernel_ddelay(double t, double t_k, double d, double sigma);

// Truncation halfwidth of the kernel window, ceil(3 sigma) timesteps.
int kernel_halfwidth(double sigma);

void softmax_into(const double* y, int n, double* out);

// Prediction rule: sum softmax rows over time, take the argmax class.
int argmax_summed_softmax(const std::vector<double>& readout, int T, int n_out);

struct LearnFlags {
    bool weights = true;
    bool delays_in = true;
    bool delays_rec = true;
};

// Accumulated gradients per parameter group; delay grads are param-shaped
// (one shared row in axonal mode).
struct ParamGrads {
    Matrix w_in, w_rec, w_out, d_in, d_rec;

    static ParamGrads like(const NetworkParams& p);
    void zero();
    void add(const ParamGrads& o);
    void scale(double s);
    bool finite() const;
};

// Recursive traces for every learnable parameter of one training stream.
// Zeroed at sequence start; gradient accumulators survive across the batch.
struct EligibilityState {
    Matrix eps_w_in;    // presynaptic trace per read row (1 or n_hidden)
    Matrix filt_w_in;   // kappa-filtered eligibility, always [n_hidden x n_in]
    Matrix eps_d_in;    // [n_hidden x n_in] when input delays are learnable
    Matrix filt_d_in;
    Matrix eps_w_rec, filt_w_rec, eps_d_rec, filt_d_rec;
    std::vector<double> filt_z;  // filtered hidden spike trace for readout weights
    std::vector<double> pd;      // surrogate derivative of the current row
    std::vector<double> l;       // learning signal of the current row
    ParamGrads grads;

    static EligibilityState make(const NetworkParams& p, const NetworkConfig& cfg);
    void reset_traces();
};

// Learning signal at one timestep: out_err = softmax(y) - onehot(label),
// l = b_fb * out_err. Also carries the step's cross-entropy loss.
struct LearningSignal {
    std::vector<double> l;
    std::vector<double> out_err;
    double loss = 0.0;
};

LearningSignal learning_signal(const std::vector<double>& y, int label, const NetworkParams& params);

struct OnlineOptions {
    LearnFlags learn;
    // Test-only: scales the eligibility decay away from alpha so checks can
    // prove they detect a corrupted recursion. Leave at 1.0.
    double debug_alpha_scale = 1.0;
};

// Values consumed by the eligibility recursions at one timestep. Read rows
// collapse to 1 when the read is shared across postsynaptic neurons.
struct StepReads {
    const double* read_in = nullptr;   // [in_rows x n_in] delayed presynaptic values
    int in_rows = 0;
    const double* kd_in = nullptr;     // kernel-derivative sums, same layout
    int kd_in_rows = 0;
    const double* read_rec = nullptr;  // [rec_rows x n_hidden]
    int rec_rows = 0;
    const double* kd_rec = nullptr;
    int kd_rec_rows = 0;
};

// One step of every eligibility recursion plus gradient accumulation:
//   eps <- alpha*eps + direct term, e = pd*eps, F <- kappa*F + e,
//   grad += L * F, with L from the instantaneous learning signal.
// spike_row carries the hidden spike values driving the readout (0/1 in
// binary mode, soft values on an oracle tape).
void elig_step(EligibilityState& es, const StepReads& reads, const double* v_row,
               const double* spike_row, const double* err_row, const NetworkParams& params,
               const NetworkConfig& cfg, const OnlineOptions& opt);

// Kernel-derivative taps per synapse, rebuilt whenever delays change. Tap m
// covers a presynaptic spike m frames before the read position.
struct DelayTaps {
    int rows = 0, cols = 0, stride = 0;
    std::vector<int> m_lo;      // per synapse, first frame offset
    std::vector<int> m_len;
    std::vector<double> taps;   // [rows*cols x stride]

    bool empty() const { return taps.empty(); }
};

// clip_future drops taps that would read frames after the base row (used for
// recurrent reads, where later hidden spikes do not exist yet).
DelayTaps build_delay_taps(const Matrix& d_param, double halfspan, double sigma, bool clip_future);

// Per-batch constants of the binary training path.
struct BatchTables {
    EffectiveDelays eff;
    DelayTaps taps_in, taps_rec;
};

BatchTables build_batch_tables(const NetworkParams& params, const NetworkConfig& cfg,
                               const LearnFlags& learn);

struct SampleResult {
    double loss = 0.0;
    int prediction = -1;
};

// Binary-mode forward pass with online eligibility accumulation into
// es.grads. Traces are reset at entry; gradients only accumulate.
SampleResult online_train_sample(const DenseSample& sample, const NetworkParams& params,
                                 const NetworkConfig& cfg, const OnlineOptions& opt,
                                 const BatchTables& tables, EligibilityState& es);

// Adam moments; unused under plain SGD.
struct OptimizerState {
    Matrix m_w_in, m_w_rec, m_w_out, m_d_in, m_d_rec;
    Matrix v_w_in, v_w_rec, v_w_out, v_d_in, v_d_rec;
    long step_count = 0;

    static OptimizerState like(const NetworkParams& p, OptimizerKind kind);
};

// One optimizer step from accumulated gradients: lr_w on weights, lr_d on
// delays, delays clamped to +-(d_max-1)/2, masked entries untouched, feedback
// refreshed, accumulators zeroed. Throws NumericError on non-finite grads.
void apply_updates(NetworkParams& params, ParamGrads& grads, OptimizerState& opt,
                   const NetworkConfig& cfg, const LearnFlags& flags);

}  // namespace snn
