#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snn/config.hpp"
#include "snn/data.hpp"
#include "snn/learning.hpp"
#include "snn/params.hpp"

namespace snn {

// Soft spike value: running integral of the surrogate triangle, zero below
// rest, saturating at gamma_pd above 2*v_th. Its derivative is exactly
// surrogate_grad, which makes the smoothed network differentiable end to end.
double soft_spike(double v, double v_th, double gamma_pd);

// Full record of one smoothed forward pass. Delayed spike-train reads are
// Gaussian-kernel sums; propagation uses the soft spike value; the threshold
// spike and its subtractive reset stay binary (their gradient paths vanish
// almost everywhere, matching the detached-reset convention).
struct Tape {
    int T = 0, n_h = 0, n_in = 0, n_out = 0;
    int in_read_rows = 1, rec_read_rows = 1;
    bool has_kd_in = false, has_kd_rec = false;
    int label = 0;
    double loss = 0.0;

    std::vector<double> read_in;   // [T][in_read_rows][n_in]
    std::vector<double> kd_in;     // same layout, kernel-derivative sums
    std::vector<double> read_rec;  // [T][rec_read_rows][n_h]
    std::vector<double> kd_rec;
    std::vector<double> v;         // [T][n_h]
    std::vector<std::uint8_t> z;   // [T][n_h] binary spikes
    std::vector<double> zeta;      // [T][n_h] soft spike values
    std::vector<double> pd;        // [T][n_h]
    std::vector<double> y;         // [T][n_out]
    std::vector<double> err;       // [T][n_out] softmax - onehot

    const double* read_in_at(int t) const {
        return read_in.data() + static_cast<std::size_t>(t) * in_read_rows * n_in;
    }
    const double* kd_in_at(int t) const {
        return kd_in.data() + static_cast<std::size_t>(t) * in_read_rows * n_in;
    }
    const double* read_rec_at(int t) const {
        return read_rec.data() + static_cast<std::size_t>(t) * rec_read_rows * n_h;
    }
    const double* kd_rec_at(int t) const {
        return kd_rec.data() + static_cast<std::size_t>(t) * rec_read_rows * n_h;
    }
};

Tape smoothed_forward(const DenseSample& sample, const NetworkParams& params,
                      const NetworkConfig& cfg);

// Loss only, plus an optional per-(t,j) region signature of the membrane
// potential against the surrogate kinks {0, v_th, 2*v_th}. Two runs with
// different signatures straddle a non-smooth point.
double smoothed_loss(const DenseSample& sample, const NetworkParams& params,
                     const NetworkConfig& cfg, std::vector<std::uint8_t>* signature = nullptr);

// Exact reverse-mode gradients of the smoothed loss through the unrolled
// computation, with the same reset-detachment convention as the online rules.
ParamGrads bptt_grad(const Tape& tape, const NetworkParams& params, const NetworkConfig& cfg);

// Runs the online eligibility recursions over the tape's reads. On the same
// trajectory this is the quantity the online learner would accumulate.
ParamGrads online_from_tape(const Tape& tape, const NetworkParams& params,
                            const NetworkConfig& cfg, const OnlineOptions& opt);

enum class ParamGroup { WIn, WRec, WOut, DIn, DRec };

std::string to_string(ParamGroup g);

struct ParamSel {
    ParamGroup group;
    int r = 0, c = 0;
};

// Every unmasked learnable parameter of the configuration, in group order.
std::vector<ParamSel> all_learnable_params(const NetworkParams& params, const NetworkConfig& cfg,
                                           const LearnFlags& learn);

struct FiniteDiffResult {
    std::vector<double> grad;            // one entry per selector
    std::vector<std::uint8_t> excluded;  // 1 = perturbations straddled a kink or spike flip
};

// Central differences (L(th+h) - L(th-h)) / 2h of the smoothed loss.
FiniteDiffResult finite_diff_grad(const DenseSample& sample, const NetworkParams& params,
                                  const NetworkConfig& cfg, const std::vector<ParamSel>& sel,
                                  double h);

double grad_entry(const ParamGrads& g, const ParamSel& s);

struct GradReportRow {
    std::string param;
    double online_g = 0.0, oracle_g = 0.0, abs_err = 0.0, rel_err = 0.0;
};

struct GroupStat {
    std::string group;
    double cosine = 0.0, max_rel = 0.0, mean_rel = 0.0;
    int n = 0;
};

struct GradReport {
    std::vector<GroupStat> groups;
    std::vector<GradReportRow> rows;
};

GradReport build_grad_report(const ParamGrads& online, const ParamGrads& oracle,
                             const NetworkParams& params, const NetworkConfig& cfg,
                             const LearnFlags& learn);

void write_grad_report_csv(const GradReport& rep, const std::filesystem::path& path);

// Bernoulli spike frames, deterministic per seed.
DenseSample random_spike_sample(int T, int n_in, double p, int label, std::uint64_t seed);

struct GradcheckOptions {
    int seeds = 20;
    int T = 25;
    double h = 1e-3;
    double spike_prob = 0.25;
    double w_max_rel = 1e-4;      // online vs reverse-mode, weights
    double w_min_cos = 0.9999;
    double d_min_cos = 0.99;      // online vs finite differences, delays
    double d_min_cos_axonal = 0.95;
    double debug_alpha_scale = 1.0;  // test hook, see OnlineOptions
};

struct GradcheckResult {
    bool pass = false;
    double worst_w_rel = 0.0;
    double worst_w_cos = 1.0;
    double worst_d_cos = 1.0;   // only meaningful when delays are learnable
    int excluded_params = 0;    // finite-difference exclusions across all seeds
    GradReport report;          // from the first seed
    std::string detail;
};

// Runs the online-vs-oracle comparison over several random nets and samples.
// Enforces small-net bounds; throws InputError past them.
GradcheckResult run_gradcheck(const NetworkConfig& cfg, const GradcheckOptions& opt);

}  // namespace snn
