#include "snn/params.hpp"

#include <random>

#include "snn/data.hpp"

namespace snn {

namespace {

void fill_uniform(Matrix& m, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& x : m.a) x = dist(rng);
}

void apply_mask(Matrix& m, const MaskMatrix& mask) {
    if (mask.empty() || m.empty()) return;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            if (mask(r, c) == 0) m(r, c) = 0.0;
}

Matrix make_delay_matrix(int rows, int cols, const NetworkConfig& cfg, std::mt19937_64& rng) {
    Matrix d(rows, cols);
    if (cfg.delay_init == DelayInit::Uniform) {
        const double half = cfg.delay_halfspan();
        fill_uniform(d, -half, half, rng);
    }
    return d;
}

}  // namespace

NetworkParams NetworkParams::init(const NetworkConfig& cfg) {
    cfg.validate();
    NetworkParams p;

    std::mt19937_64 rng(cfg.seed);
    const double s_in = cfg.w_scale / std::sqrt(static_cast<double>(cfg.n_in));
    const double s_rec = cfg.w_scale / std::sqrt(static_cast<double>(cfg.n_hidden));
    const double s_out = cfg.w_scale / std::sqrt(static_cast<double>(cfg.n_hidden));

    p.w_in = Matrix(cfg.n_hidden, cfg.n_in);
    fill_uniform(p.w_in, -s_in, s_in, rng);
    if (cfg.recurrent) {
        p.w_rec = Matrix(cfg.n_hidden, cfg.n_hidden);
        fill_uniform(p.w_rec, -s_rec, s_rec, rng);
    }
    p.w_out = Matrix(cfg.n_out, cfg.n_hidden);
    fill_uniform(p.w_out, -s_out, s_out, rng);

    if (cfg.input_delays_active()) {
        const int rows = cfg.delay_mode == DelayMode::Synaptic ? cfg.n_hidden : 1;
        p.d_in = make_delay_matrix(rows, cfg.n_in, cfg, rng);
    }
    if (cfg.recurrent_delays_active()) {
        const int rows = cfg.delay_mode == DelayMode::Synaptic ? cfg.n_hidden : 1;
        p.d_rec = make_delay_matrix(rows, cfg.n_hidden, cfg, rng);
    }

    if (cfg.sparsity > 0.0) {
        const double density = 1.0 - cfg.sparsity;
        p.mask_in = gen_sparsity_mask(cfg.n_hidden, cfg.n_in, density, cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
        apply_mask(p.w_in, p.mask_in);
        if (p.d_in.rows == cfg.n_hidden) apply_mask(p.d_in, p.mask_in);
        if (cfg.recurrent) {
            p.mask_rec = gen_sparsity_mask(cfg.n_hidden, cfg.n_hidden, density,
                                           cfg.seed * 0x9e3779b97f4a7c15ULL + 2);
            apply_mask(p.w_rec, p.mask_rec);
            if (p.d_rec.rows == cfg.n_hidden) apply_mask(p.d_rec, p.mask_rec);
        }
    }

    if (cfg.feedback == FeedbackMode::Random) {
        p.b_fb = Matrix(cfg.n_hidden, cfg.n_out);
        fill_uniform(p.b_fb, -s_out, s_out, rng);
    } else {
        p.b_fb = Matrix(cfg.n_hidden, cfg.n_out);
        p.refresh_feedback(FeedbackMode::Symmetric);
    }
    return p;
}

void NetworkParams::refresh_feedback(FeedbackMode mode) {
    if (mode != FeedbackMode::Symmetric) return;
    if (b_fb.rows != w_out.cols || b_fb.cols != w_out.rows) b_fb = Matrix(w_out.cols, w_out.rows);
    for (int k = 0; k < w_out.rows; ++k)
        for (int j = 0; j < w_out.cols; ++j) b_fb(j, k) = w_out(k, j);
}

EffectiveDelays build_effective_delays(const NetworkParams& params, const NetworkConfig& cfg) {
    EffectiveDelays e;
    if (!params.d_in.empty()) {
        e.in_rows = params.d_in.rows;
        e.in_cols = params.d_in.cols;
        e.in.resize(params.d_in.size());
        for (std::size_t i = 0; i < params.d_in.size(); ++i)
            e.in[i] = effective_delay(params.d_in.a[i], cfg.d_max);
    }
    if (!params.d_rec.empty()) {
        e.rec_rows = params.d_rec.rows;
        e.rec_cols = params.d_rec.cols;
        e.rec.resize(params.d_rec.size());
        for (std::size_t i = 0; i < params.d_rec.size(); ++i)
            e.rec[i] = effective_delay(params.d_rec.a[i], cfg.d_max);
    }
    return e;
}

}  // namespace snn
