#include "snn/learning.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "snn/errors.hpp"
#include "snn/state.hpp"

namespace snn {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}

double surrogate_grad(double v, double v_th, double gamma_pd) {
    const double u = 1.0 - std::abs((v - v_th) / v_th);
    return u > 0.0 ? gamma_pd / v_th * u : 0.0;
}

double gauss_kernel(double t, double t_k, double d, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("gauss_kernel requires sigma > 0");
    const double u = t - t_k - d;
    return kInvSqrt2Pi / sigma * std::exp(-u * u / (2.0 * sigma * sigma));
}

double gauss_kernel_ddelay(double t, double t_k, double d, double sigma) {
    const double u = t - t_k - d;
    return u * kInvSqrt2Pi / (sigma * sigma * sigma) * std::exp(-u * u / (2.0 * sigma * sigma));
}

int kernel_halfwidth(double sigma) { return static_cast<int>(std::ceil(3.0 * sigma)); }

void softmax_into(const double* y, int n, double* out) {
    double m = y[0];
    for (int k = 1; k < n; ++k) m = std::max(m, y[k]);
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        out[k] = std::exp(y[k] - m);
        sum += out[k];
    }
    for (int k = 0; k < n; ++k) out[k] /= sum;
}

int argmax_summed_softmax(const std::vector<double>& readout, int T, int n_out) {
    std::vector<double> acc(n_out, 0.0);
    std::vector<double> probs(n_out);
    for (int t = 0; t < T; ++t) {
        softmax_into(readout.data() + static_cast<std::size_t>(t) * n_out, n_out, probs.data());
        for (int k = 0; k < n_out; ++k) acc[k] += probs[k];
    }
    int best = 0;
    for (int k = 1; k < n_out; ++k)
        if (acc[k] > acc[best]) best = k;
    return best;
}

ParamGrads ParamGrads::like(const NetworkParams& p) {
    ParamGrads g;
    g.w_in = Matrix(p.w_in.rows, p.w_in.cols);
    if (!p.w_rec.empty()) g.w_rec = Matrix(p.w_rec.rows, p.w_rec.cols);
    g.w_out = Matrix(p.w_out.rows, p.w_out.cols);
    if (!p.d_in.empty()) g.d_in = Matrix(p.d_in.rows, p.d_in.cols);
    if (!p.d_rec.empty()) g.d_rec = Matrix(p.d_rec.rows, p.d_rec.cols);
    return g;
}

void ParamGrads::zero() {
    w_in.zero();
    w_rec.zero();
    w_out.zero();
    d_in.zero();
    d_rec.zero();
}

void ParamGrads::add(const ParamGrads& o) {
    auto acc = [](Matrix& a, const Matrix& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a.a[i] += b.a[i];
    };
    acc(w_in, o.w_in);
    acc(w_rec, o.w_rec);
    acc(w_out, o.w_out);
    acc(d_in, o.d_in);
    acc(d_rec, o.d_rec);
}

void ParamGrads::scale(double s) {
    auto mul = [s](Matrix& a) {
        for (auto& x : a.a) x *= s;
    };
    mul(w_in);
    mul(w_rec);
    mul(w_out);
    mul(d_in);
    mul(d_rec);
}

bool ParamGrads::finite() const {
    auto ok = [](const Matrix& m) {
        for (double x : m.a)
            if (!std::isfinite(x)) return false;
        return true;
    };
    return ok(w_in) && ok(w_rec) && ok(w_out) && ok(d_in) && ok(d_rec);
}

EligibilityState EligibilityState::make(const NetworkParams& p, const NetworkConfig& cfg) {
    EligibilityState es;
    const bool syn = cfg.delay_mode == DelayMode::Synaptic;
    const int in_read_rows = cfg.input_delays_active() && syn ? cfg.n_hidden : 1;
    es.eps_w_in = Matrix(in_read_rows, cfg.n_in);
    es.filt_w_in = Matrix(cfg.n_hidden, cfg.n_in);
    if (cfg.input_delays_active()) {
        es.eps_d_in = Matrix(cfg.n_hidden, cfg.n_in);
        es.filt_d_in = Matrix(cfg.n_hidden, cfg.n_in);
    }
    if (cfg.recurrent) {
        const int rec_read_rows = cfg.recurrent_delays_active() && syn ? cfg.n_hidden : 1;
        es.eps_w_rec = Matrix(rec_read_rows, cfg.n_hidden);
        es.filt_w_rec = Matrix(cfg.n_hidden, cfg.n_hidden);
        if (cfg.recurrent_delays_active()) {
            es.eps_d_rec = Matrix(cfg.n_hidden, cfg.n_hidden);
            es.filt_d_rec = Matrix(cfg.n_hidden, cfg.n_hidden);
        }
    }
    es.filt_z.assign(cfg.n_hidden, 0.0);
    es.pd.assign(cfg.n_hidden, 0.0);
    es.l.assign(cfg.n_hidden, 0.0);
    es.grads = ParamGrads::like(p);
    return es;
}

void EligibilityState::reset_traces() {
    eps_w_in.zero();
    filt_w_in.zero();
    eps_d_in.zero();
    filt_d_in.zero();
    eps_w_rec.zero();
    filt_w_rec.zero();
    eps_d_rec.zero();
    filt_d_rec.zero();
    std::fill(filt_z.begin(), filt_z.end(), 0.0);
    std::fill(pd.begin(), pd.end(), 0.0);
    std::fill(l.begin(), l.end(), 0.0);
}

LearningSignal learning_signal(const std::vector<double>& y, int label, const NetworkParams& params) {
    const int n_out = static_cast<int>(y.size());
    if (label < 0 || label >= n_out) {
        std::ostringstream os;
        os << "label " << label << " outside [0," << n_out << ")";
        throw InputError(os.str());
    }
    LearningSignal sig;
    sig.out_err.resize(n_out);
    softmax_into(y.data(), n_out, sig.out_err.data());
    sig.loss = -std::log(std::max(sig.out_err[label], 1e-300));
    sig.out_err[label] -= 1.0;
    const int n_h = params.b_fb.rows;
    sig.l.assign(n_h, 0.0);
    for (int j = 0; j < n_h; ++j) {
        const double* brow = params.b_fb.row(j);
        double s = 0.0;
        for (int k = 0; k < n_out; ++k) s += brow[k] * sig.out_err[k];
        sig.l[j] = s;
    }
    return sig;
}

void elig_step(EligibilityState& es, const StepReads& r, const double* v_row,
               const double* spike_row, const double* err_row, const NetworkParams& params,
               const NetworkConfig& cfg, const OnlineOptions& opt) {
    const int n_h = cfg.n_hidden;
    const int n_in = cfg.n_in;
    const int n_out = cfg.n_out;
    const double alpha = cfg.alpha() * opt.debug_alpha_scale;
    const double kappa = cfg.kappa();

    for (int j = 0; j < n_h; ++j) es.pd[j] = surrogate_grad(v_row[j], cfg.v_th, cfg.gamma_pd);
    for (int j = 0; j < n_h; ++j) {
        const double* brow = params.b_fb.row(j);
        double s = 0.0;
        for (int k = 0; k < n_out; ++k) s += brow[k] * err_row[k];
        es.l[j] = s;
    }

    const bool dense_in = params.mask_in.empty();
    const bool dense_rec = params.mask_rec.empty();

    if (opt.learn.weights) {
        for (int j = 0; j < n_h; ++j) es.filt_z[j] = kappa * es.filt_z[j] + spike_row[j];
        for (int k = 0; k < n_out; ++k) {
            double* g = es.grads.w_out.row(k);
            const double ek = err_row[k];
            for (int j = 0; j < n_h; ++j) g[j] += ek * es.filt_z[j];
        }

        for (int rr = 0; rr < es.eps_w_in.rows; ++rr) {
            double* eps = es.eps_w_in.row(rr);
            const double* rd = r.read_in + static_cast<std::size_t>(r.in_rows == 1 ? 0 : rr) * n_in;
            for (int i = 0; i < n_in; ++i) eps[i] = alpha * eps[i] + rd[i];
        }
        for (int j = 0; j < n_h; ++j) {
            const double pdj = es.pd[j];
            const double lj = es.l[j];
            const double* eps = es.eps_w_in.row(es.eps_w_in.rows == 1 ? 0 : j);
            double* filt = es.filt_w_in.row(j);
            double* g = es.grads.w_in.row(j);
            for (int i = 0; i < n_in; ++i) {
                if (!dense_in && params.mask_in(j, i) == 0) continue;
                filt[i] = kappa * filt[i] + pdj * eps[i];
                g[i] += lj * filt[i];
            }
        }

        if (cfg.recurrent && r.read_rec) {
            for (int rr = 0; rr < es.eps_w_rec.rows; ++rr) {
                double* eps = es.eps_w_rec.row(rr);
                const double* rd =
                    r.read_rec + static_cast<std::size_t>(r.rec_rows == 1 ? 0 : rr) * n_h;
                for (int k = 0; k < n_h; ++k) eps[k] = alpha * eps[k] + rd[k];
            }
            for (int j = 0; j < n_h; ++j) {
                const double pdj = es.pd[j];
                const double lj = es.l[j];
                const double* eps = es.eps_w_rec.row(es.eps_w_rec.rows == 1 ? 0 : j);
                double* filt = es.filt_w_rec.row(j);
                double* g = es.grads.w_rec.row(j);
                for (int k = 0; k < n_h; ++k) {
                    if (!dense_rec && params.mask_rec(j, k) == 0) continue;
                    filt[k] = kappa * filt[k] + pdj * eps[k];
                    g[k] += lj * filt[k];
                }
            }
        }
    }

    if (opt.learn.delays_in && r.kd_in && !es.eps_d_in.empty()) {
        const bool axonal = es.grads.d_in.rows == 1;
        for (int j = 0; j < n_h; ++j) {
            const double pdj = es.pd[j];
            const double lj = es.l[j];
            const double* wrow = params.w_in.row(j);
            const double* kd = r.kd_in + static_cast<std::size_t>(r.kd_in_rows == 1 ? 0 : j) * n_in;
            double* epsd = es.eps_d_in.row(j);
            double* filtd = es.filt_d_in.row(j);
            double* gd = es.grads.d_in.row(axonal ? 0 : j);
            for (int i = 0; i < n_in; ++i) {
                if (!dense_in && params.mask_in(j, i) == 0) continue;
                epsd[i] = alpha * epsd[i] + wrow[i] * kd[i];
                filtd[i] = kappa * filtd[i] + pdj * epsd[i];
                gd[i] += lj * filtd[i];
            }
        }
    }

    if (opt.learn.delays_rec && r.kd_rec && !es.eps_d_rec.empty()) {
        const bool axonal = es.grads.d_rec.rows == 1;
        for (int j = 0; j < n_h; ++j) {
            const double pdj = es.pd[j];
            const double lj = es.l[j];
            const double* wrow = params.w_rec.row(j);
            const double* kd = r.kd_rec + static_cast<std::size_t>(r.kd_rec_rows == 1 ? 0 : j) * n_h;
            double* epsd = es.eps_d_rec.row(j);
            double* filtd = es.filt_d_rec.row(j);
            double* gd = es.grads.d_rec.row(axonal ? 0 : j);
            for (int k = 0; k < n_h; ++k) {
                if (!dense_rec && params.mask_rec(j, k) == 0) continue;
                epsd[k] = alpha * epsd[k] + wrow[k] * kd[k];
                filtd[k] = kappa * filtd[k] + pdj * epsd[k];
                gd[k] += lj * filtd[k];
            }
        }
    }
}

DelayTaps build_delay_taps(const Matrix& d_param, double halfspan, double sigma, bool clip_future) {
    DelayTaps dt;
    if (d_param.empty()) return dt;
    const int W = kernel_halfwidth(sigma);
    dt.rows = d_param.rows;
    dt.cols = d_param.cols;
    dt.stride = 2 * W + 2;
    dt.m_lo.assign(d_param.size(), 0);
    dt.m_len.assign(d_param.size(), 0);
    dt.taps.assign(d_param.size() * dt.stride, 0.0);
    for (std::size_t idx = 0; idx < d_param.size(); ++idx) {
        const double shift = d_param.a[idx] + halfspan;
        int lo = static_cast<int>(std::ceil(shift - W));
        const int hi = static_cast<int>(std::floor(shift + W));
        if (clip_future && lo < 0) lo = 0;
        dt.m_lo[idx] = lo;
        dt.m_len[idx] = hi >= lo ? hi - lo + 1 : 0;
        for (int m = lo; m <= hi; ++m)
            dt.taps[idx * dt.stride + (m - lo)] = gauss_kernel_ddelay(m, 0.0, shift, sigma);
    }
    return dt;
}

BatchTables build_batch_tables(const NetworkParams& params, const NetworkConfig& cfg,
                               const LearnFlags& learn) {
    BatchTables bt;
    bt.eff = build_effective_delays(params, cfg);
    if (cfg.input_delays_active() && learn.delays_in)
        bt.taps_in = build_delay_taps(params.d_in, cfg.delay_halfspan(), cfg.sigma, false);
    if (cfg.recurrent_delays_active() && learn.delays_rec)
        bt.taps_rec = build_delay_taps(params.d_rec, cfg.delay_halfspan(), cfg.sigma, true);
    return bt;
}

namespace {

// Kernel-derivative sums for every input synapse at read row t. spike_prefix
// holds per-channel cumulative spike counts so empty windows cost one lookup.
void kd_input_row(const DenseSample& sample, const DelayTaps& taps, int t,
                  const std::vector<int>& spike_prefix, std::vector<double>& out) {
    const int n_in = taps.cols;
    const int T = sample.T;
    for (int rr = 0; rr < taps.rows; ++rr) {
        for (int i = 0; i < n_in; ++i) {
            const std::size_t idx = static_cast<std::size_t>(rr) * n_in + i;
            const int lo = taps.m_lo[idx];
            const int len = taps.m_len[idx];
            const int tk_hi = std::min(T - 1, t - lo);
            const int tk_lo = std::max(0, t - (lo + len - 1));
            if (tk_hi < tk_lo) {
                out[idx] = 0.0;
                continue;
            }
            const int* pre = spike_prefix.data() + static_cast<std::size_t>(i) * (T + 1);
            if (pre[tk_hi + 1] == pre[tk_lo]) {
                out[idx] = 0.0;
                continue;
            }
            const double* tp = taps.taps.data() + idx * taps.stride;
            double s = 0.0;
            for (int o = 0; o < len; ++o) {
                const int tk = t - (lo + o);
                if (tk < 0 || tk >= T) continue;
                if (sample.at(tk, i)) s += tp[o];
            }
            out[idx] = s;
        }
    }
}

// Same over the hidden raster; the read position lags the current row by 1.
void kd_recurrent_row(const std::vector<std::uint8_t>& raster, int n_h, const DelayTaps& taps,
                      int t, std::vector<double>& out) {
    const int base = t - 1;
    for (int rr = 0; rr < taps.rows; ++rr) {
        for (int k = 0; k < n_h; ++k) {
            const std::size_t idx = static_cast<std::size_t>(rr) * n_h + k;
            const int lo = taps.m_lo[idx];
            const int len = taps.m_len[idx];
            const double* tp = taps.taps.data() + idx * taps.stride;
            double s = 0.0;
            for (int o = 0; o < len; ++o) {
                const int row = base - (lo + o);
                if (row < 0) break;  // taps ordered oldest offsets last
                if (raster[static_cast<std::size_t>(row) * n_h + k]) s += tp[o];
            }
            out[idx] = s;
        }
    }
}

}  // namespace

SampleResult online_train_sample(const DenseSample& sample, const NetworkParams& params,
                                 const NetworkConfig& cfg, const OnlineOptions& opt,
                                 const BatchTables& tables, EligibilityState& es) {
    es.reset_traces();
    NetworkState state(cfg);
    const int T = sample.T;
    const int n_h = cfg.n_hidden;
    const int n_in = cfg.n_in;
    const int n_out = cfg.n_out;
    const bool syn = cfg.delay_mode == DelayMode::Synaptic;

    const int in_read_rows = cfg.input_delays_active() && syn ? n_h : 1;
    const int rec_read_rows = cfg.recurrent_delays_active() && syn ? n_h : 1;

    std::vector<double> read_in(static_cast<std::size_t>(in_read_rows) * n_in);
    std::vector<double> read_rec;
    if (cfg.recurrent) read_rec.assign(static_cast<std::size_t>(rec_read_rows) * n_h, 0.0);
    std::vector<double> kd_in;
    if (!tables.taps_in.empty()) kd_in.assign(tables.taps_in.taps.size() / tables.taps_in.stride, 0.0);
    std::vector<double> kd_rec;
    if (!tables.taps_rec.empty())
        kd_rec.assign(tables.taps_rec.taps.size() / tables.taps_rec.stride, 0.0);

    std::vector<std::uint8_t> raster;
    if (cfg.recurrent) raster.assign(static_cast<std::size_t>(T) * n_h, 0);

    std::vector<int> spike_prefix;
    if (!kd_in.empty()) {
        spike_prefix.assign(static_cast<std::size_t>(n_in) * (T + 1), 0);
        for (int i = 0; i < n_in; ++i) {
            int* pre = spike_prefix.data() + static_cast<std::size_t>(i) * (T + 1);
            for (int t = 0; t < T; ++t) pre[t + 1] = pre[t] + (sample.at(t, i) ? 1 : 0);
        }
    }

    std::vector<double> probs(n_out), err(n_out), sum_probs(n_out, 0.0);
    std::vector<double> spike_vals(n_h, 0.0);

    SampleResult out;
    for (int t = 0; t < T; ++t) {
        lif_step(state, sample.frame(t), params, cfg, tables.eff);
        readout_step(state.y, state.z.data(), params, cfg);
        if (cfg.recurrent)
            std::memcpy(&raster[static_cast<std::size_t>(t) * n_h], state.z.data(), n_h);

        softmax_into(state.y.data(), n_out, probs.data());
        out.loss += -std::log(std::max(probs[sample.label], 1e-300));
        for (int k = 0; k < n_out; ++k) {
            sum_probs[k] += probs[k];
            err[k] = probs[k] - (k == sample.label ? 1.0 : 0.0);
        }

        for (int rr = 0; rr < in_read_rows; ++rr)
            for (int i = 0; i < n_in; ++i)
                read_in[static_cast<std::size_t>(rr) * n_in + i] =
                    state.in_buf.at(tables.eff.of_in(rr, i), i);
        if (cfg.recurrent)
            for (int rr = 0; rr < rec_read_rows; ++rr)
                for (int k = 0; k < n_h; ++k)
                    read_rec[static_cast<std::size_t>(rr) * n_h + k] =
                        state.rec_buf.at(tables.eff.of_rec(rr, k), k);

        if (!kd_in.empty()) kd_input_row(sample, tables.taps_in, t, spike_prefix, kd_in);
        if (!kd_rec.empty()) kd_recurrent_row(raster, n_h, tables.taps_rec, t, kd_rec);

        StepReads reads;
        reads.read_in = read_in.data();
        reads.in_rows = in_read_rows;
        if (!kd_in.empty()) {
            reads.kd_in = kd_in.data();
            reads.kd_in_rows = tables.taps_in.rows;
        }
        if (cfg.recurrent) {
            reads.read_rec = read_rec.data();
            reads.rec_rows = rec_read_rows;
        }
        if (!kd_rec.empty()) {
            reads.kd_rec = kd_rec.data();
            reads.kd_rec_rows = tables.taps_rec.rows;
        }
        for (int j = 0; j < n_h; ++j) spike_vals[j] = state.z[j];
        elig_step(es, reads, state.v.data(), spike_vals.data(), err.data(), params, cfg, opt);
    }

    int best = 0;
    for (int k = 1; k < n_out; ++k)
        if (sum_probs[k] > sum_probs[best]) best = k;
    out.prediction = T > 0 ? best : -1;
    return out;
}

OptimizerState OptimizerState::like(const NetworkParams& p, OptimizerKind kind) {
    OptimizerState s;
    if (kind != OptimizerKind::Adam) return s;
    auto mk = [](const Matrix& t) { return Matrix(t.rows, t.cols); };
    s.m_w_in = mk(p.w_in);
    s.v_w_in = mk(p.w_in);
    if (!p.w_rec.empty()) {
        s.m_w_rec = mk(p.w_rec);
        s.v_w_rec = mk(p.w_rec);
    }
    s.m_w_out = mk(p.w_out);
    s.v_w_out = mk(p.w_out);
    if (!p.d_in.empty()) {
        s.m_d_in = mk(p.d_in);
        s.v_d_in = mk(p.d_in);
    }
    if (!p.d_rec.empty()) {
        s.m_d_rec = mk(p.d_rec);
        s.v_d_rec = mk(p.d_rec);
    }
    return s;
}

namespace {

void check_finite(const Matrix& g, const char* group) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g.a[i])) {
            std::ostringstream os;
            os << "non-finite gradient in " << group << " at flat index " << i << " (value "
               << g.a[i] << ")";
            throw NumericError(os.str());
        }
    }
}

struct StepRule {
    OptimizerKind kind;
    double lr;
    Matrix* m;
    Matrix* v;
    long step_count;

    void apply(Matrix& theta, const Matrix& g, const MaskMatrix* mask) const {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
        const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
        for (int r = 0; r < theta.rows; ++r) {
            for (int c = 0; c < theta.cols; ++c) {
                // per-entry masks only apply to per-synapse parameter matrices
                if (mask && !mask->empty() && theta.rows == mask->rows && (*mask)(r, c) == 0)
                    continue;
                const double grad = g(r, c);
                if (kind == OptimizerKind::Adam) {
                    double& mm = (*m)(r, c);
                    double& vv = (*v)(r, c);
                    mm = b1 * mm + (1.0 - b1) * grad;
                    vv = b2 * vv + (1.0 - b2) * grad * grad;
                    theta(r, c) -= lr * (mm / corr1) / (std::sqrt(vv / corr2) + eps);
                } else {
                    theta(r, c) -= lr * grad;
                }
            }
        }
    }
};

void clamp_matrix(Matrix& m, double lo, double hi) {
    for (auto& x : m.a) x = std::clamp(x, lo, hi);
}

}  // namespace

void apply_updates(NetworkParams& params, ParamGrads& grads, OptimizerState& opt,
                   const NetworkConfig& cfg, const LearnFlags& flags) {
    if (flags.weights) {
        check_finite(grads.w_in, "w_in");
        if (!grads.w_rec.empty()) check_finite(grads.w_rec, "w_rec");
        check_finite(grads.w_out, "w_out");
    }
    if (flags.delays_in && !grads.d_in.empty()) check_finite(grads.d_in, "d_in");
    if (flags.delays_rec && !grads.d_rec.empty()) check_finite(grads.d_rec, "d_rec");

    ++opt.step_count;
    const double half = cfg.delay_halfspan();

    if (flags.weights) {
        StepRule rule{cfg.optimizer, cfg.lr_w, &opt.m_w_in, &opt.v_w_in, opt.step_count};
        rule.apply(params.w_in, grads.w_in, &params.mask_in);
        if (!params.w_rec.empty()) {
            StepRule r2{cfg.optimizer, cfg.lr_w, &opt.m_w_rec, &opt.v_w_rec, opt.step_count};
            r2.apply(params.w_rec, grads.w_rec, &params.mask_rec);
        }
        StepRule r3{cfg.optimizer, cfg.lr_w, &opt.m_w_out, &opt.v_w_out, opt.step_count};
        r3.apply(params.w_out, grads.w_out, nullptr);
    }
    if (flags.delays_in && !params.d_in.empty()) {
        StepRule rule{cfg.optimizer, cfg.lr_d, &opt.m_d_in, &opt.v_d_in, opt.step_count};
        rule.apply(params.d_in, grads.d_in, &params.mask_in);
        clamp_matrix(params.d_in, -half, half);
    }
    if (flags.delays_rec && !params.d_rec.empty()) {
        StepRule rule{cfg.optimizer, cfg.lr_d, &opt.m_d_rec, &opt.v_d_rec, opt.step_count};
        rule.apply(params.d_rec, grads.d_rec, &params.mask_rec);
        clamp_matrix(params.d_rec, -half, half);
    }

    params.refresh_feedback(cfg.feedback);
    grads.zero();
}

}  // namespace snn
