#include "snn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "snn/errors.hpp"

namespace snn {

double soft_spike(double v, double v_th, double gamma_pd) {
    if (v <= 0.0) return 0.0;
    if (v >= 2.0 * v_th) return gamma_pd;
    if (v <= v_th) return gamma_pd * v * v / (2.0 * v_th * v_th);
    const double u = 2.0 * v_th - v;
    return gamma_pd - gamma_pd * u * u / (2.0 * v_th * v_th);
}

namespace {

std::vector<std::vector<int>> input_spike_times(const DenseSample& s) {
    std::vector<std::vector<int>> times(s.n_in);
    for (int t = 0; t < s.T; ++t)
        for (int i = 0; i < s.n_in; ++i)
            if (s.at(t, i)) times[i].push_back(t);
    return times;
}

// Kernel sum over one channel's spike times at read position t with shift s.
double kernel_read(const std::vector<int>& times, double t, double shift, double sigma, int W,
                   bool derivative) {
    const int lo = static_cast<int>(std::ceil(t - shift - W));
    const int hi = static_cast<int>(std::floor(t - shift + W));
    double sum = 0.0;
    for (int tk : times) {
        if (tk < lo) continue;
        if (tk > hi) break;
        sum += derivative ? gauss_kernel_ddelay(t, tk, shift, sigma)
                          : gauss_kernel(t, tk, shift, sigma);
    }
    return sum;
}

// Kernel sum over soft hidden spike history, rows [0, t_last].
double kernel_read_soft(const std::vector<double>& zeta, int n_h, int k, int t_last, double base,
                        double shift, double sigma, int W, bool derivative) {
    const int lo = std::max(0, static_cast<int>(std::ceil(base - shift - W)));
    const int hi = std::min(t_last, static_cast<int>(std::floor(base - shift + W)));
    double sum = 0.0;
    for (int row = lo; row <= hi; ++row) {
        const double zv = zeta[static_cast<std::size_t>(row) * n_h + k];
        if (zv == 0.0) continue;
        sum += zv * (derivative ? gauss_kernel_ddelay(base, row, shift, sigma)
                                : gauss_kernel(base, row, shift, sigma));
    }
    return sum;
}

std::uint8_t region_of(double v, double v_th) {
    if (v <= 0.0) return 0;
    if (v <= v_th) return 1;
    if (v <= 2.0 * v_th) return 2;
    return 3;
}

void soft_forward_core(const DenseSample& sample, const NetworkParams& params,
                       const NetworkConfig& cfg, Tape* tape, std::vector<std::uint8_t>* signature,
                       double* loss_out) {
    const int T = sample.T;
    const int n_h = cfg.n_hidden;
    const int n_in = cfg.n_in;
    const int n_out = cfg.n_out;
    const bool syn = cfg.delay_mode == DelayMode::Synaptic;
    const bool in_delays = cfg.input_delays_active();
    const bool rec_delays = cfg.recurrent_delays_active();
    const int in_rows = in_delays && syn ? n_h : 1;
    const int rec_rows = rec_delays && syn ? n_h : 1;
    const double hs = cfg.delay_halfspan();
    const int W = kernel_halfwidth(cfg.sigma);
    const double alpha = cfg.alpha();
    const double kappa = cfg.kappa();

    if (sample.T > 0 && sample.n_in != cfg.n_in)
        throw InputError("smoothed_forward: sample channel count mismatch");

    const auto in_times = input_spike_times(sample);

    if (tape) {
        tape->T = T;
        tape->n_h = n_h;
        tape->n_in = n_in;
        tape->n_out = n_out;
        tape->in_read_rows = in_rows;
        tape->rec_read_rows = rec_rows;
        tape->has_kd_in = in_delays;
        tape->has_kd_rec = rec_delays;
        tape->label = sample.label;
        tape->read_in.assign(static_cast<std::size_t>(T) * in_rows * n_in, 0.0);
        if (in_delays) tape->kd_in.assign(static_cast<std::size_t>(T) * in_rows * n_in, 0.0);
        if (cfg.recurrent) {
            tape->read_rec.assign(static_cast<std::size_t>(T) * rec_rows * n_h, 0.0);
            if (rec_delays) tape->kd_rec.assign(static_cast<std::size_t>(T) * rec_rows * n_h, 0.0);
        }
        tape->v.assign(static_cast<std::size_t>(T) * n_h, 0.0);
        tape->z.assign(static_cast<std::size_t>(T) * n_h, 0);
        tape->zeta.assign(static_cast<std::size_t>(T) * n_h, 0.0);
        tape->pd.assign(static_cast<std::size_t>(T) * n_h, 0.0);
        tape->y.assign(static_cast<std::size_t>(T) * n_out, 0.0);
        tape->err.assign(static_cast<std::size_t>(T) * n_out, 0.0);
    }
    if (signature) signature->assign(static_cast<std::size_t>(T) * n_h, 0);

    std::vector<double> v(n_h, 0.0), y(n_out, 0.0);
    std::vector<std::uint8_t> z(n_h, 0);
    std::vector<double> zeta_hist(static_cast<std::size_t>(T) * n_h, 0.0);
    std::vector<double> read_in(static_cast<std::size_t>(in_rows) * n_in, 0.0);
    std::vector<double> kd_in(in_delays ? read_in.size() : 0, 0.0);
    std::vector<double> read_rec(cfg.recurrent ? static_cast<std::size_t>(rec_rows) * n_h : 0, 0.0);
    std::vector<double> kd_rec(rec_delays ? read_rec.size() : 0, 0.0);
    std::vector<double> probs(n_out);
    double loss = 0.0;

    for (int t = 0; t < T; ++t) {
        for (int rr = 0; rr < in_rows; ++rr) {
            for (int i = 0; i < n_in; ++i) {
                const std::size_t ix = static_cast<std::size_t>(rr) * n_in + i;
                if (in_delays) {
                    const double shift = params.d_in(in_rows == 1 ? 0 : rr, i) + hs;
                    read_in[ix] = kernel_read(in_times[i], t, shift, cfg.sigma, W, false);
                    kd_in[ix] = kernel_read(in_times[i], t, shift, cfg.sigma, W, true);
                } else {
                    read_in[ix] = sample.at(t, i);
                }
            }
        }
        if (cfg.recurrent) {
            for (int rr = 0; rr < rec_rows; ++rr) {
                for (int k = 0; k < n_h; ++k) {
                    const std::size_t ix = static_cast<std::size_t>(rr) * n_h + k;
                    if (rec_delays) {
                        const double shift = params.d_rec(rec_rows == 1 ? 0 : rr, k) + hs;
                        read_rec[ix] = kernel_read_soft(zeta_hist, n_h, k, t - 1,
                                                        static_cast<double>(t - 1), shift,
                                                        cfg.sigma, W, false);
                        kd_rec[ix] = kernel_read_soft(zeta_hist, n_h, k, t - 1,
                                                      static_cast<double>(t - 1), shift,
                                                      cfg.sigma, W, true);
                    } else {
                        read_rec[ix] =
                            t > 0 ? zeta_hist[static_cast<std::size_t>(t - 1) * n_h + k] : 0.0;
                    }
                }
            }
        }

        for (int j = 0; j < n_h; ++j) {
            double drive = 0.0;
            const double* wrow = params.w_in.row(j);
            const double* rd = read_in.data() + static_cast<std::size_t>(in_rows == 1 ? 0 : j) * n_in;
            for (int i = 0; i < n_in; ++i) {
                if (params.masked_in(j, i)) continue;
                drive += wrow[i] * rd[i];
            }
            if (cfg.recurrent) {
                const double* rrow = params.w_rec.row(j);
                const double* rdr =
                    read_rec.data() + static_cast<std::size_t>(rec_rows == 1 ? 0 : j) * n_h;
                for (int k = 0; k < n_h; ++k) {
                    if (params.masked_rec(j, k)) continue;
                    drive += rrow[k] * rdr[k];
                }
            }
            v[j] = alpha * v[j] + drive - (z[j] ? cfg.v_th : 0.0);
        }
        for (int j = 0; j < n_h; ++j) {
            z[j] = v[j] > cfg.v_th ? 1 : 0;
            zeta_hist[static_cast<std::size_t>(t) * n_h + j] =
                soft_spike(v[j], cfg.v_th, cfg.gamma_pd);
        }
        for (int k = 0; k < n_out; ++k) {
            double drive = 0.0;
            const double* orow = params.w_out.row(k);
            const double* zrow = zeta_hist.data() + static_cast<std::size_t>(t) * n_h;
            for (int j = 0; j < n_h; ++j) drive += orow[j] * zrow[j];
            y[k] = kappa * y[k] + drive;
        }

        softmax_into(y.data(), n_out, probs.data());
        loss += -std::log(std::max(probs[sample.label], 1e-300));

        if (signature)
            for (int j = 0; j < n_h; ++j)
                (*signature)[static_cast<std::size_t>(t) * n_h + j] = region_of(v[j], cfg.v_th);

        if (tape) {
            std::memcpy(&tape->read_in[static_cast<std::size_t>(t) * in_rows * n_in],
                        read_in.data(), read_in.size() * sizeof(double));
            if (in_delays)
                std::memcpy(&tape->kd_in[static_cast<std::size_t>(t) * in_rows * n_in],
                            kd_in.data(), kd_in.size() * sizeof(double));
            if (cfg.recurrent) {
                std::memcpy(&tape->read_rec[static_cast<std::size_t>(t) * rec_rows * n_h],
                            read_rec.data(), read_rec.size() * sizeof(double));
                if (rec_delays)
                    std::memcpy(&tape->kd_rec[static_cast<std::size_t>(t) * rec_rows * n_h],
                                kd_rec.data(), kd_rec.size() * sizeof(double));
            }
            for (int j = 0; j < n_h; ++j) {
                tape->v[static_cast<std::size_t>(t) * n_h + j] = v[j];
                tape->z[static_cast<std::size_t>(t) * n_h + j] = z[j];
                tape->pd[static_cast<std::size_t>(t) * n_h + j] =
                    surrogate_grad(v[j], cfg.v_th, cfg.gamma_pd);
            }
            std::memcpy(&tape->zeta[static_cast<std::size_t>(t) * n_h],
                        &zeta_hist[static_cast<std::size_t>(t) * n_h], n_h * sizeof(double));
            std::memcpy(&tape->y[static_cast<std::size_t>(t) * n_out], y.data(),
                        n_out * sizeof(double));
            for (int k = 0; k < n_out; ++k)
                tape->err[static_cast<std::size_t>(t) * n_out + k] =
                    probs[k] - (k == sample.label ? 1.0 : 0.0);
        }
    }
    if (tape) tape->loss = loss;
    if (loss_out) *loss_out = loss;
}

}  // namespace

Tape smoothed_forward(const DenseSample& sample, const NetworkParams& params,
                      const NetworkConfig& cfg) {
    Tape tape;
    soft_forward_core(sample, params, cfg, &tape, nullptr, nullptr);
    return tape;
}

double smoothed_loss(const DenseSample& sample, const NetworkParams& params,
                     const NetworkConfig& cfg, std::vector<std::uint8_t>* signature) {
    double loss = 0.0;
    soft_forward_core(sample, params, cfg, nullptr, signature, &loss);
    return loss;
}

ParamGrads bptt_grad(const Tape& tape, const NetworkParams& params, const NetworkConfig& cfg) {
    ParamGrads g = ParamGrads::like(params);
    const int T = tape.T;
    const int n_h = tape.n_h;
    const int n_in = tape.n_in;
    const int n_out = tape.n_out;
    const double alpha = cfg.alpha();
    const double kappa = cfg.kappa();
    const double hs = cfg.delay_halfspan();
    const int W = kernel_halfwidth(cfg.sigma);
    const bool rec_delays = cfg.recurrent_delays_active();
    const bool in_delays = tape.has_kd_in;
    const bool ax_in = !g.d_in.empty() && g.d_in.rows == 1;
    const bool ax_rec = !g.d_rec.empty() && g.d_rec.rows == 1;

    std::vector<double> gy(n_out, 0.0);
    std::vector<double> gv(n_h, 0.0), gv_next(n_h, 0.0);
    std::vector<double> gzeta(static_cast<std::size_t>(T) * n_h, 0.0);

    for (int t = T - 1; t >= 0; --t) {
        for (int k = 0; k < n_out; ++k)
            gy[k] = tape.err[static_cast<std::size_t>(t) * n_out + k] + kappa * gy[k];

        const double* zeta_row = tape.zeta.data() + static_cast<std::size_t>(t) * n_h;
        for (int k = 0; k < n_out; ++k) {
            double* grow = g.w_out.row(k);
            for (int j = 0; j < n_h; ++j) grow[j] += gy[k] * zeta_row[j];
        }
        for (int j = 0; j < n_h; ++j) {
            double s = 0.0;
            for (int k = 0; k < n_out; ++k) s += params.w_out(k, j) * gy[k];
            gzeta[static_cast<std::size_t>(t) * n_h + j] += s;
        }

        const double* pd_row = tape.pd.data() + static_cast<std::size_t>(t) * n_h;
        for (int j = 0; j < n_h; ++j)
            gv[j] = pd_row[j] * gzeta[static_cast<std::size_t>(t) * n_h + j] + alpha * gv_next[j];

        const double* rd_in = tape.read_in_at(t);
        const double* kd_in = in_delays ? tape.kd_in_at(t) : nullptr;
        for (int j = 0; j < n_h; ++j) {
            const double gvj = gv[j];
            if (gvj == 0.0) continue;
            const double* rd = rd_in + static_cast<std::size_t>(tape.in_read_rows == 1 ? 0 : j) * n_in;
            double* grow = g.w_in.row(j);
            const double* wrow = params.w_in.row(j);
            for (int i = 0; i < n_in; ++i) {
                if (params.masked_in(j, i)) continue;
                grow[i] += gvj * rd[i];
            }
            if (in_delays) {
                const double* kd =
                    kd_in + static_cast<std::size_t>(tape.in_read_rows == 1 ? 0 : j) * n_in;
                double* gd = g.d_in.row(ax_in ? 0 : j);
                for (int i = 0; i < n_in; ++i) {
                    if (params.masked_in(j, i)) continue;
                    gd[i] += gvj * wrow[i] * kd[i];
                }
            }
            if (cfg.recurrent) {
                const double* rdr =
                    tape.read_rec_at(t) +
                    static_cast<std::size_t>(tape.rec_read_rows == 1 ? 0 : j) * n_h;
                double* grr = g.w_rec.row(j);
                const double* wrr = params.w_rec.row(j);
                for (int k = 0; k < n_h; ++k) {
                    if (params.masked_rec(j, k)) continue;
                    grr[k] += gvj * rdr[k];
                }
                if (rec_delays) {
                    const double* kdr =
                        tape.kd_rec_at(t) +
                        static_cast<std::size_t>(tape.rec_read_rows == 1 ? 0 : j) * n_h;
                    double* gd = g.d_rec.row(ax_rec ? 0 : j);
                    for (int k = 0; k < n_h; ++k) {
                        if (params.masked_rec(j, k)) continue;
                        gd[k] += gvj * wrr[k] * kdr[k];
                    }
                }
                // credit the past soft spikes feeding this step's recurrent read
                const double base = static_cast<double>(t - 1);
                for (int k = 0; k < n_h; ++k) {
                    if (params.masked_rec(j, k)) continue;
                    const double w = params.w_rec(j, k);
                    if (w == 0.0) continue;
                    if (rec_delays) {
                        const double shift = params.delay_rec(j, k) + hs;
                        const int lo = std::max(0, static_cast<int>(std::ceil(base - shift - W)));
                        const int hi =
                            std::min(t - 1, static_cast<int>(std::floor(base - shift + W)));
                        for (int row = lo; row <= hi; ++row)
                            gzeta[static_cast<std::size_t>(row) * n_h + k] +=
                                gvj * w * gauss_kernel(base, row, shift, cfg.sigma);
                    } else if (t > 0) {
                        gzeta[static_cast<std::size_t>(t - 1) * n_h + k] += gvj * w;
                    }
                }
            }
        }
        std::swap(gv, gv_next);
    }
    return g;
}

ParamGrads online_from_tape(const Tape& tape, const NetworkParams& params,
                            const NetworkConfig& cfg, const OnlineOptions& opt) {
    EligibilityState es = EligibilityState::make(params, cfg);
    es.reset_traces();
    for (int t = 0; t < tape.T; ++t) {
        StepReads reads;
        reads.read_in = tape.read_in_at(t);
        reads.in_rows = tape.in_read_rows;
        if (tape.has_kd_in) {
            reads.kd_in = tape.kd_in_at(t);
            reads.kd_in_rows = tape.in_read_rows;
        }
        if (cfg.recurrent) {
            reads.read_rec = tape.read_rec_at(t);
            reads.rec_rows = tape.rec_read_rows;
            if (tape.has_kd_rec) {
                reads.kd_rec = tape.kd_rec_at(t);
                reads.kd_rec_rows = tape.rec_read_rows;
            }
        }
        elig_step(es, reads, tape.v.data() + static_cast<std::size_t>(t) * tape.n_h,
                  tape.zeta.data() + static_cast<std::size_t>(t) * tape.n_h,
                  tape.err.data() + static_cast<std::size_t>(t) * tape.n_out, params, cfg, opt);
    }
    return std::move(es.grads);
}

std::string to_string(ParamGroup g) {
    switch (g) {
        case ParamGroup::WIn: return "w_in";
        case ParamGroup::WRec: return "w_rec";
        case ParamGroup::WOut: return "w_out";
        case ParamGroup::DIn: return "d_in";
        case ParamGroup::DRec: return "d_rec";
    }
    return "?";
}

std::vector<ParamSel> all_learnable_params(const NetworkParams& params, const NetworkConfig&,
                                           const LearnFlags& learn) {
    std::vector<ParamSel> sel;
    if (learn.weights) {
        for (int j = 0; j < params.w_in.rows; ++j)
            for (int i = 0; i < params.w_in.cols; ++i)
                if (!params.masked_in(j, i)) sel.push_back({ParamGroup::WIn, j, i});
        for (int j = 0; j < params.w_rec.rows; ++j)
            for (int k = 0; k < params.w_rec.cols; ++k)
                if (!params.masked_rec(j, k)) sel.push_back({ParamGroup::WRec, j, k});
        for (int k = 0; k < params.w_out.rows; ++k)
            for (int j = 0; j < params.w_out.cols; ++j) sel.push_back({ParamGroup::WOut, k, j});
    }
    if (learn.delays_in && !params.d_in.empty()) {
        for (int r = 0; r < params.d_in.rows; ++r)
            for (int i = 0; i < params.d_in.cols; ++i)
                if (params.d_in.rows == 1 || !params.masked_in(r, i))
                    sel.push_back({ParamGroup::DIn, r, i});
    }
    if (learn.delays_rec && !params.d_rec.empty()) {
        for (int r = 0; r < params.d_rec.rows; ++r)
            for (int k = 0; k < params.d_rec.cols; ++k)
                if (params.d_rec.rows == 1 || !params.masked_rec(r, k))
                    sel.push_back({ParamGroup::DRec, r, k});
    }
    return sel;
}

namespace {

double* param_ptr(NetworkParams& p, const ParamSel& s) {
    switch (s.group) {
        case ParamGroup::WIn: return &p.w_in(s.r, s.c);
        case ParamGroup::WRec: return &p.w_rec(s.r, s.c);
        case ParamGroup::WOut: return &p.w_out(s.r, s.c);
        case ParamGroup::DIn: return &p.d_in(s.r, s.c);
        case ParamGroup::DRec: return &p.d_rec(s.r, s.c);
    }
    return nullptr;
}

}  // namespace

double grad_entry(const ParamGrads& g, const ParamSel& s) {
    switch (s.group) {
        case ParamGroup::WIn: return g.w_in(s.r, s.c);
        case ParamGroup::WRec: return g.w_rec(s.r, s.c);
        case ParamGroup::WOut: return g.w_out(s.r, s.c);
        case ParamGroup::DIn: return g.d_in(s.r, s.c);
        case ParamGroup::DRec: return g.d_rec(s.r, s.c);
    }
    return 0.0;
}

FiniteDiffResult finite_diff_grad(const DenseSample& sample, const NetworkParams& params,
                                  const NetworkConfig& cfg, const std::vector<ParamSel>& sel,
                                  double h) {
    if (!(h > 0.0)) throw InputError("finite_diff_grad requires h > 0");
    FiniteDiffResult res;
    res.grad.assign(sel.size(), 0.0);
    res.excluded.assign(sel.size(), 0);

    std::vector<std::uint8_t> sig_base;
    smoothed_loss(sample, params, cfg, &sig_base);

    const double hs = cfg.delay_halfspan();
    const int W = kernel_halfwidth(cfg.sigma);
    // integer tap interval of the truncated kernel for a given delay value;
    // if the perturbations land in different intervals the loss jumps by the
    // boundary tap and central differences are meaningless
    auto tap_bounds = [hs, W](double d) {
        const double shift = d + hs;
        return std::pair<int, int>(static_cast<int>(std::ceil(shift - W)),
                                   static_cast<int>(std::floor(shift + W)));
    };

    const int n = static_cast<int>(sel.size());
#ifdef _OPENMP
#pragma omp parallel
#endif
    {
        NetworkParams work = params;
        std::vector<std::uint8_t> sig_p, sig_m;
#ifdef _OPENMP
#pragma omp for schedule(dynamic)
#endif
        for (int idx = 0; idx < n; ++idx) {
            double* th = param_ptr(work, sel[idx]);
            const double orig = *th;
            *th = orig + h;
            const double lp = smoothed_loss(sample, work, cfg, &sig_p);
            *th = orig - h;
            const double lm = smoothed_loss(sample, work, cfg, &sig_m);
            *th = orig;
            res.grad[idx] = (lp - lm) / (2.0 * h);
            // a kink or spike flip between the evaluations poisons the estimate
            bool excluded = sig_p != sig_m || sig_p != sig_base;
            if (sel[idx].group == ParamGroup::DIn || sel[idx].group == ParamGroup::DRec)
                excluded = excluded || tap_bounds(orig + h) != tap_bounds(orig - h);
            res.excluded[idx] = excluded ? 1 : 0;
        }
    }
    return res;
}

GradReport build_grad_report(const ParamGrads& online, const ParamGrads& oracle,
                             const NetworkParams& params, const NetworkConfig& cfg,
                             const LearnFlags& learn) {
    GradReport rep;
    const auto sel = all_learnable_params(params, cfg, learn);

    ParamGroup groups[] = {ParamGroup::WIn, ParamGroup::WRec, ParamGroup::WOut, ParamGroup::DIn,
                           ParamGroup::DRec};
    for (ParamGroup grp : groups) {
        std::vector<double> a, b;
        for (const auto& s : sel) {
            if (s.group != grp) continue;
            a.push_back(grad_entry(online, s));
            b.push_back(grad_entry(oracle, s));
        }
        if (a.empty()) continue;
        double scale = 0.0;
        for (double x : b) scale = std::max(scale, std::abs(x));
        GroupStat st;
        st.group = to_string(grp);
        st.cosine = cosine(a, b);
        st.n = static_cast<int>(a.size());
        double sum_rel = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-12 * scale, 1e-300});
            const double rel = std::abs(a[i] - b[i]) / denom;
            st.max_rel = std::max(st.max_rel, rel);
            sum_rel += rel;
        }
        st.mean_rel = sum_rel / static_cast<double>(a.size());
        rep.groups.push_back(st);
    }

    rep.rows.reserve(sel.size());
    for (const auto& s : sel) {
        GradReportRow row;
        std::ostringstream os;
        os << to_string(s.group) << "[" << s.r << "," << s.c << "]";
        row.param = os.str();
        row.online_g = grad_entry(online, s);
        row.oracle_g = grad_entry(oracle, s);
        row.abs_err = std::abs(row.online_g - row.oracle_g);
        const double denom = std::max({std::abs(row.online_g), std::abs(row.oracle_g), 1e-300});
        row.rel_err = row.abs_err / denom;
        rep.rows.push_back(row);
    }
    return rep;
}

void write_grad_report_csv(const GradReport& rep, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << "param,online_grad,oracle_grad,abs_err,rel_err\n";
    out.precision(17);
    for (const auto& r : rep.rows)
        out << r.param << "," << r.online_g << "," << r.oracle_g << "," << r.abs_err << ","
            << r.rel_err << "\n";
}

DenseSample random_spike_sample(int T, int n_in, double p, int label, std::uint64_t seed) {
    DenseSample s;
    s.T = T;
    s.n_in = n_in;
    s.label = label;
    s.frames.assign(static_cast<std::size_t>(T) * n_in, 0);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution spike(p);
    for (auto& f : s.frames) f = spike(rng) ? 1 : 0;
    return s;
}

GradcheckResult run_gradcheck(const NetworkConfig& cfg, const GradcheckOptions& opt) {
    cfg.validate();
    if (opt.T > 512 || cfg.n_hidden > 128 || cfg.n_in > 512 ||
        static_cast<long>(cfg.n_in) * cfg.n_hidden > 65536)
        throw InputError("gradcheck is restricted to small configurations (T<=512, n_hidden<=128, n_in<=512)");

    LearnFlags learn;
    learn.delays_in = cfg.input_delays_active();
    learn.delays_rec = cfg.recurrent_delays_active();

    GradcheckResult res;
    res.worst_w_rel = 0.0;
    res.worst_w_cos = 1.0;
    res.worst_d_cos = 1.0;

    OnlineOptions oo;
    oo.learn = learn;
    oo.debug_alpha_scale = opt.debug_alpha_scale;

    const bool any_delays = learn.delays_in || learn.delays_rec;
    int delay_seeds_used = 0;

    for (int s = 0; s < opt.seeds; ++s) {
        NetworkConfig c = cfg;
        c.seed = cfg.seed + 1000003ULL * static_cast<std::uint64_t>(s);
        NetworkParams p = NetworkParams::init(c);
        DenseSample sample = random_spike_sample(opt.T, c.n_in, opt.spike_prob, s % c.n_out,
                                                 c.seed ^ 0x5bf03635ULL);

        Tape tape = smoothed_forward(sample, p, c);
        ParamGrads online = online_from_tape(tape, p, c, oo);
        ParamGrads oracle = bptt_grad(tape, p, c);

        std::vector<double> won, wor;
        for (const auto& ps : all_learnable_params(p, c, learn)) {
            if (ps.group == ParamGroup::DIn || ps.group == ParamGroup::DRec) continue;
            won.push_back(grad_entry(online, ps));
            wor.push_back(grad_entry(oracle, ps));
        }
        double scale = 0.0;
        for (double x : wor) scale = std::max(scale, std::abs(x));
        for (std::size_t i = 0; i < won.size(); ++i) {
            const double denom =
                std::max({std::abs(won[i]), std::abs(wor[i]), 1e-9 * scale, 1e-300});
            res.worst_w_rel = std::max(res.worst_w_rel, std::abs(won[i] - wor[i]) / denom);
        }
        res.worst_w_cos = std::min(res.worst_w_cos, cosine(won, wor));

        if (any_delays) {
            std::vector<ParamSel> dsel;
            for (const auto& ps : all_learnable_params(p, c, learn))
                if (ps.group == ParamGroup::DIn || ps.group == ParamGroup::DRec)
                    dsel.push_back(ps);
            FiniteDiffResult fd = finite_diff_grad(sample, p, c, dsel, opt.h);
            std::vector<double> don, dfd;
            for (std::size_t i = 0; i < dsel.size(); ++i) {
                if (fd.excluded[i]) {
                    ++res.excluded_params;
                    continue;
                }
                don.push_back(grad_entry(online, dsel[i]));
                dfd.push_back(fd.grad[i]);
            }
            if (don.size() >= 2) {
                res.worst_d_cos = std::min(res.worst_d_cos, cosine(don, dfd));
                ++delay_seeds_used;
            }
        }

        if (s == 0) res.report = build_grad_report(online, oracle, p, c, learn);
    }

    const double d_thresh =
        cfg.delay_mode == DelayMode::Axonal ? opt.d_min_cos_axonal : opt.d_min_cos;
    res.pass = res.worst_w_rel <= opt.w_max_rel && res.worst_w_cos >= opt.w_min_cos;
    if (any_delays) res.pass = res.pass && delay_seeds_used > 0 && res.worst_d_cos >= d_thresh;

    std::ostringstream os;
    os << "seeds=" << opt.seeds << " worst_w_rel=" << res.worst_w_rel
       << " worst_w_cos=" << res.worst_w_cos;
    if (any_delays)
        os << " worst_d_cos=" << res.worst_d_cos << " fd_excluded=" << res.excluded_params
           << " delay_seeds_used=" << delay_seeds_used;
    res.detail = os.str();
    return res;
}

}  // namespace snn
