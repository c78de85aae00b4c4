#include "snn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "snn/errors.hpp"
#include "snn/network.hpp"

namespace snn {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int resolve_threads(int threads) {
#ifdef _OPENMP
    return threads == 0 ? omp_get_max_threads() : threads;
#else
    (void)threads;
    return 1;
#endif
}

}  // namespace

BatchStats process_batch(const Dataset& data, const std::vector<int>& order, int first, int count,
                         const NetworkParams& params, const NetworkConfig& cfg,
                         const OnlineOptions& opt, const BatchTables& tables, int threads,
                         ParamGrads& grads_out) {
    std::vector<ParamGrads> per(count);
    std::vector<double> losses(count, 0.0);
    std::vector<std::uint8_t> correct(count, 0);

    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
#endif
    for (int b = 0; b < count; ++b) {
        const DenseSample& s = data.samples[order[first + b]];
        EligibilityState es = EligibilityState::make(params, cfg);
        const SampleResult r = online_train_sample(s, params, cfg, opt, tables, es);
        per[b] = std::move(es.grads);
        losses[b] = r.loss;
        correct[b] = r.prediction == s.label ? 1 : 0;
    }

    grads_out.zero();
    for (int b = 0; b < count; ++b) grads_out.add(per[b]);
    grads_out.scale(1.0 / static_cast<double>(count));

    BatchStats stats;
    for (int b = 0; b < count; ++b) {
        stats.loss_sum += losses[b];
        stats.correct += correct[b];
    }
    return stats;
}

TrainResult train(const RunConfig& run, const Dataset& train_data, const Dataset* test_data,
                  const std::filesystem::path& checkpoint_path, const Checkpoint* resume) {
    run.net.validate();
    if (run.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (run.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (train_data.samples.empty()) throw InputError("training dataset is empty");
    if (train_data.n_in != run.net.n_in)
        throw InputError("dataset has " + std::to_string(train_data.n_in) +
                         " channels, config expects " + std::to_string(run.net.n_in));

    TrainResult res;
    int start_epoch = 0;
    if (resume) {
        check_checkpoint_shapes(*resume, run.net);
        res.params = resume->params;
        res.opt = resume->opt;
        start_epoch = resume->epochs_done;
    } else {
        res.params = NetworkParams::init(run.net);
        res.opt = OptimizerState::like(res.params, run.net.optimizer);
    }

    OnlineOptions opt;
    opt.learn = run.learn;

    const int n = static_cast<int>(train_data.samples.size());
    std::vector<int> order(n);
    ParamGrads grads = ParamGrads::like(res.params);

    const auto run_start = std::chrono::steady_clock::now();
    for (int epoch = start_epoch; epoch < run.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(run.net.seed + 0x9e3779b97f4a7c15ULL * (epoch + 1));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        int correct = 0;
        BatchTables tables = build_batch_tables(res.params, run.net, run.learn);
        for (int first = 0; first < n; first += run.batch_size) {
            const int count = std::min(run.batch_size, n - first);
            const BatchStats bs = process_batch(train_data, order, first, count, res.params,
                                                run.net, opt, tables, run.threads, grads);
            loss_sum += bs.loss_sum;
            correct += bs.correct;
            if (!std::isfinite(bs.loss_sum))
                throw NumericError("non-finite training loss in epoch " + std::to_string(epoch));
            apply_updates(res.params, grads, res.opt, run.net, run.learn);
            tables = build_batch_tables(res.params, run.net, run.learn);
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = loss_sum / n;
        em.train_acc = static_cast<double>(correct) / n;
        if (test_data && (epoch % std::max(1, run.eval_every) == 0 || epoch == run.epochs - 1))
            em.test_acc = evaluate(res.params, run.net, *test_data, run.threads);
        em.seconds = seconds_since(epoch_start);
        res.metrics.epochs.push_back(em);

        if (!checkpoint_path.empty())
            checkpoint_save(checkpoint_path, run.net, res.params, res.opt, epoch + 1);
    }
    res.metrics.wall_seconds = seconds_since(run_start);
    res.metrics.param_stats = param_stats(res.params);
    res.metrics.delay_hist = delay_histogram(res.params, run.net);
    return res;
}

double evaluate(const NetworkParams& params, const NetworkConfig& cfg, const Dataset& data,
                int threads) {
    if (data.samples.empty()) return 0.0;
    const int n = static_cast<int>(data.samples.size());
    int correct = 0;
    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) reduction(+ : correct) num_threads(nt) if (nt > 1)
#endif
    for (int i = 0; i < n; ++i) {
        const ForwardResult fr = forward_sample(data.samples[i], params, cfg);
        const int pred = argmax_summed_softmax(fr.readout, fr.T, cfg.n_out);
        if (pred == data.samples[i].label) ++correct;
    }
    return static_cast<double>(correct) / n;
}

std::pair<double, double> confidence_interval(std::span<const double> values) {
    const int n = static_cast<int>(values.size());
    if (n < 2) throw InputError("confidence_interval needs at least 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1));

    // two-sided 97.5% Student-t quantiles by degrees of freedom
    static const double t975[] = {0.0,   12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                  2.306, 2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
                                  2.120, 2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069,
                                  2.064, 2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
    const int df = n - 1;
    const double t = df <= 30 ? t975[df] : 1.960;
    return {mean, t * sd / std::sqrt(static_cast<double>(n))};
}

void write_metrics_csv(const RunMetrics& metrics, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << "epoch,split,loss,accuracy,seconds\n";
    out.precision(10);
    for (const auto& em : metrics.epochs) {
        out << em.epoch << ",train," << em.train_loss << "," << em.train_acc << "," << em.seconds
            << "\n";
        if (em.test_acc >= 0.0) out << em.epoch << ",test,," << em.test_acc << ",\n";
    }
}

AblationProtocol ablation_protocol_from_string(const std::string& name) {
    if (name == "sparsity_sweep") return AblationProtocol::SparsitySweep;
    if (name == "fixed_vs_learnable") return AblationProtocol::FixedVsLearnable;
    if (name == "delay_placement") return AblationProtocol::DelayPlacement;
    if (name == "weights_only_width") return AblationProtocol::WeightsOnlyWidth;
    throw ConfigError("unknown ablation protocol: " + name);
}

std::string to_string(AblationProtocol p) {
    switch (p) {
        case AblationProtocol::SparsitySweep: return "sparsity_sweep";
        case AblationProtocol::FixedVsLearnable: return "fixed_vs_learnable";
        case AblationProtocol::DelayPlacement: return "delay_placement";
        case AblationProtocol::WeightsOnlyWidth: return "weights_only_width";
    }
    return "?";
}

AblationResult run_ablation(AblationProtocol proto, const RunConfig& base,
                            const Dataset& train_data, const Dataset& test_data) {
    std::vector<std::pair<std::string, RunConfig>> conditions;

    switch (proto) {
        case AblationProtocol::SparsitySweep: {
            for (double density : {1.0, 0.5, 0.2}) {
                for (bool learnable : {false, true}) {
                    RunConfig rc = base;
                    rc.net.sparsity = 1.0 - density;
                    rc.net.delay_init = DelayInit::Uniform;
                    rc.learn.delays_in = learnable;
                    rc.learn.delays_rec = learnable;
                    std::ostringstream name;
                    name << "density=" << density << ",delays="
                         << (learnable ? "learnable" : "fixed");
                    conditions.emplace_back(name.str(), rc);
                }
            }
            break;
        }
        case AblationProtocol::FixedVsLearnable: {
            for (bool learnable : {false, true}) {
                RunConfig rc = base;
                rc.net.delay_init = DelayInit::Uniform;
                rc.learn.delays_in = learnable;
                rc.learn.delays_rec = learnable;
                conditions.emplace_back(learnable ? "learnable" : "fixed", rc);
            }
            break;
        }
        case AblationProtocol::DelayPlacement: {
            for (DelayMode mode : {DelayMode::Synaptic, DelayMode::Axonal}) {
                for (const char* place : {"input", "recurrent", "both"}) {
                    RunConfig rc = base;
                    rc.net.recurrent = true;
                    rc.net.delay_mode = mode;
                    rc.net.delays_on_input = std::strcmp(place, "recurrent") != 0;
                    rc.net.delays_on_recurrent = std::strcmp(place, "input") != 0;
                    conditions.emplace_back(to_string(mode) + ":" + place, rc);
                }
            }
            break;
        }
        case AblationProtocol::WeightsOnlyWidth: {
            for (int width : {16, 32, 64, 128}) {
                RunConfig rc = base;
                rc.net.n_hidden = width;
                rc.net.delay_mode = DelayMode::None;
                conditions.emplace_back("width=" + std::to_string(width), rc);
            }
            break;
        }
    }

    AblationResult res;
    for (const auto& [name, rc] : conditions) {
        std::vector<double> accs;
        for (int r = 0; r < base.repeats; ++r) {
            RunConfig run = rc;
            run.net.seed = base.net.seed + static_cast<std::uint64_t>(r);  // shared across conditions
            const TrainResult tr = train(run, train_data, nullptr);
            const double acc = evaluate(tr.params, run.net, test_data, run.threads);
            res.rows.push_back({to_string(proto), name, run.net.seed, acc});
            accs.push_back(acc);
        }
        AblationSummary s;
        s.condition = name;
        if (accs.size() >= 2) {
            auto [mean, hw] = confidence_interval(accs);
            s.mean = mean;
            s.ci_halfwidth = hw;
        } else {
            s.mean = accs.empty() ? 0.0 : accs[0];
        }
        res.summary.push_back(s);
    }
    return res;
}

void write_ablation_csv(const AblationResult& res, const std::filesystem::path& rows_path,
                        const std::filesystem::path& summary_path) {
    {
        std::ofstream out(rows_path);
        if (!out) throw InputError("cannot open " + rows_path.string() + " for writing");
        out << "protocol,condition,seed,accuracy\n";
        out.precision(10);
        for (const auto& r : res.rows)
            out << r.protocol << "," << r.condition << "," << r.seed << "," << r.accuracy << "\n";
    }
    {
        std::ofstream out(summary_path);
        if (!out) throw InputError("cannot open " + summary_path.string() + " for writing");
        out << "condition,mean,ci_halfwidth\n";
        out.precision(10);
        for (const auto& s : res.summary)
            out << s.condition << "," << s.mean << "," << s.ci_halfwidth << "\n";
    }
}

namespace {

constexpr char kCkptMagic[4] = {'S', 'N', 'N', 'C'};
constexpr std::uint16_t kCkptVersion = 1;

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_pod(std::ofstream& out, T v) {
    put_bytes(out, &v, sizeof(T));
}

void put_matrix(std::ofstream& out, const Matrix& m) {
    put_pod<std::int32_t>(out, m.rows);
    put_pod<std::int32_t>(out, m.cols);
    put_bytes(out, m.a.data(), m.a.size() * sizeof(double));
}

void put_mask(std::ofstream& out, const MaskMatrix& m) {
    put_pod<std::int32_t>(out, m.rows);
    put_pod<std::int32_t>(out, m.cols);
    put_bytes(out, m.a.data(), m.a.size());
}

template <typename T>
T get_pod(std::ifstream& in, const std::filesystem::path& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError(path.string() + ": truncated checkpoint");
    return v;
}

Matrix get_matrix(std::ifstream& in, const std::filesystem::path& path) {
    const auto rows = get_pod<std::int32_t>(in, path);
    const auto cols = get_pod<std::int32_t>(in, path);
    if (rows < 0 || cols < 0 || static_cast<long long>(rows) * cols > (1LL << 28))
        throw FormatError(path.string() + ": implausible matrix shape");
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.a.data()),
            static_cast<std::streamsize>(m.a.size() * sizeof(double)));
    if (!in) throw FormatError(path.string() + ": truncated matrix payload");
    return m;
}

MaskMatrix get_mask(std::ifstream& in, const std::filesystem::path& path) {
    const auto rows = get_pod<std::int32_t>(in, path);
    const auto cols = get_pod<std::int32_t>(in, path);
    if (rows < 0 || cols < 0 || static_cast<long long>(rows) * cols > (1LL << 30))
        throw FormatError(path.string() + ": implausible mask shape");
    MaskMatrix m(rows, cols, 0);
    if (!m.a.empty()) {
        in.read(reinterpret_cast<char*>(m.a.data()), static_cast<std::streamsize>(m.a.size()));
        if (!in) throw FormatError(path.string() + ": truncated mask payload");
    }
    return m;
}

}  // namespace

void checkpoint_save(const std::filesystem::path& path, const NetworkConfig& cfg,
                     const NetworkParams& params, const OptimizerState& opt, int epochs_done) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    put_bytes(out, kCkptMagic, 4);
    put_pod<std::uint16_t>(out, kCkptVersion);
    put_pod<std::int32_t>(out, epochs_done);

    put_pod<std::int32_t>(out, cfg.n_in);
    put_pod<std::int32_t>(out, cfg.n_hidden);
    put_pod<std::int32_t>(out, cfg.n_out);
    put_pod<std::uint8_t>(out, cfg.recurrent ? 1 : 0);
    put_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.delay_mode));
    put_pod<std::uint8_t>(out, cfg.delays_on_input ? 1 : 0);
    put_pod<std::uint8_t>(out, cfg.delays_on_recurrent ? 1 : 0);
    put_pod<double>(out, cfg.dt_ms);
    put_pod<double>(out, cfg.tau_m_ms);
    put_pod<double>(out, cfg.tau_out_ms);
    put_pod<double>(out, cfg.v_th);
    put_pod<double>(out, cfg.gamma_pd);
    put_pod<double>(out, cfg.sigma);
    put_pod<std::int32_t>(out, cfg.d_max);
    put_pod<double>(out, cfg.lr_w);
    put_pod<double>(out, cfg.lr_d);
    put_pod<double>(out, cfg.sparsity);
    put_pod<double>(out, cfg.w_scale);
    put_pod<std::uint64_t>(out, cfg.seed);
    put_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.feedback));
    put_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.optimizer));
    put_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.delay_init));

    put_matrix(out, params.w_in);
    put_matrix(out, params.w_rec);
    put_matrix(out, params.w_out);
    put_matrix(out, params.b_fb);
    put_matrix(out, params.d_in);
    put_matrix(out, params.d_rec);
    put_mask(out, params.mask_in);
    put_mask(out, params.mask_rec);

    const bool has_opt = cfg.optimizer == OptimizerKind::Adam;
    put_pod<std::uint8_t>(out, has_opt ? 1 : 0);
    if (has_opt) {
        put_pod<std::int64_t>(out, opt.step_count);
        put_matrix(out, opt.m_w_in);
        put_matrix(out, opt.m_w_rec);
        put_matrix(out, opt.m_w_out);
        put_matrix(out, opt.m_d_in);
        put_matrix(out, opt.m_d_rec);
        put_matrix(out, opt.v_w_in);
        put_matrix(out, opt.v_w_rec);
        put_matrix(out, opt.v_w_out);
        put_matrix(out, opt.v_d_in);
        put_matrix(out, opt.v_d_rec);
    }
    if (!out) throw InputError("short write to " + path.string());
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw FormatError(path.string() + ": bad checkpoint magic");
    const auto version = get_pod<std::uint16_t>(in, path);
    if (version != kCkptVersion)
        throw FormatError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));

    Checkpoint ck;
    ck.epochs_done = get_pod<std::int32_t>(in, path);
    ck.cfg.n_in = get_pod<std::int32_t>(in, path);
    ck.cfg.n_hidden = get_pod<std::int32_t>(in, path);
    ck.cfg.n_out = get_pod<std::int32_t>(in, path);
    ck.cfg.recurrent = get_pod<std::uint8_t>(in, path) != 0;
    ck.cfg.delay_mode = static_cast<DelayMode>(get_pod<std::uint8_t>(in, path));
    ck.cfg.delays_on_input = get_pod<std::uint8_t>(in, path) != 0;
    ck.cfg.delays_on_recurrent = get_pod<std::uint8_t>(in, path) != 0;
    ck.cfg.dt_ms = get_pod<double>(in, path);
    ck.cfg.tau_m_ms = get_pod<double>(in, path);
    ck.cfg.tau_out_ms = get_pod<double>(in, path);
    ck.cfg.v_th = get_pod<double>(in, path);
    ck.cfg.gamma_pd = get_pod<double>(in, path);
    ck.cfg.sigma = get_pod<double>(in, path);
    ck.cfg.d_max = get_pod<std::int32_t>(in, path);
    ck.cfg.lr_w = get_pod<double>(in, path);
    ck.cfg.lr_d = get_pod<double>(in, path);
    ck.cfg.sparsity = get_pod<double>(in, path);
    ck.cfg.w_scale = get_pod<double>(in, path);
    ck.cfg.seed = get_pod<std::uint64_t>(in, path);
    ck.cfg.feedback = static_cast<FeedbackMode>(get_pod<std::uint8_t>(in, path));
    ck.cfg.optimizer = static_cast<OptimizerKind>(get_pod<std::uint8_t>(in, path));
    ck.cfg.delay_init = static_cast<DelayInit>(get_pod<std::uint8_t>(in, path));

    ck.params.w_in = get_matrix(in, path);
    ck.params.w_rec = get_matrix(in, path);
    ck.params.w_out = get_matrix(in, path);
    ck.params.b_fb = get_matrix(in, path);
    ck.params.d_in = get_matrix(in, path);
    ck.params.d_rec = get_matrix(in, path);
    ck.params.mask_in = get_mask(in, path);
    ck.params.mask_rec = get_mask(in, path);

    const bool has_opt = get_pod<std::uint8_t>(in, path) != 0;
    if (has_opt) {
        ck.opt.step_count = get_pod<std::int64_t>(in, path);
        ck.opt.m_w_in = get_matrix(in, path);
        ck.opt.m_w_rec = get_matrix(in, path);
        ck.opt.m_w_out = get_matrix(in, path);
        ck.opt.m_d_in = get_matrix(in, path);
        ck.opt.m_d_rec = get_matrix(in, path);
        ck.opt.v_w_in = get_matrix(in, path);
        ck.opt.v_w_rec = get_matrix(in, path);
        ck.opt.v_w_out = get_matrix(in, path);
        ck.opt.v_d_in = get_matrix(in, path);
        ck.opt.v_d_rec = get_matrix(in, path);
    }
    return ck;
}

void check_checkpoint_shapes(const Checkpoint& ck, const NetworkConfig& cfg) {
    auto fail = [](const std::string& what) {
        throw InputError("checkpoint does not match config: " + what);
    };
    if (ck.cfg.n_in != cfg.n_in) fail("n_in differs");
    if (ck.cfg.n_hidden != cfg.n_hidden) fail("n_hidden differs");
    if (ck.cfg.n_out != cfg.n_out) fail("n_out differs");
    if (ck.cfg.recurrent != cfg.recurrent) fail("recurrent flag differs");
    if (ck.cfg.delay_mode != cfg.delay_mode) fail("delay_mode differs");
    if (ck.cfg.d_max != cfg.d_max) fail("d_max differs");
}

std::vector<GroupParamStats> param_stats(const NetworkParams& params) {
    std::vector<GroupParamStats> out;
    auto push = [&](const std::string& name, const Matrix& m, const MaskMatrix* mask) {
        if (m.empty()) return;
        GroupParamStats st;
        st.group = name;
        st.min = 1e300;
        st.max = -1e300;
        double sum = 0.0, ss = 0.0;
        for (int r = 0; r < m.rows; ++r) {
            for (int c = 0; c < m.cols; ++c) {
                if (mask && !mask->empty() && m.rows == mask->rows && (*mask)(r, c) == 0) continue;
                const double x = m(r, c);
                ++st.count;
                sum += x;
                st.min = std::min(st.min, x);
                st.max = std::max(st.max, x);
            }
        }
        if (st.count == 0) return;
        st.mean = sum / st.count;
        for (int r = 0; r < m.rows; ++r)
            for (int c = 0; c < m.cols; ++c) {
                if (mask && !mask->empty() && m.rows == mask->rows && (*mask)(r, c) == 0) continue;
                ss += (m(r, c) - st.mean) * (m(r, c) - st.mean);
            }
        st.stddev = st.count > 1 ? std::sqrt(ss / (st.count - 1)) : 0.0;
        out.push_back(st);
    };
    push("w_in", params.w_in, &params.mask_in);
    push("w_rec", params.w_rec, &params.mask_rec);
    push("w_out", params.w_out, nullptr);
    push("d_in", params.d_in, &params.mask_in);
    push("d_rec", params.d_rec, &params.mask_rec);
    return out;
}

std::vector<long> delay_histogram(const NetworkParams& params, const NetworkConfig& cfg) {
    std::vector<long> hist(cfg.d_max, 0);
    auto add = [&](const Matrix& d, const MaskMatrix& mask) {
        for (int r = 0; r < d.rows; ++r)
            for (int c = 0; c < d.cols; ++c) {
                if (!mask.empty() && d.rows == mask.rows && mask(r, c) == 0) continue;
                ++hist[effective_delay(d(r, c), cfg.d_max)];
            }
    };
    add(params.d_in, params.mask_in);
    add(params.d_rec, params.mask_rec);
    return hist;
}

}  // namespace snn
