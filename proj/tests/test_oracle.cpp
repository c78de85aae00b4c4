#include <cmath>
#include <cstring>
#include <random>

#include <doctest.h>

#include "snn/errors.hpp"
#include "snn/network.hpp"
#include "snn/oracle.hpp"

using namespace snn;

namespace {

NetworkConfig oracle_cfg(int n_in, int n_h, int n_out, DelayMode mode) {
    NetworkConfig cfg;
    cfg.n_in = n_in;
    cfg.n_hidden = n_h;
    cfg.n_out = n_out;
    cfg.delay_mode = mode;
    cfg.dt_ms = 10.0;
    cfg.tau_m_ms = 20.0;
    cfg.sigma = 2.0;
    cfg.d_max = 25;
    cfg.v_th = 0.4;
    cfg.w_scale = 3.0;
    return cfg;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double scale = 0.0;
    for (double x : b) scale = std::max(scale, std::abs(x));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-9 * scale, 1e-300});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("soft spike value integrates the surrogate") {
    CHECK(soft_spike(-1.0, 1.0, 0.3) == 0.0);
    CHECK(soft_spike(0.0, 1.0, 0.3) == 0.0);
    CHECK(soft_spike(1.0, 1.0, 0.3) == doctest::Approx(0.15));
    CHECK(soft_spike(2.0, 1.0, 0.3) == doctest::Approx(0.3));
    CHECK(soft_spike(5.0, 1.0, 0.3) == doctest::Approx(0.3));

    const double h = 1e-6;
    for (double v : {-0.3, 0.2, 0.5, 0.9, 1.1, 1.7, 2.3}) {
        const double fd = (soft_spike(v + h, 1.0, 0.3) - soft_spike(v - h, 1.0, 0.3)) / (2 * h);
        CHECK(fd == doctest::Approx(surrogate_grad(v, 1.0, 0.3)).epsilon(1e-5));
    }
}

TEST_CASE("zero input gives the uniform-softmax loss T log K") {
    NetworkConfig cfg = oracle_cfg(4, 3, 5, DelayMode::Synaptic);
    NetworkParams p = NetworkParams::init(cfg);
    DenseSample s;
    s.T = 17;
    s.n_in = 4;
    s.label = 2;
    s.frames.assign(17 * 4, 0);
    const double loss = smoothed_loss(s, p, cfg);
    CHECK(loss == doctest::Approx(17.0 * std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("kernel mass concentrates in one bin as sigma shrinks") {
    auto center_fraction = [](double sigma) {
        const int W = kernel_halfwidth(sigma);
        double total = 0.0;
        for (int m = -W; m <= W; ++m) total += gauss_kernel(m, 0.0, 0.0, sigma);
        return gauss_kernel(0.0, 0.0, 0.0, sigma) / total;
    };
    const double f05 = center_fraction(0.5);
    const double f02 = center_fraction(0.2);
    const double f01 = center_fraction(0.1);
    CHECK(f02 > f05);
    CHECK(f01 > f02);
    CHECK(f01 > 0.9999);
}

TEST_CASE("smoothed and binary rasters agree for narrow kernels and integral delays") {
    // With a unit-peak kernel and integral delays the smoothed reads differ
    // from the binary frames only by the sub-percent tail bleed. Whenever the
    // binary trajectory clears the threshold by more than the accumulated
    // read error, the rasters must be identical; random inputs land in that
    // regime almost always at this sigma.
    NetworkConfig cfg;
    cfg.n_in = 6;
    cfg.n_hidden = 4;
    cfg.n_out = 3;
    cfg.delay_mode = DelayMode::Synaptic;
    cfg.delay_init = DelayInit::Zero;
    cfg.d_max = 25;
    cfg.sigma = 0.3989422804014327;  // unit peak, well under the 0.5 regime
    cfg.v_th = 1.0;
    cfg.w_scale = 1.5;

    const int T = 40;
    const int W = kernel_halfwidth(cfg.sigma);
    const double shift = cfg.delay_halfspan();  // zero delay parameter
    int provable = 0, agreed = 0;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u, 9u, 10u}) {
        cfg.seed = seed;
        NetworkParams p = NetworkParams::init(cfg);
        DenseSample s = random_spike_sample(T, 6, 0.06, 0, seed * 31 + 7);
        const ForwardResult binary = forward_sample(s, p, cfg);
        const Tape tape = smoothed_forward(s, p, cfg);
        const bool same = std::memcmp(binary.raster.data(), tape.z.data(), tape.z.size()) == 0;
        if (same) ++agreed;

        // per-channel read error, then the worst-case membrane error recursion
        std::vector<double> delta(static_cast<std::size_t>(T) * 6, 0.0);
        for (int t = 0; t < T; ++t) {
            for (int i = 0; i < 6; ++i) {
                double read = 0.0;
                for (int tk = 0; tk < T; ++tk) {
                    const double u = t - tk - shift;
                    if (std::abs(u) <= W && s.at(tk, i))
                        read += gauss_kernel(t, tk, shift, cfg.sigma);
                }
                const int eff_tk = t - static_cast<int>(shift);
                const double bin = (eff_tk >= 0 && s.at(eff_tk, i)) ? 1.0 : 0.0;
                delta[static_cast<std::size_t>(t) * 6 + i] = std::abs(read - bin);
            }
        }
        bool margin_ok = true;
        std::vector<double> err(4, 0.0);
        NetworkState st(cfg);
        const EffectiveDelays eff = build_effective_delays(p, cfg);
        for (int t = 0; t < T && margin_ok; ++t) {
            lif_step(st, s.frame(t), p, cfg, eff);
            for (int j = 0; j < 4; ++j) {
                double d = 0.0;
                for (int i = 0; i < 6; ++i)
                    d += std::abs(p.w_in(j, i)) * delta[static_cast<std::size_t>(t) * 6 + i];
                err[j] = cfg.alpha() * err[j] + d;
                if (std::abs(st.v[j] - cfg.v_th) <= err[j]) margin_ok = false;
            }
        }
        if (margin_ok) {
            ++provable;
            CHECK(same);
        }
    }
    // the margin condition is the norm, not the exception
    CHECK(provable >= 7);
    CHECK(agreed >= provable);
}

TEST_CASE("reverse-mode gradients match central differences on every smooth parameter") {
    NetworkConfig cfg = oracle_cfg(3, 2, 2, DelayMode::Synaptic);
    cfg.seed = 71;
    NetworkParams p = NetworkParams::init(cfg);
    DenseSample s = random_spike_sample(10, 3, 0.3, 1, 13);

    const Tape tape = smoothed_forward(s, p, cfg);
    const ParamGrads oracle = bptt_grad(tape, p, cfg);
    LearnFlags learn;
    const auto sel = all_learnable_params(p, cfg, learn);
    const FiniteDiffResult fd = finite_diff_grad(s, p, cfg, sel, 1e-3);

    int used = 0;
    double scale = 0.0;
    for (std::size_t i = 0; i < sel.size(); ++i)
        scale = std::max(scale, std::abs(grad_entry(oracle, sel[i])));
    for (std::size_t i = 0; i < sel.size(); ++i) {
        if (fd.excluded[i]) continue;
        ++used;
        const double a = grad_entry(oracle, sel[i]);
        const double b = fd.grad[i];
        const double denom = std::max({std::abs(a), std::abs(b), 1e-6 * scale, 1e-300});
        CHECK(std::abs(a - b) / denom < 1e-5);
    }
    CHECK(used > static_cast<int>(sel.size()) / 2);
}

TEST_CASE("central differences are exact on a quadratic and symmetric in h") {
    auto f = [](double x) { return x * x; };
    const double h = 1e-3;
    const double fd = (f(3.0 + h) - f(3.0 - h)) / (2 * h);
    CHECK(fd == doctest::Approx(6.0).epsilon(1e-9));

    NetworkConfig cfg = oracle_cfg(3, 2, 2, DelayMode::Synaptic);
    cfg.seed = 5;
    NetworkParams p = NetworkParams::init(cfg);
    DenseSample s = random_spike_sample(8, 3, 0.3, 0, 3);
    double* th = &p.d_in(0, 0);
    const double orig = *th;
    *th = orig + h;
    const double lp = smoothed_loss(s, p, cfg);
    *th = orig - h;
    const double lm = smoothed_loss(s, p, cfg);
    *th = orig;
    // swapping the sign of h swaps the roles of the two evaluations exactly
    CHECK((lp - lm) / (2 * h) == (lm - lp) / (2 * -h));
}

TEST_CASE("online rule equals reverse mode on feedforward networks") {
    for (DelayMode mode : {DelayMode::None, DelayMode::Synaptic, DelayMode::Axonal}) {
        NetworkConfig cfg = oracle_cfg(6, 4, 3, mode);
        cfg.seed = 100 + static_cast<int>(mode);
        NetworkParams p = NetworkParams::init(cfg);
        DenseSample s = random_spike_sample(25, 6, 0.25, 1, 500 + static_cast<int>(mode));

        const Tape tape = smoothed_forward(s, p, cfg);
        OnlineOptions opt;
        const ParamGrads online = online_from_tape(tape, p, cfg, opt);
        const ParamGrads oracle = bptt_grad(tape, p, cfg);

        LearnFlags learn;
        std::vector<double> a, b;
        for (const auto& ps : all_learnable_params(p, cfg, learn)) {
            a.push_back(grad_entry(online, ps));
            b.push_back(grad_entry(oracle, ps));
        }
        CHECK(max_rel_err(a, b) < 1e-10);
        CHECK(cosine(a, b) > 1.0 - 1e-12);

        // sanity: the comparison is not vacuous
        double norm = 0.0;
        for (double x : b) norm += x * x;
        CHECK(norm > 0.0);
    }
}

TEST_CASE("recurrent networks: online approximation stays directionally aligned") {
    NetworkConfig cfg = oracle_cfg(6, 4, 3, DelayMode::Synaptic);
    cfg.recurrent = true;
    cfg.seed = 42;
    NetworkParams p = NetworkParams::init(cfg);
    DenseSample s = random_spike_sample(30, 6, 0.25, 2, 77);

    const Tape tape = smoothed_forward(s, p, cfg);
    OnlineOptions opt;
    const ParamGrads online = online_from_tape(tape, p, cfg, opt);
    const ParamGrads oracle = bptt_grad(tape, p, cfg);

    // the readout path is exact even with recurrence
    std::vector<double> ao(online.w_out.a), bo(oracle.w_out.a);
    CHECK(max_rel_err(ao, bo) < 1e-10);

    // hidden-layer gradients are approximate; record the alignment
    LearnFlags learn;
    std::vector<double> a, b;
    for (const auto& ps : all_learnable_params(p, cfg, learn)) {
        if (ps.group == ParamGroup::WOut) continue;
        a.push_back(grad_entry(online, ps));
        b.push_back(grad_entry(oracle, ps));
    }
    const double cos = cosine(a, b);
    MESSAGE("recurrent online-vs-oracle cosine: ", cos);
    CHECK(cos > 0.8);
    CHECK(cos < 1.0);  // genuinely approximate
}

TEST_CASE("oracle runs are bit-deterministic") {
    NetworkConfig cfg = oracle_cfg(5, 3, 2, DelayMode::Synaptic);
    cfg.recurrent = true;
    cfg.seed = 9;
    NetworkParams p = NetworkParams::init(cfg);
    DenseSample s = random_spike_sample(20, 5, 0.3, 0, 1);

    const Tape t1 = smoothed_forward(s, p, cfg);
    const Tape t2 = smoothed_forward(s, p, cfg);
    CHECK(t1.loss == t2.loss);
    CHECK(t1.v == t2.v);
    const ParamGrads g1 = bptt_grad(t1, p, cfg);
    const ParamGrads g2 = bptt_grad(t2, p, cfg);
    CHECK(g1.w_in.a == g2.w_in.a);
    CHECK(g1.d_in.a == g2.d_in.a);
    CHECK(g1.w_rec.a == g2.w_rec.a);
}

TEST_CASE("gradcheck passes healthy code and catches a corrupted recursion") {
    NetworkConfig cfg = oracle_cfg(6, 4, 3, DelayMode::Synaptic);
    cfg.seed = 2024;
    GradcheckOptions opt;
    opt.seeds = 5;

    const GradcheckResult good = run_gradcheck(cfg, opt);
    CHECK(good.pass);
    CHECK(good.worst_w_rel <= 1e-4);
    CHECK(good.worst_w_cos >= 0.9999);
    CHECK(good.worst_d_cos >= 0.99);

    // report covers every unmasked learnable parameter
    const std::size_t expected = 6 * 4 + 3 * 4 + 4 * 6;  // w_in + w_out + d_in
    CHECK(good.report.rows.size() == expected);

    GradcheckOptions bad = opt;
    bad.debug_alpha_scale = 1.05;
    const GradcheckResult corrupted = run_gradcheck(cfg, bad);
    CHECK_FALSE(corrupted.pass);

    NetworkConfig big = cfg;
    big.n_hidden = 4096;
    CHECK_THROWS_AS(run_gradcheck(big, opt), InputError);
}

TEST_CASE("gradcheck axonal mode") {
    NetworkConfig cfg = oracle_cfg(6, 4, 3, DelayMode::Axonal);
    cfg.seed = 77;
    GradcheckOptions opt;
    opt.seeds = 5;
    const GradcheckResult res = run_gradcheck(cfg, opt);
    CHECK(res.pass);
    CHECK(res.worst_d_cos >= 0.95);
}
