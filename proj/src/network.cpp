#include "snn/network.hpp"

#include <sstream>

#include "snn/errors.hpp"

namespace snn {

void lif_step(NetworkState& state, const std::uint8_t* x_frame, const NetworkParams& params,
              const NetworkConfig& cfg, const EffectiveDelays& eff) {
    const int n_in = cfg.n_in;
    const int n_h = cfg.n_hidden;
    if (params.w_in.cols != n_in || static_cast<int>(state.v.size()) != n_h) {
        std::ostringstream os;
        os << "lif_step shape mismatch: frame width " << n_in << " vs w_in cols "
           << params.w_in.cols;
        throw InputError(os.str());
    }

    state.in_buf.push(x_frame);
    if (cfg.recurrent) state.rec_buf.push(state.z.data());

    const double alpha = cfg.alpha();
    const bool dense_in = params.mask_in.empty();

    for (int j = 0; j < n_h; ++j) {
        double drive = 0.0;
        const double* wrow = params.w_in.row(j);
        for (int i = 0; i < n_in; ++i) {
            if (!dense_in && params.mask_in(j, i) == 0) continue;
            if (state.in_buf.at(eff.of_in(j, i), i)) drive += wrow[i];
        }
        if (cfg.recurrent) {
            const double* rrow = params.w_rec.row(j);
            const bool dense_rec = params.mask_rec.empty();
            for (int k = 0; k < n_h; ++k) {
                if (!dense_rec && params.mask_rec(j, k) == 0) continue;
                // recurrent reads lag one extra frame behind the input reads
                if (state.rec_buf.at(eff.of_rec(j, k), k)) drive += rrow[k];
            }
        }
        state.v[j] = alpha * state.v[j] + drive - (state.z[j] ? cfg.v_th : 0.0);
    }
    for (int j = 0; j < n_h; ++j) state.z[j] = state.v[j] > cfg.v_th ? 1 : 0;
    ++state.t;
}

void lif_step(NetworkState& state, const std::uint8_t* x_frame, const NetworkParams& params,
              const NetworkConfig& cfg) {
    lif_step(state, x_frame, params, cfg, build_effective_delays(params, cfg));
}

void readout_step(std::vector<double>& y, const std::uint8_t* z, const NetworkParams& params,
                  const NetworkConfig& cfg) {
    const double kappa = cfg.kappa();
    for (int k = 0; k < cfg.n_out; ++k) {
        double drive = 0.0;
        const double* orow = params.w_out.row(k);
        for (int j = 0; j < cfg.n_hidden; ++j)
            if (z[j]) drive += orow[j];
        y[k] = kappa * y[k] + drive;
    }
}

ForwardResult forward_sample(const DenseSample& sample, const NetworkParams& params,
                             const NetworkConfig& cfg) {
    if (sample.T > 0 && sample.n_in != cfg.n_in) {
        std::ostringstream os;
        os << "sample has " << sample.n_in << " channels, network expects " << cfg.n_in;
        throw InputError(os.str());
    }

    ForwardResult res;
    res.T = sample.T;
    res.n_hidden = cfg.n_hidden;
    res.n_out = cfg.n_out;
    res.raster.assign(static_cast<std::size_t>(sample.T) * cfg.n_hidden, 0);
    res.readout.assign(static_cast<std::size_t>(sample.T) * cfg.n_out, 0.0);

    NetworkState state(cfg);
    const EffectiveDelays eff = build_effective_delays(params, cfg);
    for (int t = 0; t < sample.T; ++t) {
        lif_step(state, sample.frame(t), params, cfg, eff);
        readout_step(state.y, state.z.data(), params, cfg);
        std::memcpy(&res.raster[static_cast<std::size_t>(t) * cfg.n_hidden], state.z.data(),
                    cfg.n_hidden);
        std::memcpy(&res.readout[static_cast<std::size_t>(t) * cfg.n_out], state.y.data(),
                    cfg.n_out * sizeof(double));
    }
    return res;
}

}  // namespace snn
