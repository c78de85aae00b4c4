#include "snn/config.hpp"

#include <cmath>
#include <sstream>

#include "snn/errors.hpp"

namespace snn {

std::string to_string(DelayMode m) {
    switch (m) {
        case DelayMode::None: return "none";
        case DelayMode::Axonal: return "axonal";
        case DelayMode::Synaptic: return "synaptic";
    }
    return "?";
}

std::string to_string(FeedbackMode m) {
    return m == FeedbackMode::Symmetric ? "symmetric" : "random";
}

std::string to_string(OptimizerKind m) { return m == OptimizerKind::Sgd ? "sgd" : "adam"; }

std::string to_string(DelayInit m) { return m == DelayInit::Uniform ? "uniform" : "zero"; }

double decay_factor(double tau_ms, double dt_ms) {
    if (!(tau_ms > 0.0) || !(dt_ms > 0.0)) {
        std::ostringstream os;
        os << "decay_factor requires tau > 0 and dt > 0 (got tau=" << tau_ms
           << ", dt=" << dt_ms << ")";
        throw ConfigError(os.str());
    }
    return std::exp(-dt_ms / tau_ms);
}

int effective_delay(double d_param, int d_max) {
    const double half = (d_max - 1) / 2.0;
    if (!(d_param >= -half && d_param <= half)) {
        std::ostringstream os;
        os << "delay parameter " << d_param << " outside clamp range +-" << half
           << " (clamping failed upstream)";
        throw std::logic_error(os.str());
    }
    const int off = static_cast<int>(std::round(d_param) + half);
    return off;
}

void NetworkConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
    if (n_in < 1) fail("n_in must be >= 1");
    if (n_hidden < 1) fail("n_hidden must be >= 1");
    if (n_out < 1) fail("n_out must be >= 1");
    if (!(dt_ms > 0.0)) fail("dt_ms must be > 0");
    if (!(tau_m_ms > 0.0)) fail("tau_m_ms must be > 0");
    if (!(tau_out_ms > 0.0)) fail("tau_out_ms must be > 0");
    if (!(v_th > 0.0)) fail("v_th must be > 0");
    if (!(gamma_pd > 0.0)) fail("gamma_pd must be > 0");
    if (!(sigma > 0.0)) fail("sigma must be > 0");
    if (d_max < 1) fail("d_max must be >= 1");
    if (d_max % 2 == 0) fail("d_max must be odd so the zero-delay endpoint is an integer");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) fail("sparsity must lie in [0,1)");
    if (!(lr_w >= 0.0) || !(lr_d >= 0.0)) fail("learning rates must be >= 0");
    if (!(w_scale > 0.0)) fail("w_scale must be > 0");
    const double a = alpha();
    const double k = kappa();
    if (!(a > 0.0 && a < 1.0)) fail("alpha out of (0,1)");
    if (!(k > 0.0 && k < 1.0)) fail("kappa out of (0,1)");
}

}  // namespace snn
