#include "snn/kvconfig.hpp"

#include <fstream>
#include <sstream>

#include "snn/errors.hpp"

namespace snn {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void insert_pair(KVMap& kv, const std::string& line, const std::string& where) {
    const auto eq = line.find('=');
    if (eq == std::string::npos)
        throw ConfigError(where + ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key in '" + line + "'");
    kv[key] = value;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    }
}

}  // namespace

KVMap parse_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path.string());
    KVMap kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        insert_pair(kv, line, path.string() + ":" + std::to_string(lineno));
    }
    return kv;
}

KVMap parse_kv_pairs(const std::vector<std::string>& pairs) {
    KVMap kv;
    for (const auto& p : pairs) insert_pair(kv, p, "override");
    return kv;
}

RunConfig run_config_from_kv(const KVMap& kv) {
    RunConfig run;
    for (const auto& [key, v] : kv) {
        if (key == "n_in") run.net.n_in = static_cast<int>(parse_int(key, v));
        else if (key == "n_hidden") run.net.n_hidden = static_cast<int>(parse_int(key, v));
        else if (key == "n_out") run.net.n_out = static_cast<int>(parse_int(key, v));
        else if (key == "recurrent") run.net.recurrent = parse_bool(key, v);
        else if (key == "delay_mode") {
            if (v == "none") run.net.delay_mode = DelayMode::None;
            else if (v == "axonal") run.net.delay_mode = DelayMode::Axonal;
            else if (v == "synaptic") run.net.delay_mode = DelayMode::Synaptic;
            else throw ConfigError("key 'delay_mode': expected none|axonal|synaptic, got '" + v + "'");
        } else if (key == "delays_on_input") run.net.delays_on_input = parse_bool(key, v);
        else if (key == "delays_on_recurrent") run.net.delays_on_recurrent = parse_bool(key, v);
        else if (key == "dt_ms") run.net.dt_ms = parse_double(key, v);
        else if (key == "tau_m_ms") run.net.tau_m_ms = parse_double(key, v);
        else if (key == "tau_out_ms") run.net.tau_out_ms = parse_double(key, v);
        else if (key == "v_th") run.net.v_th = parse_double(key, v);
        else if (key == "gamma_pd") run.net.gamma_pd = parse_double(key, v);
        else if (key == "sigma") run.net.sigma = parse_double(key, v);
        else if (key == "d_max") run.net.d_max = static_cast<int>(parse_int(key, v));
        else if (key == "lr_w") run.net.lr_w = parse_double(key, v);
        else if (key == "lr_d") run.net.lr_d = parse_double(key, v);
        else if (key == "sparsity") run.net.sparsity = parse_double(key, v);
        else if (key == "w_scale") run.net.w_scale = parse_double(key, v);
        else if (key == "seed") run.net.seed = static_cast<std::uint64_t>(parse_int(key, v));
        else if (key == "feedback") {
            if (v == "symmetric") run.net.feedback = FeedbackMode::Symmetric;
            else if (v == "random") run.net.feedback = FeedbackMode::Random;
            else throw ConfigError("key 'feedback': expected symmetric|random, got '" + v + "'");
        } else if (key == "optimizer") {
            if (v == "sgd") run.net.optimizer = OptimizerKind::Sgd;
            else if (v == "adam") run.net.optimizer = OptimizerKind::Adam;
            else throw ConfigError("key 'optimizer': expected sgd|adam, got '" + v + "'");
        } else if (key == "delay_init") {
            if (v == "uniform") run.net.delay_init = DelayInit::Uniform;
            else if (v == "zero") run.net.delay_init = DelayInit::Zero;
            else throw ConfigError("key 'delay_init': expected uniform|zero, got '" + v + "'");
        } else if (key == "epochs") run.epochs = static_cast<int>(parse_int(key, v));
        else if (key == "batch_size") run.batch_size = static_cast<int>(parse_int(key, v));
        else if (key == "repeats") run.repeats = static_cast<int>(parse_int(key, v));
        else if (key == "learn_weights") run.learn.weights = parse_bool(key, v);
        else if (key == "learn_delays_in") run.learn.delays_in = parse_bool(key, v);
        else if (key == "learn_delays_rec") run.learn.delays_rec = parse_bool(key, v);
        else if (key == "bin_factor") run.bin_factor = static_cast<int>(parse_int(key, v));
        else if (key == "frame_ms") run.frame_ms = parse_double(key, v);
        else if (key == "threads") run.threads = static_cast<int>(parse_int(key, v));
        else if (key == "eval_every") run.eval_every = static_cast<int>(parse_int(key, v));
        else if (key == "experiment_id") run.experiment_id = v;
        else if (key == "train_manifest") run.train_manifest = v;
        else if (key == "test_manifest") run.test_manifest = v;
        else if (key == "out_dir") run.out_dir = v;
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return run;
}

KVMap kv_from_run_config(const RunConfig& run) {
    KVMap kv;
    auto put_num = [&kv](const std::string& k, double x) {
        std::ostringstream s;
        s.precision(17);
        s << x;
        kv[k] = s.str();
    };
    kv["n_in"] = std::to_string(run.net.n_in);
    kv["n_hidden"] = std::to_string(run.net.n_hidden);
    kv["n_out"] = std::to_string(run.net.n_out);
    kv["recurrent"] = run.net.recurrent ? "true" : "false";
    kv["delay_mode"] = to_string(run.net.delay_mode);
    kv["delays_on_input"] = run.net.delays_on_input ? "true" : "false";
    kv["delays_on_recurrent"] = run.net.delays_on_recurrent ? "true" : "false";
    put_num("dt_ms", run.net.dt_ms);
    put_num("tau_m_ms", run.net.tau_m_ms);
    put_num("tau_out_ms", run.net.tau_out_ms);
    put_num("v_th", run.net.v_th);
    put_num("gamma_pd", run.net.gamma_pd);
    put_num("sigma", run.net.sigma);
    kv["d_max"] = std::to_string(run.net.d_max);
    put_num("lr_w", run.net.lr_w);
    put_num("lr_d", run.net.lr_d);
    put_num("sparsity", run.net.sparsity);
    put_num("w_scale", run.net.w_scale);
    kv["seed"] = std::to_string(run.net.seed);
    kv["feedback"] = to_string(run.net.feedback);
    kv["optimizer"] = to_string(run.net.optimizer);
    kv["delay_init"] = to_string(run.net.delay_init);
    kv["epochs"] = std::to_string(run.epochs);
    kv["batch_size"] = std::to_string(run.batch_size);
    kv["repeats"] = std::to_string(run.repeats);
    kv["learn_weights"] = run.learn.weights ? "true" : "false";
    kv["learn_delays_in"] = run.learn.delays_in ? "true" : "false";
    kv["learn_delays_rec"] = run.learn.delays_rec ? "true" : "false";
    kv["bin_factor"] = std::to_string(run.bin_factor);
    put_num("frame_ms", run.frame_ms);
    kv["threads"] = std::to_string(run.threads);
    kv["eval_every"] = std::to_string(run.eval_every);
    if (!run.experiment_id.empty()) kv["experiment_id"] = run.experiment_id;
    if (!run.train_manifest.empty()) kv["train_manifest"] = run.train_manifest;
    if (!run.test_manifest.empty()) kv["test_manifest"] = run.test_manifest;
    if (!run.out_dir.empty()) kv["out_dir"] = run.out_dir;
    return kv;
}

void write_kv_file(const KVMap& kv, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

}  // namespace snn
