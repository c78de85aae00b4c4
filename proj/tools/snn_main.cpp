// Command-line front end: train, eval, gradcheck, ablate, synth, inspect.
// Exit codes: 0 success, 1 usage/config, 2 data error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snn/data.hpp"
#include "snn/errors.hpp"
#include "snn/kvconfig.hpp"
#include "snn/learning.hpp"
#include "snn/network.hpp"
#include "snn/oracle.hpp"
#include "snn/trainer.hpp"

namespace fs = std::filesystem;
using namespace snn;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& c, bool with_out = true) {
    cmd->add_option("--config", c.config_path, "key=value config file");
    cmd->add_option("--set", c.overrides, "config overrides, key=value (repeatable)");
    if (with_out) cmd->add_option("--out", c.out_dir, "output directory");
    cmd->add_option("--seed", c.seed, "overrides the config seed");
}

RunConfig resolve_config(const CommonOpts& c) {
    KVMap kv;
    if (!c.config_path.empty()) kv = parse_kv_file(c.config_path);
    for (const auto& [k, v] : parse_kv_pairs(c.overrides)) kv[k] = v;
    RunConfig run = run_config_from_kv(kv);
    if (c.seed >= 0) run.net.seed = static_cast<std::uint64_t>(c.seed);
    if (!c.out_dir.empty()) run.out_dir = c.out_dir;
    return run;
}

void write_snapshot(const RunConfig& run, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_kv_file(kv_from_run_config(run), out_dir / "resolved.cfg");
}

Dataset load_by_manifest(const std::string& manifest, const RunConfig& run) {
    if (manifest.empty()) throw InputError("no manifest path configured");
    if (!fs::exists(manifest)) throw InputError("manifest not found: " + manifest);
    return load_dataset(manifest, run.bin_factor, run.frame_ms);
}

int cmd_train(const CommonOpts& c) {
    RunConfig run = resolve_config(c);
    if (run.out_dir.empty()) throw InputError("train needs --out or out_dir in the config");

    const Dataset train_data = load_by_manifest(run.train_manifest, run);
    Dataset test_data;
    const bool have_test = !run.test_manifest.empty();
    if (have_test) test_data = load_by_manifest(run.test_manifest, run);

    const fs::path out_dir(run.out_dir);
    write_snapshot(run, out_dir);

    const TrainResult tr =
        train(run, train_data, have_test ? &test_data : nullptr, out_dir / "checkpoint.bin");
    write_metrics_csv(tr.metrics, out_dir / "metrics.csv");

    if (!tr.metrics.epochs.empty()) {
        const auto& last = tr.metrics.epochs.back();
        std::printf("epochs=%zu final_train_loss=%.6f final_train_acc=%.4f",
                    tr.metrics.epochs.size(), last.train_loss, last.train_acc);
        if (last.test_acc >= 0.0) std::printf(" final_test_acc=%.4f", last.test_acc);
        std::printf(" wall_s=%.1f\n", tr.metrics.wall_seconds);
    } else {
        std::printf("epochs=0 (initial parameters checkpointed)\n");
        checkpoint_save(out_dir / "checkpoint.bin", run.net, tr.params, tr.opt, 0);
    }
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest, int bin_factor,
             double frame_ms, int threads) {
    const Checkpoint ck = checkpoint_load(ckpt_path);
    if (!fs::exists(manifest)) throw InputError("manifest not found: " + manifest);
    const Dataset data = load_dataset(manifest, bin_factor, frame_ms);
    if (data.n_in != ck.cfg.n_in)
        throw InputError("dataset channels (" + std::to_string(data.n_in) +
                         ") do not match checkpoint n_in (" + std::to_string(ck.cfg.n_in) + ")");
    const double acc = evaluate(ck.params, ck.cfg, data, threads);
    std::printf("samples=%zu top1_accuracy=%.4f\n", data.samples.size(), acc);
    return 0;
}

int cmd_gradcheck(const CommonOpts& c, int seeds, int T) {
    RunConfig run = resolve_config(c);
    GradcheckOptions opt;
    if (seeds > 0) opt.seeds = seeds;
    if (T > 0) opt.T = T;
    const GradcheckResult res = run_gradcheck(run.net, opt);

    if (!run.out_dir.empty()) {
        write_snapshot(run, run.out_dir);
        write_grad_report_csv(res.report, fs::path(run.out_dir) / "gradreport.csv");
    }
    for (const auto& g : res.report.groups)
        std::printf("group %-6s n=%-6d cosine=%.8f max_rel=%.3e mean_rel=%.3e\n", g.group.c_str(),
                    g.n, g.cosine, g.max_rel, g.mean_rel);
    std::printf("%s\n", res.detail.c_str());
    std::printf("gradcheck: %s\n", res.pass ? "PASS" : "FAIL");
    return res.pass ? 0 : 3;
}

int cmd_ablate(const CommonOpts& c, const std::string& protocol) {
    RunConfig run = resolve_config(c);
    if (run.out_dir.empty()) throw InputError("ablate needs --out or out_dir in the config");
    const AblationProtocol proto = ablation_protocol_from_string(protocol);

    const Dataset train_data = load_by_manifest(run.train_manifest, run);
    const Dataset test_data = load_by_manifest(run.test_manifest, run);

    const fs::path out_dir(run.out_dir);
    write_snapshot(run, out_dir);
    const AblationResult res = run_ablation(proto, run, train_data, test_data);
    write_ablation_csv(res, out_dir / "ablation_rows.csv", out_dir / "ablation_summary.csv");
    for (const auto& s : res.summary)
        std::printf("%-32s mean=%.4f ci=%.4f\n", s.condition.c_str(), s.mean, s.ci_halfwidth);
    return 0;
}

int cmd_synth(const std::string& out, int pairs, int test_pairs, int gap, int t_total,
              long long seed, int tail_margin) {
    const fs::path out_dir(out);
    synth_coincidence(pairs, gap, t_total, static_cast<std::uint64_t>(seed), out_dir / "train",
                      "train", 10.0, tail_margin);
    synth_coincidence(test_pairs, gap, t_total, static_cast<std::uint64_t>(seed) + 7919,
                      out_dir / "test", "test", 10.0, tail_margin);
    std::printf("wrote %d train and %d test samples under %s\n", 2 * pairs, 2 * test_pairs,
                out_dir.string().c_str());
    return 0;
}

long ceil_bits_to_bytes(long bits) { return (bits + 7) / 8; }

int cmd_inspect(const std::string& ckpt_path) {
    const Checkpoint ck = checkpoint_load(ckpt_path);
    const NetworkConfig& cfg = ck.cfg;

    std::printf("network: n_in=%d n_hidden=%d n_out=%d recurrent=%s delay_mode=%s d_max=%d\n",
                cfg.n_in, cfg.n_hidden, cfg.n_out, cfg.recurrent ? "yes" : "no",
                to_string(cfg.delay_mode).c_str(), cfg.d_max);
    std::printf("trained epochs: %d\n", ck.epochs_done);

    std::printf("\nparameter groups:\n");
    long weight_params = 0, delay_params = 0;
    long weight_bytes = 0, delay_bytes = 0;
    for (const auto& st : param_stats(ck.params)) {
        const bool is_delay = st.group == "d_in" || st.group == "d_rec";
        const int bits = is_delay ? 5 : 8;
        const long bytes = ceil_bits_to_bytes(st.count * bits);
        std::printf("  %-6s count=%-8ld bytes@%d-bit=%-8ld mean=%+.4f std=%.4f min=%+.4f max=%+.4f\n",
                    st.group.c_str(), st.count, bits, bytes, st.mean, st.stddev, st.min, st.max);
        if (is_delay) {
            delay_params += st.count;
            delay_bytes += bytes;
        } else {
            weight_params += st.count;
            weight_bytes += bytes;
        }
    }

    const long state_count = cfg.n_hidden + cfg.n_out;
    const long state_bytes = state_count * 2;  // 16-bit membrane potentials
    const long in_ring_bytes = ceil_bits_to_bytes(static_cast<long>(cfg.d_max) * cfg.n_in);
    const long rec_ring_bytes =
        cfg.recurrent ? ceil_bits_to_bytes(static_cast<long>(cfg.d_max + 1) * cfg.n_hidden) : 0;

    NetworkParams params_copy = ck.params;
    const EligibilityState es = EligibilityState::make(params_copy, cfg);
    const long trace_count =
        static_cast<long>(es.eps_w_in.size() + es.filt_w_in.size() + es.eps_d_in.size() +
                          es.filt_d_in.size() + es.eps_w_rec.size() + es.filt_w_rec.size() +
                          es.eps_d_rec.size() + es.filt_d_rec.size() + es.filt_z.size());
    const long trace_bytes = trace_count * 2;  // 16-bit, same width as membrane state
    const int W = kernel_halfwidth(cfg.sigma);
    long history_bits = static_cast<long>(cfg.d_max + 2 * W + 1) * cfg.n_in;
    if (cfg.recurrent) history_bits += static_cast<long>(cfg.d_max + 2 * W + 1) * cfg.n_hidden;
    const long history_bytes = ceil_bits_to_bytes(history_bits);

    std::printf("\nstorage (inference), 8-bit weights / 5-bit delays / 16-bit potentials:\n");
    std::printf("  weight bytes:      %ld (%ld params)\n", weight_bytes, weight_params);
    std::printf("  delay bytes:       %ld (%ld params)\n", delay_bytes, delay_params);
    std::printf("  state bytes:       %ld (%ld potentials)\n", state_bytes, state_count);
    std::printf("  spike ring bytes:  %ld input + %ld recurrent\n", in_ring_bytes, rec_ring_bytes);
    std::printf("storage total:       %ld bytes\n",
                weight_bytes + delay_bytes + state_bytes + in_ring_bytes + rec_ring_bytes);

    std::printf("\nlearning-time buffers:\n");
    std::printf("  eligibility/trace bytes: %ld (%ld values)\n", trace_bytes, trace_count);
    std::printf("  kernel history bytes:    %ld\n", history_bytes);
    std::printf("learning total:            %ld bytes\n", trace_bytes + history_bytes);

    std::printf("\ndelay histogram (offset: count):\n  ");
    const auto hist = delay_histogram(ck.params, cfg);
    for (std::size_t b = 0; b < hist.size(); ++b)
        if (hist[b] > 0) std::printf("%zu:%ld ", b, hist[b]);
    std::printf("\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online learning engine for spiking networks with learnable delays"};
    app.require_subcommand(1);

    CommonOpts train_opts, grad_opts, ablate_opts;
    std::string protocol = "fixed_vs_learnable";
    int grad_seeds = 5, grad_T = 25;

    auto* train_cmd = app.add_subcommand("train", "train a network from a config");
    add_common(train_cmd, train_opts);

    std::string eval_ckpt, eval_manifest;
    int eval_bin = 1, eval_threads = 1;
    double eval_frame = 10.0;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest")->required();
    eval_cmd->add_option("--bin-factor", eval_bin, "spatial binning factor");
    eval_cmd->add_option("--frame-ms", eval_frame, "temporal frame size (ms)");
    eval_cmd->add_option("--threads", eval_threads, "evaluation threads");

    auto* grad_cmd = app.add_subcommand("gradcheck", "compare online gradients with the oracles");
    add_common(grad_cmd, grad_opts);
    grad_cmd->add_option("--seeds", grad_seeds, "random nets to test");
    grad_cmd->add_option("--steps", grad_T, "sequence length");

    auto* ablate_cmd = app.add_subcommand("ablate", "run an experiment protocol grid");
    add_common(ablate_cmd, ablate_opts);
    ablate_cmd->add_option("--protocol", protocol,
                           "sparsity_sweep|fixed_vs_learnable|delay_placement|weights_only_width");

    std::string synth_out = "data/coincidence";
    int synth_pairs = 200, synth_test_pairs = 100, synth_gap = 5, synth_t = 40;
    int synth_tail = 1;
    long long synth_seed = 1;
    auto* synth_cmd = app.add_subcommand("synth", "generate the two-channel timing task");
    synth_cmd->add_option("--out", synth_out, "output directory");
    synth_cmd->add_option("--pairs", synth_pairs, "training sample pairs");
    synth_cmd->add_option("--test-pairs", synth_test_pairs, "test sample pairs");
    synth_cmd->add_option("--gap", synth_gap, "timing gap in frames");
    synth_cmd->add_option("--t-total", synth_t, "frames per sample");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    synth_cmd->add_option("--tail-margin", synth_tail, "frames reserved after the late spike");

    std::string inspect_ckpt;
    auto* inspect_cmd = app.add_subcommand("inspect", "summarize a checkpoint");
    inspect_cmd->add_option("--checkpoint", inspect_ckpt, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage problems always exit 1
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_manifest, eval_bin, eval_frame, eval_threads);
        if (grad_cmd->parsed()) return cmd_gradcheck(grad_opts, grad_seeds, grad_T);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_opts, protocol);
        if (synth_cmd->parsed())
            return cmd_synth(synth_out, synth_pairs, synth_test_pairs, synth_gap, synth_t,
                             synth_seed, synth_tail);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_ckpt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
