#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "snn/data.hpp"
#include "snn/kvconfig.hpp"
#include "snn/trainer.hpp"

using namespace snn;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const auto out_file =
        fs::temp_directory_path() / ("snn_cli_out_" + std::to_string(counter++) + ".txt");
    const std::string cmd =
        std::string(SNN_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    CliResult res;
    res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(out_file);
    res.output.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return res;
}

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "snn_cli_tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("unknown config keys are fatal and name the key") {
    const CliResult res = run_cli("gradcheck --set lr_delta=0.5");
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("lr_delta") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1, help with 0") {
    CHECK(run_cli("eval").exit_code == 1);           // missing required options
    CHECK(run_cli("no_such_command").exit_code == 1);
    CHECK(run_cli("").exit_code == 1);               // a subcommand is required
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("train --help").exit_code == 0);
}

TEST_CASE("missing dataset exits with the data code and leaves no outputs") {
    const auto out = work_dir() / "train_missing";
    fs::remove_all(out);
    const CliResult res = run_cli(
        "train --set train_manifest=/nonexistent/manifest.json --out " + out.string());
    CHECK(res.exit_code == 2);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("synth, train, eval, inspect round trip") {
    const auto base = work_dir() / "pipeline";
    fs::remove_all(base);
    const auto data_dir = base / "data";

    const CliResult synth = run_cli("synth --out " + data_dir.string() +
                                    " --pairs 12 --test-pairs 6 --gap 5 --t-total 40 --seed 3");
    REQUIRE(synth.exit_code == 0);
    REQUIRE(fs::exists(data_dir / "train" / "manifest.json"));
    REQUIRE(fs::exists(data_dir / "test" / "manifest.json"));

    const auto out = base / "run";
    const std::string common =
        " --set n_in=2 --set n_hidden=2 --set n_out=2 --set delay_mode=synaptic"
        " --set epochs=1 --set batch_size=8 --set v_th=0.8 --set w_scale=1.5"
        " --set train_manifest=" + (data_dir / "train" / "manifest.json").string() +
        " --set test_manifest=" + (data_dir / "test" / "manifest.json").string();
    const CliResult tr = run_cli("train" + common + " --out " + out.string());
    REQUIRE(tr.exit_code == 0);
    CHECK(fs::exists(out / "metrics.csv"));
    CHECK(fs::exists(out / "checkpoint.bin"));
    CHECK(fs::exists(out / "resolved.cfg"));

    // one train and one test row for the single epoch
    std::ifstream metrics(out / "metrics.csv");
    std::string line;
    int train_rows = 0, test_rows = 0;
    while (std::getline(metrics, line)) {
        if (line.find(",train,") != std::string::npos) ++train_rows;
        if (line.find(",test,") != std::string::npos) ++test_rows;
    }
    CHECK(train_rows == 1);
    CHECK(test_rows == 1);

    // resolved snapshot re-parses to the same run configuration
    const RunConfig resolved = run_config_from_kv(parse_kv_file(out / "resolved.cfg"));
    CHECK(resolved.net.n_hidden == 2);
    CHECK(resolved.epochs == 1);
    CHECK(resolved.net.delay_mode == DelayMode::Synaptic);

    const CliResult ev = run_cli("eval --checkpoint " + (out / "checkpoint.bin").string() +
                                 " --manifest " + (data_dir / "test" / "manifest.json").string());
    CHECK(ev.exit_code == 0);
    CHECK(ev.output.find("top1_accuracy=") != std::string::npos);

    const CliResult insp = run_cli("inspect --checkpoint " + (out / "checkpoint.bin").string());
    CHECK(insp.exit_code == 0);
    CHECK(insp.output.find("delay histogram") != std::string::npos);

    // frozen delay rate: histogram identical before and after training
    const auto out2 = base / "run_frozen";
    const CliResult tr2 = run_cli("train" + common + " --set lr_d=0 --out " + out2.string());
    REQUIRE(tr2.exit_code == 0);
    const Checkpoint ck1 = checkpoint_load(out2 / "checkpoint.bin");
    NetworkConfig fresh_cfg = ck1.cfg;
    const NetworkParams fresh = NetworkParams::init(fresh_cfg);
    CHECK(delay_histogram(ck1.params, ck1.cfg) == delay_histogram(fresh, fresh_cfg));
}

TEST_CASE("inspect reports the quantized byte accounting") {
    // FC-16 network over 116 binned channels with synaptic delays
    NetworkConfig cfg;
    cfg.n_in = 116;
    cfg.n_hidden = 16;
    cfg.n_out = 20;
    cfg.delay_mode = DelayMode::Synaptic;
    cfg.seed = 4;
    NetworkParams p = NetworkParams::init(cfg);
    OptimizerState opt = OptimizerState::like(p, cfg.optimizer);
    const auto ck_path = work_dir() / "fc16.bin";
    checkpoint_save(ck_path, cfg, p, opt, 0);

    const CliResult res = run_cli("inspect --checkpoint " + ck_path.string());
    REQUIRE(res.exit_code == 0);
    // w_in: 16*116 params at 8 bits = 1856 bytes
    CHECK(res.output.find("w_in   count=1856     bytes@8-bit=1856") != std::string::npos);
    // d_in: 16*116 params at 5 bits = 1160 bytes
    CHECK(res.output.find("d_in   count=1856     bytes@5-bit=1160") != std::string::npos);

    // no-delay model reports zero delay bytes
    NetworkConfig nod = cfg;
    nod.delay_mode = DelayMode::None;
    NetworkParams p2 = NetworkParams::init(nod);
    const auto ck2 = work_dir() / "fc16_nodelay.bin";
    checkpoint_save(ck2, nod, p2, opt, 0);
    const CliResult res2 = run_cli("inspect --checkpoint " + ck2.string());
    REQUIRE(res2.exit_code == 0);
    CHECK(res2.output.find("delay bytes:       0 (0 params)") != std::string::npos);

    // axonal vs synaptic parameter counts at FC-128
    NetworkConfig ax = cfg;
    ax.n_hidden = 128;
    ax.delay_mode = DelayMode::Axonal;
    NetworkParams p3 = NetworkParams::init(ax);
    const auto ck3 = work_dir() / "fc128_axonal.bin";
    checkpoint_save(ck3, ax, p3, OptimizerState::like(p3, ax.optimizer), 0);
    const CliResult res3 = run_cli("inspect --checkpoint " + ck3.string());
    CHECK(res3.output.find("d_in   count=116") != std::string::npos);

    NetworkConfig sy = ax;
    sy.delay_mode = DelayMode::Synaptic;
    NetworkParams p4 = NetworkParams::init(sy);
    const auto ck4 = work_dir() / "fc128_synaptic.bin";
    checkpoint_save(ck4, sy, p4, OptimizerState::like(p4, sy.optimizer), 0);
    const CliResult res4 = run_cli("inspect --checkpoint " + ck4.string());
    CHECK(res4.output.find("d_in   count=14848") != std::string::npos);
}

TEST_CASE("gradcheck subcommand passes on the default small network") {
    const auto out = work_dir() / "gradcheck";
    fs::remove_all(out);
    const CliResult res = run_cli(
        "gradcheck --set n_in=6 --set n_hidden=4 --set n_out=3 --set delay_mode=synaptic"
        " --set v_th=0.4 --set w_scale=3 --seed 11 --seeds 3 --out " + out.string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("gradcheck: PASS") != std::string::npos);
    CHECK(fs::exists(out / "gradreport.csv"));

    std::ifstream rep(out / "gradreport.csv");
    std::string line;
    int rows = -1;  // header
    while (std::getline(rep, line)) ++rows;
    CHECK(rows == 6 * 4 + 3 * 4 + 4 * 6);
}

TEST_CASE("eval rejects a mismatched manifest") {
    NetworkConfig cfg;
    cfg.n_in = 7;
    cfg.n_hidden = 3;
    cfg.n_out = 2;
    NetworkParams p = NetworkParams::init(cfg);
    const auto ck = work_dir() / "mismatch.bin";
    checkpoint_save(ck, cfg, p, OptimizerState::like(p, cfg.optimizer), 0);

    const auto data_dir = work_dir() / "mismatch_data";
    fs::remove_all(data_dir);
    synth_coincidence(3, 2, 20, 1, data_dir, "test");
    const CliResult res = run_cli("eval --checkpoint " + ck.string() + " --manifest " +
                                  (data_dir / "manifest.json").string());
    CHECK(res.exit_code == 2);
}
