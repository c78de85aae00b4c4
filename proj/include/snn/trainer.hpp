#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snn/config.hpp"
#include "snn/data.hpp"
#include "snn/learning.hpp"
#include "snn/params.hpp"

namespace snn {

// One experiment: network hyperparameters plus loop controls.
struct RunConfig {
    NetworkConfig net;
    int epochs = 60;
    int batch_size = 16;
    int repeats = 5;  // runs per condition when reporting confidence intervals
    LearnFlags learn;
    int bin_factor = 1;
    double frame_ms = 10.0;
    int threads = 1;  // 1 = single stream; 0 = all cores; results are identical either way
    int eval_every = 1;
    std::string experiment_id;
    std::string train_manifest, test_manifest, out_dir;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0, train_acc = 0.0, test_acc = -1.0, seconds = 0.0;
};

struct GroupParamStats {
    std::string group;
    long count = 0;
    double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
};

struct RunMetrics {
    std::vector<EpochMetrics> epochs;
    double wall_seconds = 0.0;
    std::vector<GroupParamStats> param_stats;
    std::vector<long> delay_hist;  // one bin per integer delay step, pooled over groups
};

struct TrainResult {
    NetworkParams params;
    OptimizerState opt;
    RunMetrics metrics;
};

struct Checkpoint {
    NetworkConfig cfg;
    NetworkParams params;
    OptimizerState opt;
    int epochs_done = 0;
};

// Mean batch gradients over samples order[first, first+count), reduced in
// index order so the result is bit-identical for any thread count.
struct BatchStats {
    double loss_sum = 0.0;
    int correct = 0;
};
BatchStats process_batch(const Dataset& data, const std::vector<int>& order, int first, int count,
                         const NetworkParams& params, const NetworkConfig& cfg,
                         const OnlineOptions& opt, const BatchTables& tables, int threads,
                         ParamGrads& grads_out);

// Full training loop. Writes a checkpoint after every epoch when
// checkpoint_path is non-empty; aborts on a non-finite loss, leaving the last
// healthy checkpoint in place. Passing resume continues an earlier run.
TrainResult train(const RunConfig& run, const Dataset& train_data, const Dataset* test_data,
                  const std::filesystem::path& checkpoint_path = {},
                  const Checkpoint* resume = nullptr);

// Top-1 accuracy under the time-summed softmax prediction rule.
double evaluate(const NetworkParams& params, const NetworkConfig& cfg, const Dataset& data,
                int threads = 1);

// (mean, halfwidth) of the 95% t-distribution confidence interval.
std::pair<double, double> confidence_interval(std::span<const double> values);

void write_metrics_csv(const RunMetrics& metrics, const std::filesystem::path& path);

enum class AblationProtocol { SparsitySweep, FixedVsLearnable, DelayPlacement, WeightsOnlyWidth };

AblationProtocol ablation_protocol_from_string(const std::string& name);
std::string to_string(AblationProtocol p);

struct AblationRow {
    std::string protocol, condition;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
};

struct AblationSummary {
    std::string condition;
    double mean = 0.0, ci_halfwidth = 0.0;
};

struct AblationResult {
    std::vector<AblationRow> rows;
    std::vector<AblationSummary> summary;
};

// Trains the protocol's condition grid with shared seeds across conditions.
AblationResult run_ablation(AblationProtocol proto, const RunConfig& base,
                            const Dataset& train_data, const Dataset& test_data);

void write_ablation_csv(const AblationResult& res, const std::filesystem::path& rows_path,
                        const std::filesystem::path& summary_path);

void checkpoint_save(const std::filesystem::path& path, const NetworkConfig& cfg,
                     const NetworkParams& params, const OptimizerState& opt, int epochs_done);
Checkpoint checkpoint_load(const std::filesystem::path& path);

// Throws InputError when the checkpoint's shapes disagree with cfg.
void check_checkpoint_shapes(const Checkpoint& ck, const NetworkConfig& cfg);

std::vector<GroupParamStats> param_stats(const NetworkParams& params);
std::vector<long> delay_histogram(const NetworkParams& params, const NetworkConfig& cfg);

}  // namespace snn
