#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snn/matrix.hpp"

namespace snn {

// One labeled spike-train recording as (time, unit) events.
struct EventSample {
    struct Event {
        float time_ms = 0.0f;
        std::uint16_t unit = 0;
    };
    std::vector<Event> events;  // sorted by time ascending
    int label = 0;
    float duration_ms = 0.0f;
};

// Binary frame tensor [T x n_in] produced by temporal subsampling.
struct DenseSample {
    int T = 0;
    int n_in = 0;
    std::vector<std::uint8_t> frames;  // row-major, frames[t*n_in + c]
    int label = 0;

    std::uint8_t at(int t, int c) const { return frames[static_cast<std::size_t>(t) * n_in + c]; }
    const std::uint8_t* frame(int t) const { return frames.data() + static_cast<std::size_t>(t) * n_in; }
    std::uint8_t* frame(int t) { return frames.data() + static_cast<std::size_t>(t) * n_in; }
};

struct ManifestEntry {
    std::string file;  // relative to the manifest's directory
    int label = 0;
};

struct DatasetManifest {
    std::string name;
    std::string split;
    int n_classes = 0;
    int n_channels = 0;
    std::vector<ManifestEntry> samples;
};

// Fully loaded dataset after binning and subsampling.
struct Dataset {
    int n_classes = 0;
    int n_in = 0;
    std::vector<DenseSample> samples;
};

// Binary sample file, little-endian:
//   magic "SNNE" | version u16=1 | label u16 | duration_ms f32 | n_events u32
//   | n_events x (time_ms f32, unit u16)
EventSample read_sample(const std::filesystem::path& path);
void write_sample(const EventSample& sample, const std::filesystem::path& path);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

// unit u -> min(u/factor, n_bins-1) with n_bins = src_channels/factor (floor).
// The clamp folds the residual top channels into the last bin.
EventSample bin_spatial(const EventSample& sample, int factor, int src_channels);

// Frame f, channel c is 1 iff any event lands in [f*frame_ms, (f+1)*frame_ms).
// An event at exactly duration_ms folds into the last frame.
DenseSample subsample_temporal(const EventSample& sample, double frame_ms, int n_channels);

// Exactly round(rows*cols*density) ones placed uniformly at random.
MaskMatrix gen_sparsity_mask(int rows, int cols, double density, std::uint64_t seed);

// Loads every manifest sample, validates it, and runs the bin/subsample
// pipeline. bin_factor 1 keeps channels as-is.
Dataset load_dataset(const std::filesystem::path& manifest_path, int bin_factor, double frame_ms);

// Two-channel two-class timing task. Class 1: channel 0 spikes at t1 and
// channel 1 at t1+gap; class 0 mirrors the order (channel 1 leads). Only a
// relative delay of about `gap` lets a coincidence detector split the classes;
// with gap=0 the classes are identical. tail_margin reserves frames after the
// late spike so that delayed arrivals still land inside the sample. Writes
// sample files plus a manifest.json under out_dir and returns the manifest.
DatasetManifest synth_coincidence(int n_pairs, int gap, int t_total, std::uint64_t seed,
                                  const std::filesystem::path& out_dir,
                                  const std::string& split = "train", double frame_ms = 10.0,
                                  int tail_margin = 1);

}  // namespace snn
