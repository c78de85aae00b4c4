#include "snn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "snn/errors.hpp"

namespace snn {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'N', 'E'};
constexpr std::uint16_t kVersion = 1;

[[noreturn]] void format_fail(const std::filesystem::path& path, std::size_t offset,
                              const std::string& what) {
    std::ostringstream os;
    os << path.string() << ": " << what << " (byte offset " << offset << ")";
    throw FormatError(os.str());
}

template <typename T>
void put(std::string& buf, T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off, const std::filesystem::path& path,
       const char* what) {
    if (off + sizeof(T) > buf.size()) format_fail(path, off, std::string("truncated ") + what);
    T value;
    std::memcpy(&value, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return value;
}

}  // namespace

EventSample read_sample(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open sample file " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t off = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        format_fail(path, 0, "bad magic, expected SNNE");
    off = 4;

    EventSample s;
    const auto version = take<std::uint16_t>(buf, off, path, "version");
    if (version != kVersion) {
        std::ostringstream os;
        os << "unsupported version " << version;
        format_fail(path, off - 2, os.str());
    }
    s.label = take<std::uint16_t>(buf, off, path, "label");
    s.duration_ms = take<float>(buf, off, path, "duration");
    const auto n_events = take<std::uint32_t>(buf, off, path, "event count");

    s.events.reserve(n_events);
    float prev_time = -1.0f;
    for (std::uint32_t i = 0; i < n_events; ++i) {
        const std::size_t ev_off = off;
        EventSample::Event ev;
        ev.time_ms = take<float>(buf, off, path, "event time");
        ev.unit = take<std::uint16_t>(buf, off, path, "event unit");
        if (ev.time_ms < prev_time) format_fail(path, ev_off, "events not sorted by time");
        if (ev.time_ms < 0.0f || ev.time_ms > s.duration_ms)
            format_fail(path, ev_off, "event time outside [0, duration]");
        prev_time = ev.time_ms;
        s.events.push_back(ev);
    }
    if (off != buf.size()) format_fail(path, off, "trailing bytes after last event");
    return s;
}

void write_sample(const EventSample& sample, const std::filesystem::path& path) {
    std::string buf;
    buf.reserve(16 + sample.events.size() * 6);
    buf.append(kMagic, 4);
    put<std::uint16_t>(buf, kVersion);
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(sample.label));
    put<float>(buf, sample.duration_ms);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(sample.events.size()));
    for (const auto& ev : sample.events) {
        put<float>(buf, ev.time_ms);
        put<std::uint16_t>(buf, ev.unit);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw InputError("short write to " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.split = j.at("split").get<std::string>();
        m.n_classes = j.at("n_classes").get<int>();
        m.n_channels = j.at("n_channels").get<int>();
        for (const auto& e : j.at("samples")) {
            ManifestEntry ent;
            ent.file = e.at("file").get<std::string>();
            ent.label = e.at("label").get<int>();
            m.samples.push_back(ent);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": manifest field error: " + e.what());
    }
    for (const auto& e : m.samples)
        if (e.label < 0 || e.label >= m.n_classes)
            throw FormatError(path.string() + ": label " + std::to_string(e.label) +
                              " outside [0, n_classes) for " + e.file);
    return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["name"] = m.name;
    j["split"] = m.split;
    j["n_classes"] = m.n_classes;
    j["n_channels"] = m.n_channels;
    j["samples"] = nlohmann::json::array();
    for (const auto& e : m.samples) j["samples"].push_back({{"file", e.file}, {"label", e.label}});
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

EventSample bin_spatial(const EventSample& sample, int factor, int src_channels) {
    if (factor < 1) throw InputError("bin_spatial factor must be >= 1");
    if (src_channels < factor) throw InputError("bin_spatial needs src_channels >= factor");
    const int n_bins = src_channels / factor;
    EventSample out = sample;
    for (auto& ev : out.events)
        ev.unit = static_cast<std::uint16_t>(std::min<int>(ev.unit / factor, n_bins - 1));
    return out;
}

DenseSample subsample_temporal(const EventSample& sample, double frame_ms, int n_channels) {
    if (!(frame_ms > 0.0)) throw InputError("subsample_temporal requires frame_ms > 0");
    DenseSample d;
    d.label = sample.label;
    d.n_in = n_channels;
    d.T = static_cast<int>(std::ceil(sample.duration_ms / frame_ms));
    d.frames.assign(static_cast<std::size_t>(d.T) * n_channels, 0);
    for (const auto& ev : sample.events) {
        int f = static_cast<int>(std::floor(ev.time_ms / frame_ms));
        if (f >= d.T) f = d.T - 1;  // event at exactly duration_ms
        if (f < 0 || static_cast<int>(ev.unit) >= n_channels) continue;
        d.frames[static_cast<std::size_t>(f) * n_channels + ev.unit] = 1;
    }
    return d;
}

MaskMatrix gen_sparsity_mask(int rows, int cols, double density, std::uint64_t seed) {
    if (!(density > 0.0 && density <= 1.0))
        throw InputError("gen_sparsity_mask density must lie in (0,1]");
    MaskMatrix m(rows, cols, 0);
    const std::size_t total = m.a.size();
    const auto n_ones =
        static_cast<std::size_t>(std::llround(static_cast<double>(total) * density));
    std::vector<std::uint32_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0u);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < n_ones && i < total; ++i) m.a[idx[i]] = 1;
    return m;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, int bin_factor, double frame_ms) {
    const DatasetManifest m = read_manifest(manifest_path);
    const auto dir = manifest_path.parent_path();

    Dataset ds;
    ds.n_classes = m.n_classes;
    ds.n_in = bin_factor > 1 ? m.n_channels / bin_factor : m.n_channels;
    ds.samples.reserve(m.samples.size());
    for (const auto& ent : m.samples) {
        const auto path = dir / ent.file;
        EventSample ev = read_sample(path);
        if (ev.label != ent.label)
            throw FormatError(path.string() + ": label disagrees with manifest");
        for (const auto& e : ev.events)
            if (static_cast<int>(e.unit) >= m.n_channels)
                throw FormatError(path.string() + ": unit " + std::to_string(e.unit) +
                                  " >= manifest n_channels " + std::to_string(m.n_channels));
        if (bin_factor > 1) ev = bin_spatial(ev, bin_factor, m.n_channels);
        ds.samples.push_back(subsample_temporal(ev, frame_ms, ds.n_in));
    }
    return ds;
}

DatasetManifest synth_coincidence(int n_pairs, int gap, int t_total, std::uint64_t seed,
                                  const std::filesystem::path& out_dir, const std::string& split,
                                  double frame_ms, int tail_margin) {
    if (n_pairs < 1) throw InputError("synth_coincidence needs n_pairs >= 1");
    if (gap < 0 || gap >= t_total) throw InputError("synth_coincidence needs 0 <= gap < t_total");
    if (tail_margin < 1) throw InputError("synth_coincidence needs tail_margin >= 1");

    std::filesystem::create_directories(out_dir);
    DatasetManifest m;
    m.name = "coincidence";
    m.split = split;
    m.n_classes = 2;
    m.n_channels = 2;

    std::mt19937_64 rng(seed);
    const int margin = 1;
    const int hi = t_total - gap - tail_margin - 1;
    std::uniform_int_distribution<int> t1_dist(margin, std::max(margin, hi));

    int file_idx = 0;
    for (int p = 0; p < n_pairs; ++p) {
        const int t1 = t1_dist(rng);
        for (int label = 0; label < 2; ++label) {
            // class 1: channel 0 leads by `gap`; class 0 mirrors the order
            const int t_ch0 = label == 1 ? t1 : t1 + gap;
            const int t_ch1 = label == 1 ? t1 + gap : t1;
            EventSample s;
            s.label = label;
            s.duration_ms = static_cast<float>(t_total * frame_ms);
            s.events.push_back({static_cast<float>(t_ch0 * frame_ms), 0});
            s.events.push_back({static_cast<float>(t_ch1 * frame_ms), 1});
            std::sort(s.events.begin(), s.events.end(),
                      [](const EventSample::Event& a, const EventSample::Event& b) {
                          return a.time_ms < b.time_ms;
                      });
            std::ostringstream name;
            name << split << "_" << std::setw(5) << std::setfill('0') << file_idx++ << ".snne";
            write_sample(s, out_dir / name.str());
            m.samples.push_back({name.str(), label});
        }
    }
    write_manifest(m, out_dir / "manifest.json");
    return m;
}

}  // namespace snn
