#pragma once

#include <cassert>
#include <cstdint>
#include <cstring>
#include <vector>

#include "snn/config.hpp"

namespace snn {

// Circular history of binary frames. Lag 0 is the most recent push; frames
// older than anything pushed read as zero (zero-padded sequence start).
class SpikeRing {
  public:
    SpikeRing() = default;
    SpikeRing(int width, int capacity)
        : width_(width), cap_(capacity), buf_(static_cast<std::size_t>(width) * capacity, 0) {}

    void reset() {
        std::fill(buf_.begin(), buf_.end(), 0);
        head_ = 0;
    }

    void push(const std::uint8_t* frame) {
        head_ = (head_ + 1) % cap_;
        std::memcpy(buf_.data() + static_cast<std::size_t>(head_) * width_, frame, width_);
    }

    void push_zero() {
        head_ = (head_ + 1) % cap_;
        std::memset(buf_.data() + static_cast<std::size_t>(head_) * width_, 0, width_);
    }

    std::uint8_t at(int lag, int idx) const {
        assert(lag >= 0 && lag < cap_);
        const int slot = (head_ - lag % cap_ + cap_) % cap_;
        return buf_[static_cast<std::size_t>(slot) * width_ + idx];
    }

    const std::uint8_t* frame_at(int lag) const {
        const int slot = (head_ - lag % cap_ + cap_) % cap_;
        return buf_.data() + static_cast<std::size_t>(slot) * width_;
    }

    int width() const { return width_; }
    int capacity() const { return cap_; }

  private:
    int width_ = 0;
    int cap_ = 0;
    int head_ = 0;
    std::vector<std::uint8_t> buf_;
};

// Mutable per-sample simulation state. One writer per instance.
struct NetworkState {
    std::vector<double> v;       // hidden membrane potentials
    std::vector<std::uint8_t> z; // hidden spikes emitted this frame
    std::vector<double> y;       // readout potentials (never reset)
    SpikeRing in_buf;            // last d_max input frames
    SpikeRing rec_buf;           // last d_max+1 hidden spike frames (extra -1 lag)
    int t = 0;

    NetworkState() = default;
    explicit NetworkState(const NetworkConfig& cfg)
        : v(cfg.n_hidden, 0.0),
          z(cfg.n_hidden, 0),
          y(cfg.n_out, 0.0),
          in_buf(cfg.n_in, cfg.d_max),
          rec_buf(cfg.recurrent ? cfg.n_hidden : 0, cfg.recurrent ? cfg.d_max + 1 : 1) {}

    void reset() {
        std::fill(v.begin(), v.end(), 0.0);
        std::fill(z.begin(), z.end(), 0);
        std::fill(y.begin(), y.end(), 0.0);
        in_buf.reset();
        rec_buf.reset();
        t = 0;
    }
};

}  // namespace snn
