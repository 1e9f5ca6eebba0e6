#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eitnet/protocol.hpp"
#include "eitnet/tensor.hpp"

namespace eitnet {

struct CameraSpec {
  std::uint16_t camera_id = 1;
  std::int64_t frame_period_us = 40'000;
  std::int64_t clock_offset_us = 0;
  double jitter_std_us = 0.0;
  double drop_probability = 0.0;

  void validate() const;
  bool operator==(const CameraSpec&) const = default;
};

/// One camera per line: "id=1 period_us=40000 offset_us=-250 jitter_us=800
/// drop_prob=0.05". Fields are separated by spaces or commas; '#' starts a
/// comment. Only id is required. Throws std::invalid_argument with the line
/// number on malformed input or duplicate ids.
std::vector<CameraSpec> parse_camera_specs(std::istream& is);
std::vector<CameraSpec> read_camera_specs(const std::string& path);
std::string format_camera_spec(const CameraSpec& spec);

/// `count` cameras at 25 fps with seeded clock offsets in [-3000, 3000] us,
/// 1 ms jitter and no loss.
std::vector<CameraSpec> default_cameras(std::size_t count, std::uint64_t seed);

/// k x k median with replicate border on a [H, W] frame; k odd, k <= min(H, W).
Tensor median_filter(const Tensor& frame, std::size_t k);

struct ClockSample {
  std::int64_t send_us = 0;     // camera clock
  std::int64_t receive_us = 0;  // hub clock
};

/// Coarse one-way estimate of how far each camera clock runs ahead of the
/// hub: median(send - receive) + min_latency_us, where min_latency_us is the
/// known link latency floor. Needs at least 3 samples per camera.
std::map<std::uint16_t, std::int64_t> calibrate_clocks(
    const std::map<std::uint16_t, std::vector<ClockSample>>& samples,
    std::int64_t min_latency_us = 0);

struct Frame {
  std::uint16_t camera_id = 0;
  std::uint32_t sequence_no = 0;
  std::uint64_t timestamp = 0;    // camera clock
  std::int64_t corrected_us = 0;  // hub clock
  std::int64_t arrival_us = 0;
  Tensor pixels;                  // [H, W], 0..255
};

struct SyncWindow {
  std::int64_t window_index = 0;
  std::int64_t reference_time = 0;  // window_index * window_period
  std::map<std::uint16_t, Frame> frames;
  double completeness = 0.0;
  std::int64_t closed_at_us = 0;
};

/// round(t / period), halves rounded up.
std::int64_t window_index_of(std::int64_t t, std::int64_t period);

/// Groups clock-corrected frames into windows. A window closes once every
/// camera has delivered a frame for a later window or has been silent for
/// more than `silence_periods` window periods. Closed windows come out in
/// increasing index order; frames for an already closed window are dropped
/// late; a second frame from the same camera for an open window replaces the
/// first and is counted as a duplicate.
class Synchronizer {
 public:
  Synchronizer(std::vector<std::uint16_t> cameras, std::map<std::uint16_t, std::int64_t> offsets,
               std::int64_t window_period_us, std::int64_t silence_periods = 2);

  std::int64_t corrected_time(std::uint16_t camera_id, std::uint64_t timestamp) const;

  /// Adds a frame that arrived at hub time now_us; returns windows it closes.
  std::vector<SyncWindow> push(Frame frame, std::int64_t now_us);
  /// Closes whatever the watermark allows at now_us.
  std::vector<SyncWindow> advance(std::int64_t now_us);
  /// Closes every open window.
  std::vector<SyncWindow> flush(std::int64_t now_us);

  std::size_t accepted() const { return accepted_; }
  std::size_t duplicates() const { return duplicates_; }
  std::size_t dropped_late() const { return dropped_late_; }
  std::size_t unknown_cameras() const { return unknown_; }
  std::int64_t window_period() const { return period_; }

 private:
  struct CameraState {
    std::optional<std::int64_t> last_index;
    std::int64_t last_arrival = 0;
  };

  std::vector<SyncWindow> close_through(std::int64_t last, std::int64_t now_us);

  std::map<std::uint16_t, std::int64_t> offsets_;
  std::map<std::uint16_t, CameraState> state_;
  std::map<std::int64_t, SyncWindow> open_;
  std::optional<std::int64_t> last_closed_;
  std::optional<std::int64_t> start_;
  std::int64_t period_;
  std::int64_t silence_;
  std::size_t accepted_ = 0, duplicates_ = 0, dropped_late_ = 0, unknown_ = 0;
};

struct SyncResult {
  std::vector<SyncWindow> windows;
  std::size_t duplicates = 0;
  std::size_t dropped_late = 0;
};

/// Runs frames (in arrival order, arrival_us set) through a Synchronizer.
SyncResult synchronize(std::span<const Frame> frames, std::span<const std::uint16_t> cameras,
                       const std::map<std::uint16_t, std::int64_t>& offsets,
                       std::int64_t window_period_us);

/// Multi-producer FIFO with a fixed capacity. push blocks while full, pop
/// blocks while empty and returns nullopt once closed and drained.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("BoundedQueue: capacity must be >= 1");
  }

  void push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) throw std::logic_error("BoundedQueue: push after close");
    items_.push_back(std::move(item));
    high_water_ = std::max(high_water_, items_.size());
    not_empty_.notify_one();
  }

  bool try_push(T& item) {
    std::lock_guard lock(mutex_);
    if (closed_ || items_.size() >= capacity_) return false;
    items_.push_back(std::move(item));
    high_water_ = std::max(high_water_, items_.size());
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }
  std::size_t high_water() const {
    std::lock_guard lock(mutex_);
    return high_water_;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  std::size_t high_water_ = 0;
  bool closed_ = false;
};

struct FeedbackMessage {
  std::int64_t window_index = 0;
  int label = 0;
  double confidence = 0.0;
  std::int64_t latency_us = 0;

  /// "window_index,label,confidence,latency_us" without a newline.
  std::string csv_line() const;
};

inline constexpr const char* kFeedbackHeader = "window_index,label,confidence,latency_us";

/// A message when the top probability reaches `threshold`. Throws ValueError
/// on an empty, negative, non-finite or non-normalized vector.
std::optional<FeedbackMessage> emit_feedback(std::int64_t window_index,
                                             const Vector& probabilities, double threshold,
                                             std::int64_t latency_us);

struct SimulationConfig {
  std::vector<CameraSpec> cameras;
  std::int64_t duration_us = 2'000'000;
  std::uint64_t seed = 1;
  std::int64_t window_period_us = 0;  // 0: first camera's frame period
  std::uint16_t frame_height = 32;
  std::uint16_t frame_width = 32;
  std::size_t median_window = 3;
  std::int64_t link_latency_us = 2'000;
  std::int64_t latency_jitter_us = 500;  // uniform extra delay in [0, value]
  std::size_t handshake_samples = 15;
  std::size_t queue_capacity = 64;
  bool threaded = false;
  double feedback_threshold = 0.5;

  void validate() const;
  std::int64_t window_period() const;
};

/// A packet on the simulated link. capture_us is the hub-clock capture time
/// the producer aimed for; it is for test oracles and never read by the
/// aggregator.
struct Delivery {
  std::vector<std::uint8_t> bytes;
  std::int64_t arrival_us = 0;
  std::int64_t capture_us = 0;
  std::uint16_t camera_id = 0;
  std::uint32_t sequence_no = 0;
};

struct ProducerOutput {
  std::uint16_t camera_id = 0;
  std::vector<ClockSample> handshake;
  std::vector<Delivery> deliveries;  // packets that survived the link
  std::size_t produced = 0;
  std::size_t dropped_by_link = 0;
};

/// Everything one camera sends over the run. Frames are captured at
/// hub times k * period for k >= 1 up to the duration, shifted by Gaussian
/// jitter truncated at 3 sigma; each is lost with drop_probability. The
/// random stream depends only on (seed, camera_id).
ProducerOutput run_producer(const CameraSpec& spec, const SimulationConfig& config);

/// Class probabilities for a closed window; may throw.
using PipelineHook = std::function<Vector(const SyncWindow&)>;

struct CameraCounts {
  std::uint16_t camera_id = 0;
  std::size_t produced = 0;
  std::size_t delivered = 0;
  std::size_t dropped_by_link = 0;
  std::int64_t true_offset_us = 0;
  std::int64_t estimated_offset_us = 0;
};

struct WindowRecord {
  std::int64_t window_index = 0;
  std::int64_t reference_time = 0;
  std::size_t frames = 0;
  double completeness = 0.0;
  std::int64_t close_latency_us = 0;
  int label = -1;
  double confidence = 0.0;
  std::string error;
};

struct SimulationReport {
  std::uint64_t seed = 0;
  std::int64_t window_period_us = 0;
  bool threaded = false;
  std::vector<CameraCounts> cameras;
  std::size_t dropped_late = 0;
  std::size_t duplicates = 0;
  std::size_t decode_errors = 0;
  std::size_t max_queue_depth = 0;
  std::vector<WindowRecord> windows;
  std::int64_t latency_p50_us = 0;
  std::int64_t latency_p95_us = 0;
  std::int64_t latency_max_us = 0;
  std::vector<FeedbackMessage> feedback;

  std::size_t produced() const;
  std::size_t delivered() const;
  std::size_t dropped_by_link() const;
};

/// Producers feed a bounded queue; the aggregator decodes, calibrates,
/// median-filters, synchronizes and calls `hook` on every closed window.
/// The deterministic mode merges producer output by arrival time on one
/// thread; the threaded mode runs one thread per camera.
SimulationReport run_simulation(const SimulationConfig& config, const PipelineHook& hook = {});

/// Nearest-rank percentile of a nonempty sample; q in [0, 100].
std::int64_t percentile(std::vector<std::int64_t> values, double q);

/// CSV "camera_id,produced,delivered,dropped_by_link,true_offset_us,estimated_offset_us".
void write_counts_csv(std::ostream& os, const SimulationReport& report);
/// CSV "metric,value": window count, late drops, duplicates, decode errors,
/// queue depth and close-latency percentiles.
void write_latency_csv(std::ostream& os, const SimulationReport& report);
/// CSV "window_index,reference_time_us,frames,completeness,close_latency_us,label,confidence,error".
void write_windows_csv(std::ostream& os, const SimulationReport& report);
void write_feedback_csv(std::ostream& os, const SimulationReport& report);

}  // namespace eitnet
