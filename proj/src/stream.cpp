#include "eitnet/stream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <latch>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "eitnet/csv.hpp"
#include "eitnet/rng.hpp"

namespace eitnet {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

template <typename T>
T parse_field(const std::string& key, const std::string& value, std::size_t line) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (!is || is.peek() != std::char_traits<char>::eof()) {
    throw std::invalid_argument("camera spec line " + std::to_string(line) + ": bad value '" +
                                value + "' for " + key);
  }
  return out;
}

}  // namespace

void CameraSpec::validate() const {
  if (frame_period_us <= 0) {
    throw std::invalid_argument("camera " + std::to_string(camera_id) +
                                ": frame period must be positive");
  }
  if (!(jitter_std_us >= 0.0) || !std::isfinite(jitter_std_us)) {
    throw std::invalid_argument("camera " + std::to_string(camera_id) +
                                ": jitter must be finite and nonnegative");
  }
  if (!(drop_probability >= 0.0 && drop_probability < 1.0)) {
    throw std::invalid_argument("camera " + std::to_string(camera_id) +
                                ": drop probability must be in [0, 1)");
  }
}

std::vector<CameraSpec> parse_camera_specs(std::istream& is) {
  std::vector<CameraSpec> specs;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (const auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream fields(text);
    std::string field;
    CameraSpec spec;
    bool any = false, has_id = false;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("camera spec line " + std::to_string(line) +
                                    ": expected key=value, got '" + field + "'");
      }
      const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
      any = true;
      if (key == "id") {
        const auto id = parse_field<long long>(key, value, line);
        if (id < 0 || id > std::numeric_limits<std::uint16_t>::max()) {
          throw std::invalid_argument("camera spec line " + std::to_string(line) +
                                      ": id out of range");
        }
        spec.camera_id = static_cast<std::uint16_t>(id);
        has_id = true;
      } else if (key == "period_us") {
        spec.frame_period_us = parse_field<std::int64_t>(key, value, line);
      } else if (key == "offset_us") {
        spec.clock_offset_us = parse_field<std::int64_t>(key, value, line);
      } else if (key == "jitter_us") {
        spec.jitter_std_us = parse_field<double>(key, value, line);
      } else if (key == "drop_prob") {
        spec.drop_probability = parse_field<double>(key, value, line);
      } else {
        throw std::invalid_argument("camera spec line " + std::to_string(line) +
                                    ": unknown key '" + key + "'");
      }
    }
    if (!any) continue;
    if (!has_id) {
      throw std::invalid_argument("camera spec line " + std::to_string(line) + ": missing id");
    }
    spec.validate();
    for (const auto& s : specs) {
      if (s.camera_id == spec.camera_id) {
        throw std::invalid_argument("camera spec line " + std::to_string(line) +
                                    ": duplicate id " + std::to_string(spec.camera_id));
      }
    }
    specs.push_back(spec);
  }
  return specs;
}

std::vector<CameraSpec> read_camera_specs(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open camera spec file " + path);
  return parse_camera_specs(is);
}

std::string format_camera_spec(const CameraSpec& spec) {
  return "id=" + std::to_string(spec.camera_id) +
         " period_us=" + std::to_string(spec.frame_period_us) +
         " offset_us=" + std::to_string(spec.clock_offset_us) +
         " jitter_us=" + format_number(spec.jitter_std_us) +
         " drop_prob=" + format_number(spec.drop_probability);
}

std::vector<CameraSpec> default_cameras(std::size_t count, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, 0xCA3E));
  std::vector<CameraSpec> specs;
  for (std::size_t i = 0; i < count; ++i) {
    CameraSpec s;
    s.camera_id = static_cast<std::uint16_t>(i + 1);
    s.clock_offset_us = static_cast<std::int64_t>(rng.below(6001)) - 3000;
    s.jitter_std_us = 1000.0;
    specs.push_back(s);
  }
  return specs;
}

Tensor median_filter(const Tensor& frame, std::size_t k) {
  if (frame.rank() != 2) {
    throw ShapeError("median_filter: expected [H, W], got " + to_string(frame.shape()));
  }
  const std::size_t h = frame.dim(0), w = frame.dim(1);
  if (k == 0 || k % 2 == 0) {
    throw ValueError("median_filter: window " + std::to_string(k) + " must be odd");
  }
  if (k > std::min(h, w)) {
    throw ValueError("median_filter: window " + std::to_string(k) + " exceeds frame " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto clamp = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  Tensor out({h, w});
  std::vector<Scalar> window(k * k);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t n = 0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          window[n++] = frame.at(clamp(static_cast<std::ptrdiff_t>(y) + dy, h),
                                 clamp(static_cast<std::ptrdiff_t>(x) + dx, w));
        }
      }
      const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
      std::nth_element(window.begin(), mid, window.end());
      out.at(y, x) = *mid;
    }
  }
  return out;
}

std::map<std::uint16_t, std::int64_t> calibrate_clocks(
    const std::map<std::uint16_t, std::vector<ClockSample>>& samples,
    std::int64_t min_latency_us) {
  std::map<std::uint16_t, std::int64_t> offsets;
  for (const auto& [camera, list] : samples) {
    if (list.size() < 3) {
      throw ValueError("calibrate_clocks: camera " + std::to_string(camera) + " has " +
                       std::to_string(list.size()) + " samples, need at least 3");
    }
    std::vector<std::int64_t> d;
    d.reserve(list.size());
    for (const auto& s : list) d.push_back(s.send_us - s.receive_us);
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size() / 2;
    const std::int64_t median = d.size() % 2 ? d[m] : std::midpoint(d[m - 1], d[m]);
    offsets[camera] = median + min_latency_us;
  }
  return offsets;
}

std::int64_t window_index_of(std::int64_t t, std::int64_t period) {
  if (period <= 0) throw ValueError("window period must be positive");
  return floor_div(2 * t + period, 2 * period);
}

Synchronizer::Synchronizer(std::vector<std::uint16_t> cameras,
                           std::map<std::uint16_t, std::int64_t> offsets,
                           std::int64_t window_period_us, std::int64_t silence_periods)
    : offsets_(std::move(offsets)), period_(window_period_us), silence_(silence_periods) {
  if (cameras.empty()) throw ValueError("Synchronizer: need at least one camera");
  if (period_ <= 0) throw ValueError("Synchronizer: window period must be positive");
  if (silence_ <= 0) throw ValueError("Synchronizer: silence periods must be positive");
  for (const auto c : cameras) {
    if (!state_.emplace(c, CameraState{}).second) {
      throw ValueError("Synchronizer: duplicate camera " + std::to_string(c));
    }
  }
}

std::int64_t Synchronizer::corrected_time(std::uint16_t camera_id, std::uint64_t timestamp) const {
  const auto it = offsets_.find(camera_id);
  const std::int64_t offset = it == offsets_.end() ? 0 : it->second;
  return static_cast<std::int64_t>(timestamp) - offset;
}

std::vector<SyncWindow> Synchronizer::push(Frame frame, std::int64_t now_us) {
  if (!start_) start_ = now_us;
  const auto cam = state_.find(frame.camera_id);
  if (cam == state_.end()) {
    ++unknown_;
    return advance(now_us);
  }
  frame.corrected_us = corrected_time(frame.camera_id, frame.timestamp);
  frame.arrival_us = now_us;
  const std::int64_t index = window_index_of(frame.corrected_us, period_);
  auto& st = cam->second;
  st.last_index = st.last_index ? std::max(*st.last_index, index) : index;
  st.last_arrival = now_us;
  if (last_closed_ && index <= *last_closed_) {
    ++dropped_late_;
  } else {
    auto [it, fresh] = open_.try_emplace(index);
    if (fresh) {
      it->second.window_index = index;
      it->second.reference_time = index * period_;
    }
    auto& frames = it->second.frames;
    if (frames.contains(frame.camera_id)) ++duplicates_;
    frames.insert_or_assign(frame.camera_id, std::move(frame));
    ++accepted_;
  }
  return advance(now_us);
}

std::vector<SyncWindow> Synchronizer::advance(std::int64_t now_us) {
  if (!start_) start_ = now_us;
  std::optional<std::int64_t> watermark;
  bool all_silent = true;
  for (const auto& [id, st] : state_) {
    const std::int64_t since = now_us - (st.last_index ? st.last_arrival : *start_);
    if (since > silence_ * period_) continue;
    all_silent = false;
    if (!st.last_index) return {};
    watermark = watermark ? std::min(*watermark, *st.last_index) : *st.last_index;
  }
  if (all_silent) return flush(now_us);
  return close_through(*watermark - 1, now_us);
}

std::vector<SyncWindow> Synchronizer::flush(std::int64_t now_us) {
  if (open_.empty()) return {};
  return close_through(open_.rbegin()->first, now_us);
}

std::vector<SyncWindow> Synchronizer::close_through(std::int64_t last, std::int64_t now_us) {
  std::vector<SyncWindow> closed;
  if (last_closed_ && last <= *last_closed_) return closed;
  const auto expected = static_cast<double>(state_.size());
  while (!open_.empty() && open_.begin()->first <= last) {
    SyncWindow w = std::move(open_.begin()->second);
    open_.erase(open_.begin());
    w.completeness = static_cast<double>(w.frames.size()) / expected;
    w.closed_at_us = now_us;
    closed.push_back(std::move(w));
  }
  last_closed_ = last;
  return closed;
}

SyncResult synchronize(std::span<const Frame> frames, std::span<const std::uint16_t> cameras,
                       const std::map<std::uint16_t, std::int64_t>& offsets,
                       std::int64_t window_period_us) {
  Synchronizer sync({cameras.begin(), cameras.end()}, offsets, window_period_us);
  SyncResult out;
  std::int64_t now = std::numeric_limits<std::int64_t>::min();
  for (const auto& f : frames) {
    now = std::max(now, f.arrival_us);
    for (auto& w : sync.push(f, now)) out.windows.push_back(std::move(w));
  }
  for (auto& w : sync.flush(now)) out.windows.push_back(std::move(w));
  out.duplicates = sync.duplicates();
  out.dropped_late = sync.dropped_late();
  return out;
}

std::string FeedbackMessage::csv_line() const {
  return format_number(window_index) + "," + format_number(label) + "," +
         format_number(confidence) + "," + format_number(latency_us);
}

std::optional<FeedbackMessage> emit_feedback(std::int64_t window_index,
                                             const Vector& probabilities, double threshold,
                                             std::int64_t latency_us) {
  if (probabilities.size() == 0) throw ValueError("emit_feedback: empty probability vector");
  for (const auto p : probabilities) {
    if (!std::isfinite(p) || p < 0.0) {
      throw ValueError("emit_feedback: probabilities must be finite and nonnegative");
    }
  }
  if (std::abs(probabilities.sum() - 1.0) > 1e-6) {
    throw ValueError("emit_feedback: probabilities sum to " +
                     format_number(probabilities.sum()));
  }
  Eigen::Index best = 0;
  const Scalar top = probabilities.maxCoeff(&best);
  if (top < threshold) return std::nullopt;
  return FeedbackMessage{window_index, static_cast<int>(best), top, latency_us};
}

void SimulationConfig::validate() const {
  if (cameras.empty()) throw std::invalid_argument("simulation needs at least one camera");
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    cameras[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (cameras[j].camera_id == cameras[i].camera_id) {
        throw std::invalid_argument("duplicate camera id " + std::to_string(cameras[i].camera_id));
      }
    }
  }
  if (duration_us <= 0) throw std::invalid_argument("simulation duration must be positive");
  if (window_period_us < 0) throw std::invalid_argument("window period must be nonnegative");
  if (frame_height == 0 || frame_width == 0) {
    throw std::invalid_argument("frame extent must be positive");
  }
  if (median_window % 2 == 0 || median_window > std::min(frame_height, frame_width)) {
    throw std::invalid_argument("median window must be odd and fit the frame");
  }
  if (link_latency_us < 0 || latency_jitter_us < 0) {
    throw std::invalid_argument("link latency must be nonnegative");
  }
  if (handshake_samples < 3) throw std::invalid_argument("need at least 3 handshake samples");
  if (queue_capacity == 0) throw std::invalid_argument("queue capacity must be >= 1");
}

std::int64_t SimulationConfig::window_period() const {
  return window_period_us > 0 ? window_period_us : cameras.front().frame_period_us;
}

namespace {

std::vector<std::uint8_t> render_frame(const CameraSpec& spec, const SimulationConfig& config,
                                       std::int64_t capture_us, SplitMix64& rng) {
  const std::size_t h = config.frame_height, w = config.frame_width;
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(capture_us) / 1.6e6 +
                       0.7 * spec.camera_id;
  const double cx = 0.5 * static_cast<double>(w) * (1.0 + 0.5 * std::sin(phase));
  const double cy = 0.5 * static_cast<double>(h) * (1.0 + 0.3 * std::cos(phase));
  const double sigma = std::max(1.0, static_cast<double>(std::min(h, w)) / 8.0);
  std::vector<std::uint8_t> px(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      double v = 20.0 + 200.0 * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      v += rng.normal(0.0, 6.0);
      const double salt = rng.uniform();
      if (salt < 0.01) v = 0.0;
      else if (salt < 0.02) v = 255.0;
      px[y * w + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return px;
}

std::int64_t uniform_delay(SplitMix64& rng, std::int64_t max) {
  return static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max) + 1));
}

class Aggregator {
 public:
  Aggregator(const SimulationConfig& config, const std::map<std::uint16_t, std::int64_t>& offsets,
             const PipelineHook& hook, SimulationReport& report)
      : config_(config), hook_(hook), report_(report), sync_(camera_ids(config), offsets,
                                                             config.window_period()) {
    for (const auto& c : config.cameras) delivered_[c.camera_id] = 0;
  }

  void process(const Delivery& d) {
    now_ = std::max(now_, d.arrival_us);
    StreamPacket packet;
    try {
      packet = decode_packet(d.bytes);
    } catch (const PacketError&) {
      ++report_.decode_errors;
      return;
    }
    ++delivered_[packet.camera_id];
    Frame frame;
    frame.camera_id = packet.camera_id;
    frame.sequence_no = packet.sequence_no;
    frame.timestamp = packet.timestamp;
    frame.pixels = Tensor({packet.height, packet.width});
    for (std::size_t i = 0; i < packet.payload.size(); ++i) frame.pixels[i] = packet.payload[i];
    if (config_.median_window > 1 && config_.median_window <= std::min(packet.height, packet.width)) {
      frame.pixels = median_filter(frame.pixels, config_.median_window);
    }
    for (auto& w : sync_.push(std::move(frame), now_)) close(w);
  }

  void finish() {
    for (auto& w : sync_.flush(now_)) close(w);
    report_.dropped_late = sync_.dropped_late();
    report_.duplicates = sync_.duplicates();
  }

  std::size_t delivered(std::uint16_t camera) const { return delivered_.at(camera); }

 private:
  static std::vector<std::uint16_t> camera_ids(const SimulationConfig& config) {
    std::vector<std::uint16_t> ids;
    for (const auto& c : config.cameras) ids.push_back(c.camera_id);
    return ids;
  }

  void close(const SyncWindow& w) {
    WindowRecord r;
    r.window_index = w.window_index;
    r.reference_time = w.reference_time;
    r.frames = w.frames.size();
    r.completeness = w.completeness;
    r.close_latency_us = w.closed_at_us - w.reference_time;
    if (hook_) {
      try {
        const Vector probs = hook_(w);
        Eigen::Index best = 0;
        r.confidence = probs.size() ? probs.maxCoeff(&best) : 0.0;
        r.label = probs.size() ? static_cast<int>(best) : -1;
        if (auto msg = emit_feedback(w.window_index, probs, config_.feedback_threshold,
                                     r.close_latency_us)) {
          report_.feedback.push_back(*msg);
        }
      } catch (const std::exception& e) {
        r.label = -1;
        r.confidence = 0.0;
        r.error = e.what();
      }
    }
    report_.windows.push_back(std::move(r));
  }

  const SimulationConfig& config_;
  const PipelineHook& hook_;
  SimulationReport& report_;
  Synchronizer sync_;
  std::map<std::uint16_t, std::size_t> delivered_;
  std::int64_t now_ = std::numeric_limits<std::int64_t>::min();
};

}  // namespace

ProducerOutput run_producer(const CameraSpec& spec, const SimulationConfig& config) {
  spec.validate();
  SplitMix64 rng(derive_seed(config.seed, spec.camera_id));
  ProducerOutput out;
  out.camera_id = spec.camera_id;
  const auto n = static_cast<std::int64_t>(config.handshake_samples);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t hub_send = (i - n) * 1000;
    const std::int64_t latency = config.link_latency_us + uniform_delay(rng, config.latency_jitter_us);
    out.handshake.push_back({hub_send + spec.clock_offset_us, hub_send + latency});
  }
  const double bound = 3.0 * spec.jitter_std_us;
  for (std::int64_t k = 1; k * spec.frame_period_us <= config.duration_us; ++k) {
    const std::int64_t nominal = k * spec.frame_period_us;
    const double jitter = std::clamp(rng.normal(0.0, spec.jitter_std_us), -bound, bound);
    const std::int64_t capture = nominal + std::llround(jitter);
    const bool dropped = rng.bernoulli(spec.drop_probability);
    const std::int64_t latency = config.link_latency_us + uniform_delay(rng, config.latency_jitter_us);
    StreamPacket p;
    p.camera_id = spec.camera_id;
    p.sequence_no = static_cast<std::uint32_t>(k - 1);
    p.timestamp = static_cast<std::uint64_t>(std::max<std::int64_t>(0, capture + spec.clock_offset_us));
    p.height = config.frame_height;
    p.width = config.frame_width;
    p.payload = render_frame(spec, config, nominal, rng);
    ++out.produced;
    if (dropped) {
      ++out.dropped_by_link;
      continue;
    }
    out.deliveries.push_back({encode_packet(p), capture + latency, nominal, p.camera_id,
                              p.sequence_no});
  }
  return out;
}

std::size_t SimulationReport::produced() const {
  std::size_t n = 0;
  for (const auto& c : cameras) n += c.produced;
  return n;
}

std::size_t SimulationReport::delivered() const {
  std::size_t n = 0;
  for (const auto& c : cameras) n += c.delivered;
  return n;
}

std::size_t SimulationReport::dropped_by_link() const {
  std::size_t n = 0;
  for (const auto& c : cameras) n += c.dropped_by_link;
  return n;
}

std::int64_t percentile(std::vector<std::int64_t> values, double q) {
  if (values.empty()) throw ValueError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw ValueError("percentile rank must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(values.size())));
  return values[rank == 0 ? 0 : rank - 1];
}

SimulationReport run_simulation(const SimulationConfig& config, const PipelineHook& hook) {
  config.validate();
  SimulationReport report;
  report.seed = config.seed;
  report.window_period_us = config.window_period();
  report.threaded = config.threaded;
  const std::size_t cams = config.cameras.size();
  std::vector<ProducerOutput> outputs(cams);
  std::map<std::uint16_t, std::vector<ClockSample>> handshakes;

  if (!config.threaded) {
    for (std::size_t i = 0; i < cams; ++i) outputs[i] = run_producer(config.cameras[i], config);
    for (const auto& o : outputs) handshakes[o.camera_id] = o.handshake;
    const auto offsets = calibrate_clocks(handshakes, config.link_latency_us);
    std::vector<const Delivery*> order;
    for (const auto& o : outputs)
      for (const auto& d : o.deliveries) order.push_back(&d);
    std::stable_sort(order.begin(), order.end(), [](const Delivery* a, const Delivery* b) {
      return std::tie(a->arrival_us, a->camera_id, a->sequence_no) <
             std::tie(b->arrival_us, b->camera_id, b->sequence_no);
    });
    Aggregator agg(config, offsets, hook, report);
    for (const auto* d : order) agg.process(*d);
    agg.finish();
    for (std::size_t i = 0; i < cams; ++i) {
      const auto& o = outputs[i];
      report.cameras.push_back({o.camera_id, o.produced, agg.delivered(o.camera_id),
                                o.dropped_by_link, config.cameras[i].clock_offset_us,
                                offsets.at(o.camera_id)});
    }
  } else {
    BoundedQueue<Delivery> queue(config.queue_capacity);
    std::latch calibrated(static_cast<std::ptrdiff_t>(cams) + 1);
    std::latch finished(static_cast<std::ptrdiff_t>(cams));
    std::vector<std::jthread> producers;
    for (std::size_t i = 0; i < cams; ++i) {
      producers.emplace_back([&, i] {
        outputs[i] = run_producer(config.cameras[i], config);
        calibrated.arrive_and_wait();
        for (auto& d : outputs[i].deliveries) queue.push(std::move(d));
        finished.count_down();
      });
    }
    calibrated.arrive_and_wait();
    for (const auto& o : outputs) handshakes[o.camera_id] = o.handshake;
    const auto offsets = calibrate_clocks(handshakes, config.link_latency_us);
    std::jthread closer([&] {
      finished.wait();
      queue.close();
    });
    Aggregator agg(config, offsets, hook, report);
    while (auto d = queue.pop()) agg.process(*d);
    agg.finish();
    report.max_queue_depth = queue.high_water();
    for (std::size_t i = 0; i < cams; ++i) {
      const auto& o = outputs[i];
      report.cameras.push_back({o.camera_id, o.produced, agg.delivered(o.camera_id),
                                o.dropped_by_link, config.cameras[i].clock_offset_us,
                                offsets.at(o.camera_id)});
    }
  }

  if (!report.windows.empty()) {
    std::vector<std::int64_t> lat;
    for (const auto& w : report.windows) lat.push_back(w.close_latency_us);
    report.latency_p50_us = percentile(lat, 50);
    report.latency_p95_us = percentile(lat, 95);
    report.latency_max_us = *std::max_element(lat.begin(), lat.end());
  }
  return report;
}

void write_counts_csv(std::ostream& os, const SimulationReport& report) {
  CsvWriter csv(os, report.seed,
                {"camera_id", "produced", "delivered", "dropped_by_link", "true_offset_us",
                 "estimated_offset_us"},
                "section=counts");
  for (const auto& c : report.cameras) {
    csv.row({format_number(int{c.camera_id}), format_number(std::uint64_t{c.produced}),
             format_number(std::uint64_t{c.delivered}),
             format_number(std::uint64_t{c.dropped_by_link}), format_number(c.true_offset_us),
             format_number(c.estimated_offset_us)});
  }
}

void write_latency_csv(std::ostream& os, const SimulationReport& report) {
  CsvWriter csv(os, report.seed, {"metric", "value"}, "section=latency");
  const auto u = [](std::size_t v) { return format_number(std::uint64_t{v}); };
  csv.row({"window_period_us", format_number(report.window_period_us)});
  csv.row({"windows", u(report.windows.size())});
  csv.row({"produced", u(report.produced())});
  csv.row({"delivered", u(report.delivered())});
  csv.row({"dropped_by_link", u(report.dropped_by_link())});
  csv.row({"dropped_late", u(report.dropped_late)});
  csv.row({"duplicates", u(report.duplicates)});
  csv.row({"decode_errors", u(report.decode_errors)});
  csv.row({"feedback_messages", u(report.feedback.size())});
  csv.row({"close_latency_p50_us", format_number(report.latency_p50_us)});
  csv.row({"close_latency_p95_us", format_number(report.latency_p95_us)});
  csv.row({"close_latency_max_us", format_number(report.latency_max_us)});
}

void write_windows_csv(std::ostream& os, const SimulationReport& report) {
  CsvWriter csv(os, report.seed,
                {"window_index", "reference_time_us", "frames", "completeness",
                 "close_latency_us", "label", "confidence", "error"},
                "section=windows");
  for (const auto& w : report.windows) {
    csv.row({format_number(w.window_index), format_number(w.reference_time),
             format_number(std::uint64_t{w.frames}), format_number(w.completeness),
             format_number(w.close_latency_us), format_number(w.label),
             format_number(w.confidence), w.error});
  }
}

void write_feedback_csv(std::ostream& os, const SimulationReport& report) {
  CsvWriter csv(os, report.seed, {"window_index", "label", "confidence", "latency_us"},
                "section=feedback");
  for (const auto& m : report.feedback) {
    csv.row({format_number(m.window_index), format_number(m.label),
             format_number(m.confidence), format_number(m.latency_us)});
  }
}

}  // namespace eitnet
