#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>
#include <thread>

#include "eitnet/rng.hpp"
#include "eitnet/stream.hpp"

using namespace eitnet;

namespace {

// Median by full sort of the replicate-border neighbourhood.
Tensor sorted_median(const Tensor& f, std::size_t k) {
  const auto h = static_cast<long>(f.dim(0)), w = static_cast<long>(f.dim(1));
  const long r = static_cast<long>(k / 2);
  Tensor out(f.shape());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      std::vector<Scalar> v;
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx)
          v.push_back(f.at(static_cast<std::size_t>(std::clamp(y + dy, 0L, h - 1)),
                           static_cast<std::size_t>(std::clamp(x + dx, 0L, w - 1))));
      std::sort(v.begin(), v.end());
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = v[v.size() / 2];
    }
  }
  return out;
}

Tensor random_frame(std::size_t h, std::size_t w, SplitMix64& rng) {
  Tensor f({h, w});
  for (auto& v : f.data()) v = static_cast<Scalar>(rng.below(256));
  return f;
}

Frame frame_at(std::uint16_t camera, std::uint32_t seq, std::uint64_t ts, std::int64_t arrival) {
  Frame f;
  f.camera_id = camera;
  f.sequence_no = seq;
  f.timestamp = ts;
  f.arrival_us = arrival;
  return f;
}

SimulationConfig small_config(std::uint64_t seed, std::size_t cameras, double drop) {
  SimulationConfig c;
  c.cameras = default_cameras(cameras, seed);
  for (auto& s : c.cameras) s.drop_probability = drop;
  c.duration_us = 400'000;
  c.seed = seed;
  c.frame_height = 8;
  c.frame_width = 8;
  return c;
}

std::string full_report(const SimulationReport& r) {
  std::ostringstream os;
  write_counts_csv(os, r);
  write_latency_csv(os, r);
  write_windows_csv(os, r);
  write_feedback_csv(os, r);
  return os.str();
}

Vector peaked(int label, double p) {
  Vector v = Vector::Constant(4, (1.0 - p) / 3.0);
  v[label] = p;
  return v;
}

}  // namespace

TEST(CameraSpecTest, ParsesKeyValueLines) {
  std::istringstream is(
      "# cameras\n"
      "id=1 period_us=40000 offset_us=-250 jitter_us=800 drop_prob=0.05\n"
      "\n"
      "id=2, period_us=33333  # trailing comment\n");
  const auto specs = parse_camera_specs(is);
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[0].camera_id, 1);
  EXPECT_EQ(specs[0].clock_offset_us, -250);
  EXPECT_EQ(specs[0].jitter_std_us, 800.0);
  EXPECT_EQ(specs[0].drop_probability, 0.05);
  EXPECT_EQ(specs[1].frame_period_us, 33333);
  EXPECT_EQ(specs[1].drop_probability, 0.0);
}

TEST(CameraSpecTest, FormatRoundTrips) {
  for (const auto& s : default_cameras(5, 9)) {
    std::istringstream is(format_camera_spec(s));
    const auto back = parse_camera_specs(is);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back.front(), s);
  }
}

TEST(CameraSpecTest, RejectsBadInput) {
  for (const char* text : {"period_us=100", "id=1 period_us=0", "id=1 drop_prob=1",
                           "id=1 bogus=3", "id=1 period_us=abc", "id=70000", "id=1\nid=1",
                           "id=1 jitter_us=-1", "id"}) {
    std::istringstream is(text);
    EXPECT_THROW(parse_camera_specs(is), std::invalid_argument) << text;
  }
}

TEST(CameraSpecTest, DefaultsAreSeeded) {
  EXPECT_EQ(default_cameras(5, 3), default_cameras(5, 3));
  EXPECT_NE(default_cameras(5, 3), default_cameras(5, 4));
  for (const auto& s : default_cameras(5, 3)) {
    EXPECT_LE(std::abs(s.clock_offset_us), 3000);
  }
}

TEST(MedianFilterTest, ConstantFrameUnchanged) {
  const Tensor f({5, 7}, 42.0);
  for (const std::size_t k : {1u, 3u, 5u}) EXPECT_EQ(max_abs_diff(median_filter(f, k), f), 0.0);
}

TEST(MedianFilterTest, RemovesIsolatedSpike) {
  Tensor f({3, 3}, 0.0);
  f.at(1, 1) = 255.0;
  EXPECT_EQ(max_abs_diff(median_filter(f, 3), Tensor({3, 3}, 0.0)), 0.0);
}

TEST(MedianFilterTest, MatchesSortOracle) {
  SplitMix64 rng(1);
  for (int i = 0; i < 60; ++i) {
    const std::size_t h = 1 + rng.below(9), w = 1 + rng.below(9);
    const Tensor f = random_frame(h, w, rng);
    for (std::size_t k = 1; k <= std::min(h, w); k += 2) {
      EXPECT_EQ(max_abs_diff(median_filter(f, k), sorted_median(f, k)), 0.0);
    }
  }
}

TEST(MedianFilterTest, OutputValuesComeFromInput) {
  SplitMix64 rng(2);
  for (int i = 0; i < 30; ++i) {
    const Tensor f = random_frame(6, 6, rng);
    const std::multiset<Scalar> in(f.data().begin(), f.data().end());
    const Tensor out = median_filter(f, 3);
    for (const auto v : out.data()) EXPECT_TRUE(in.contains(v));
  }
}

TEST(MedianFilterTest, InvariantToWindowPermutation) {
  SplitMix64 rng(3);
  Tensor f = random_frame(3, 3, rng);
  const Scalar centre = median_filter(f, 3).at(1, 1);
  for (int i = 0; i < 50; ++i) {
    std::vector<Scalar> v(f.data().begin(), f.data().end());
    rng.shuffle(v);
    std::copy(v.begin(), v.end(), f.data().begin());
    EXPECT_EQ(median_filter(f, 3).at(1, 1), centre);
  }
}

TEST(MedianFilterTest, RejectsBadWindow) {
  const Tensor f({4, 6}, 1.0);
  EXPECT_THROW(median_filter(f, 2), ValueError);
  EXPECT_THROW(median_filter(f, 0), ValueError);
  EXPECT_THROW(median_filter(f, 5), ValueError);
  EXPECT_THROW(median_filter(Tensor({4}, 1.0), 1), ShapeError);
}

TEST(CalibrationTest, ExactWithoutLatencyOrJitter) {
  std::vector<ClockSample> s;
  for (int i = 0; i < 5; ++i) s.push_back({i * 1000 + 500, i * 1000});
  const auto est = calibrate_clocks({{1, s}});
  EXPECT_EQ(est.at(1), 500);
}

TEST(CalibrationTest, SymmetricJitterWithinBound) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClockSample> s;
    for (int i = 0; i < 101; ++i) {
      const std::int64_t hub = i * 1000;
      const auto jitter = static_cast<std::int64_t>(rng.below(201)) - 100;
      s.push_back({hub + 500 + jitter, hub});
    }
    EXPECT_LE(std::abs(calibrate_clocks({{1, s}}).at(1) - 500), 100);
  }
}

TEST(CalibrationTest, KnownLatencyFloorIsRemoved) {
  std::vector<ClockSample> s;
  for (int i = 0; i < 7; ++i) s.push_back({i * 1000 - 300, i * 1000 + 2000});
  EXPECT_EQ(calibrate_clocks({{2, s}}, 2000).at(2), -300);
}

TEST(CalibrationTest, EqualOffsetsGiveEqualEstimates) {
  std::vector<ClockSample> a, b;
  for (int i = 0; i < 9; ++i) {
    a.push_back({i * 100 + 700, i * 100 + 50});
    b.push_back({i * 333 + 700, i * 333 + 50});
  }
  const auto est = calibrate_clocks({{1, a}, {2, b}});
  EXPECT_EQ(est.at(1), est.at(2));
}

TEST(CalibrationTest, NeedsThreeSamples) {
  EXPECT_THROW(calibrate_clocks({{1, {{0, 0}, {1, 1}}}}), ValueError);
}

TEST(SynchronizeTest, WindowIndexRounding) {
  EXPECT_EQ(window_index_of(0, 100), 0);
  EXPECT_EQ(window_index_of(49, 100), 0);
  EXPECT_EQ(window_index_of(50, 100), 1);
  EXPECT_EQ(window_index_of(149, 100), 1);
  EXPECT_EQ(window_index_of(-49, 100), 0);
  EXPECT_EQ(window_index_of(-51, 100), -1);
  EXPECT_THROW(window_index_of(1, 0), ValueError);
}

TEST(SynchronizeTest, IdenticalTimestampsShareOneWindow) {
  const std::vector<std::uint16_t> cams{1, 2, 3};
  const std::map<std::uint16_t, std::int64_t> offsets{{1, 10}, {2, -20}, {3, 0}};
  std::vector<Frame> frames;
  for (const auto c : cams) {
    frames.push_back(frame_at(c, 0, static_cast<std::uint64_t>(5000 + offsets.at(c)), 6000 + c));
  }
  const auto r = synchronize(frames, cams, offsets, 1000);
  ASSERT_EQ(r.windows.size(), 1u);
  EXPECT_EQ(r.windows[0].window_index, 5);
  EXPECT_EQ(r.windows[0].completeness, 1.0);
  for (const auto& [id, f] : r.windows[0].frames) EXPECT_EQ(f.corrected_us, 5000);
}

TEST(SynchronizeTest, SilentCameraLowersCompleteness) {
  const std::vector<std::uint16_t> cams{1, 2, 3, 4};
  std::vector<Frame> frames;
  for (std::uint32_t k = 1; k <= 20; ++k) {
    for (const std::uint16_t c : {1, 2, 3}) {
      frames.push_back(frame_at(c, k, k * 1000, k * 1000 + 100 + c));
    }
  }
  const auto r = synchronize(frames, cams, {}, 1000);
  ASSERT_EQ(r.windows.size(), 20u);
  for (const auto& w : r.windows) EXPECT_DOUBLE_EQ(w.completeness, 0.75);
  EXPECT_EQ(r.dropped_late, 0u);
}

TEST(SynchronizeTest, LaterDuplicateWins) {
  const std::vector<std::uint16_t> cams{1};
  std::vector<Frame> frames{frame_at(1, 0, 1000, 1100), frame_at(1, 1, 1100, 1200),
                            frame_at(1, 2, 2000, 2100)};
  const auto r = synchronize(frames, cams, {}, 1000);
  EXPECT_EQ(r.duplicates, 1u);
  ASSERT_EQ(r.windows.size(), 2u);
  EXPECT_EQ(r.windows[0].frames.at(1).sequence_no, 1u);
}

TEST(SynchronizeTest, LateFramesAreCountedNotErrors) {
  const std::vector<std::uint16_t> cams{1, 2};
  std::vector<Frame> frames{frame_at(1, 0, 1000, 1100), frame_at(2, 0, 1000, 1100),
                            frame_at(1, 1, 2000, 2100), frame_at(2, 1, 2000, 2100),
                            frame_at(1, 9, 1000, 2200)};
  const auto r = synchronize(frames, cams, {}, 1000);
  EXPECT_EQ(r.dropped_late, 1u);
  ASSERT_EQ(r.windows.size(), 2u);
  EXPECT_EQ(r.windows[0].frames.at(1).sequence_no, 0u);
}

TEST(SynchronizeTest, WindowsWaitForEveryCamera) {
  Synchronizer sync({1, 2}, {}, 1000);
  EXPECT_TRUE(sync.push(frame_at(1, 0, 1000, 1100), 1100).empty());
  EXPECT_TRUE(sync.push(frame_at(1, 1, 2000, 2100), 2100).empty());
  const auto closed = sync.push(frame_at(2, 0, 2000, 2200), 2200);
  ASSERT_EQ(closed.size(), 1u);
  EXPECT_EQ(closed[0].window_index, 1);
  EXPECT_EQ(closed[0].completeness, 0.5);
  EXPECT_EQ(closed[0].closed_at_us, 2200);
  EXPECT_EQ(sync.flush(3000).size(), 1u);
}

TEST(BoundedQueueTest, FifoAndClose) {
  BoundedQueue<int> q(3);
  q.push(1);
  q.push(2);
  int three = 3, four = 4;
  EXPECT_TRUE(q.try_push(three));
  EXPECT_FALSE(q.try_push(four));
  EXPECT_EQ(q.pop(), 1);
  EXPECT_EQ(q.pop(), 2);
  q.close();
  EXPECT_EQ(q.pop(), 3);
  EXPECT_EQ(q.pop(), std::nullopt);
  EXPECT_THROW(q.push(5), std::logic_error);
  EXPECT_THROW(BoundedQueue<int>(0), std::invalid_argument);
}

TEST(BoundedQueueTest, ProducersBlockWhenFull) {
  BoundedQueue<int> q(4);
  std::atomic<int> pushed{0};
  std::vector<std::jthread> producers;
  for (int p = 0; p < 3; ++p) {
    producers.emplace_back([&, p] {
      for (int i = 0; i < 100; ++i) {
        q.push(p * 1000 + i);
        ++pushed;
      }
    });
  }
  while (pushed.load() < 4) std::this_thread::yield();
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  EXPECT_LE(pushed.load(), 4);
  std::vector<int> last(3, -1);
  for (int n = 0; n < 300; ++n) {
    const int v = *q.pop();
    EXPECT_GT(v % 1000, last[static_cast<std::size_t>(v / 1000)]);
    last[static_cast<std::size_t>(v / 1000)] = v % 1000;
  }
  EXPECT_LE(q.high_water(), 4u);
}

TEST(FeedbackTest, EmitsAboveThreshold) {
  const auto m = emit_feedback(7, peaked(2, 0.9), 0.5, 1200);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->label, 2);
  EXPECT_EQ(m->confidence, 0.9);
  EXPECT_EQ(m->csv_line(), "7,2,0.9,1200");
  EXPECT_FALSE(emit_feedback(7, Vector::Constant(4, 0.25), 0.5, 0));
  EXPECT_TRUE(emit_feedback(7, Vector::Constant(4, 0.25), 0.25, 0));
  EXPECT_TRUE(emit_feedback(7, Vector::Constant(4, 0.25), 0.0, 0));
}

TEST(FeedbackTest, RejectsInvalidProbabilities) {
  EXPECT_THROW(emit_feedback(0, Vector(), 0.5, 0), ValueError);
  Vector v(2);
  v << 0.7, 0.7;
  EXPECT_THROW(emit_feedback(0, v, 0.5, 0), ValueError);
  v << 1.5, -0.5;
  EXPECT_THROW(emit_feedback(0, v, 0.5, 0), ValueError);
  v << std::nan(""), 1.0;
  EXPECT_THROW(emit_feedback(0, v, 0.5, 0), ValueError);
}

TEST(SimulationTest, ConservationInFiftyRuns) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto r = run_simulation(small_config(seed, 3, 0.1));
    for (const auto& c : r.cameras) {
      EXPECT_EQ(c.produced, c.delivered + c.dropped_by_link) << "seed " << seed;
    }
    EXPECT_EQ(r.decode_errors, 0u);
    for (std::size_t i = 1; i < r.windows.size(); ++i) {
      EXPECT_LT(r.windows[i - 1].window_index, r.windows[i].window_index);
    }
  }
}

TEST(SimulationTest, LosslessRunDeliversEverything) {
  auto config = small_config(2, 4, 0.0);
  for (auto& s : config.cameras) s.jitter_std_us = 0.0;
  config.latency_jitter_us = 0;
  const auto r = run_simulation(config);
  for (const auto& c : r.cameras) {
    EXPECT_EQ(c.delivered, c.produced);
    EXPECT_EQ(c.estimated_offset_us, c.true_offset_us);
  }
  EXPECT_EQ(r.dropped_late, 0u);
  EXPECT_EQ(r.duplicates, 0u);
  ASSERT_EQ(r.windows.size(), 10u);
  for (const auto& w : r.windows) EXPECT_EQ(w.completeness, 1.0);
}

TEST(SimulationTest, GroupingMatchesNominalSchedule) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto config = small_config(seed, 5, 0.0);
    const std::int64_t period = config.window_period();
    for (auto& s : config.cameras) s.jitter_std_us = static_cast<double>(period) / 8.0;
    std::map<std::uint16_t, std::vector<ClockSample>> handshakes;
    std::vector<ProducerOutput> outputs;
    for (const auto& s : config.cameras) {
      outputs.push_back(run_producer(s, config));
      handshakes[s.camera_id] = outputs.back().handshake;
    }
    const auto offsets = calibrate_clocks(handshakes, config.link_latency_us);
    std::vector<Frame> frames;
    std::map<std::pair<std::uint16_t, std::uint32_t>, std::int64_t> nominal;
    std::vector<std::uint16_t> cams;
    for (const auto& o : outputs) {
      cams.push_back(o.camera_id);
      for (const auto& d : o.deliveries) {
        const auto p = decode_packet(d.bytes);
        frames.push_back(frame_at(p.camera_id, p.sequence_no, p.timestamp, d.arrival_us));
        nominal[{p.camera_id, p.sequence_no}] = window_index_of(d.capture_us, period);
      }
    }
    std::stable_sort(frames.begin(), frames.end(),
                     [](const Frame& a, const Frame& b) { return a.arrival_us < b.arrival_us; });
    const auto r = synchronize(frames, cams, offsets, period);
    std::size_t placed = 0;
    for (const auto& w : r.windows) {
      for (const auto& [id, f] : w.frames) {
        EXPECT_EQ(w.window_index, nominal.at({id, f.sequence_no}));
        ++placed;
      }
    }
    EXPECT_EQ(placed, frames.size()) << "seed " << seed;
    EXPECT_EQ(r.dropped_late + r.duplicates, 0u);
  }
}

TEST(SimulationTest, CorrectedTimestampsIncreasePerCamera) {
  auto config = small_config(3, 3, 0.0);
  for (auto& s : config.cameras) s.jitter_std_us = static_cast<double>(s.frame_period_us) / 7.0;
  Synchronizer sync({1, 2, 3}, {}, config.window_period());
  for (const auto& s : config.cameras) {
    const auto out = run_producer(s, config);
    std::int64_t prev = std::numeric_limits<std::int64_t>::min();
    for (const auto& d : out.deliveries) {
      const auto p = decode_packet(d.bytes);
      const std::int64_t t = sync.corrected_time(p.camera_id, p.timestamp);
      EXPECT_GT(t, prev);
      prev = t;
    }
  }
}

TEST(SimulationTest, DropRateNearConfigured) {
  SimulationConfig config;
  CameraSpec s;
  s.camera_id = 1;
  s.frame_period_us = 1000;
  s.drop_probability = 0.1;
  config.cameras = {s};
  config.duration_us = 10'000'000;
  config.frame_height = 4;
  config.frame_width = 4;
  config.seed = 17;
  const auto out = run_producer(s, config);
  ASSERT_EQ(out.produced, 10000u);
  const double rate = static_cast<double>(out.dropped_by_link) / static_cast<double>(out.produced);
  EXPECT_NEAR(rate, 0.1, 0.01);
}

TEST(SimulationTest, SameSeedSameReport) {
  const auto config = small_config(5, 3, 0.05);
  const PipelineHook hook = [](const SyncWindow& w) {
    return peaked(static_cast<int>(w.window_index % 4), 0.4 + 0.1 * static_cast<double>(w.frames.size()));
  };
  EXPECT_EQ(full_report(run_simulation(config, hook)), full_report(run_simulation(config, hook)));
  EXPECT_NE(full_report(run_simulation(config, hook)),
            full_report(run_simulation(small_config(6, 3, 0.05), hook)));
}

TEST(SimulationTest, ThresholdZeroGivesOneMessagePerWindow) {
  auto config = small_config(7, 2, 0.0);
  config.feedback_threshold = 0.0;
  const auto r = run_simulation(config, [](const SyncWindow&) { return peaked(1, 0.3); });
  EXPECT_FALSE(r.windows.empty());
  EXPECT_EQ(r.feedback.size(), r.windows.size());
  config.feedback_threshold = 0.5;
  EXPECT_TRUE(run_simulation(config, [](const SyncWindow&) { return peaked(1, 0.3); })
                  .feedback.empty());
}

TEST(SimulationTest, HookFailuresAreRecordedPerWindow) {
  const auto r = run_simulation(small_config(8, 2, 0.0), [](const SyncWindow& w) -> Vector {
    if (w.window_index % 2) throw std::runtime_error("hook failed");
    return peaked(0, 0.7);
  });
  std::size_t failed = 0;
  for (const auto& w : r.windows) {
    if (w.window_index % 2) {
      EXPECT_EQ(w.error, "hook failed");
      EXPECT_EQ(w.label, -1);
      ++failed;
    } else {
      EXPECT_EQ(w.label, 0);
    }
  }
  EXPECT_GT(failed, 0u);
}

TEST(SimulationTest, HookSeesMedianFilteredFrames) {
  auto config = small_config(9, 1, 0.0);
  std::size_t seen = 0;
  run_simulation(config, [&](const SyncWindow& w) {
    for (const auto& [id, f] : w.frames) {
      EXPECT_EQ(f.pixels.shape(), (Shape{8, 8}));
      ++seen;
    }
    return peaked(0, 1.0);
  });
  EXPECT_EQ(seen, 10u);
}

TEST(SimulationTest, ThreadedModeKeepsInvariants) {
  auto config = small_config(11, 5, 0.1);
  config.threaded = true;
  config.queue_capacity = 4;
  const auto threaded = run_simulation(config);
  config.threaded = false;
  const auto serial = run_simulation(config);
  ASSERT_EQ(threaded.cameras.size(), serial.cameras.size());
  for (std::size_t i = 0; i < serial.cameras.size(); ++i) {
    const auto& t = threaded.cameras[i];
    EXPECT_EQ(t.produced, t.delivered + t.dropped_by_link);
    EXPECT_EQ(t.produced, serial.cameras[i].produced);
    EXPECT_EQ(t.dropped_by_link, serial.cameras[i].dropped_by_link);
  }
  EXPECT_LE(threaded.max_queue_depth, 4u);
  for (std::size_t i = 1; i < threaded.windows.size(); ++i) {
    EXPECT_LT(threaded.windows[i - 1].window_index, threaded.windows[i].window_index);
  }
  for (const auto& w : threaded.windows) {
    EXPECT_GE(w.completeness, 0.0);
    EXPECT_LE(w.completeness, 1.0);
  }
}

TEST(SimulationTest, ReportSections) {
  const auto r = run_simulation(small_config(12, 2, 0.0));
  std::ostringstream counts, latency;
  write_counts_csv(counts, r);
  write_latency_csv(latency, r);
  EXPECT_EQ(counts.str().rfind("# seed=12", 0), 0u);
  EXPECT_NE(counts.str().find("camera_id,produced,delivered,dropped_by_link"), std::string::npos);
  EXPECT_NE(latency.str().find("close_latency_p95_us,"), std::string::npos);
  EXPECT_EQ(counts.str().back(), '\n');
  EXPECT_LE(r.latency_p50_us, r.latency_p95_us);
  EXPECT_LE(r.latency_p95_us, r.latency_max_us);
}

TEST(SimulationTest, PercentileNearestRank) {
  EXPECT_EQ(percentile({5, 1, 3, 2, 4}, 50), 3);
  EXPECT_EQ(percentile({5, 1, 3, 2, 4}, 100), 5);
  EXPECT_EQ(percentile({5, 1, 3, 2, 4}, 0), 1);
  EXPECT_EQ(percentile({10, 20}, 95), 20);
  EXPECT_THROW(percentile({}, 50), ValueError);
}

TEST(SimulationTest, RejectsBadConfig) {
  SimulationConfig c;
  EXPECT_THROW(run_simulation(c), std::invalid_argument);
  c = small_config(1, 2, 0.0);
  c.median_window = 4;
  EXPECT_THROW(run_simulation(c), std::invalid_argument);
  c = small_config(1, 2, 0.0);
  c.cameras[1].camera_id = c.cameras[0].camera_id;
  EXPECT_THROW(run_simulation(c), std::invalid_argument);
}
