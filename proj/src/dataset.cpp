#include "eitnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "eitnet/csv.hpp"
#include "eitnet/rng.hpp"

namespace eitnet {

namespace {

using Vec3 = Eigen::RowVector3d;
constexpr double kPi = std::numbers::pi;

enum Joint : int {
  kPelvis, kNeck, kHead,
  kLShoulder, kLElbow, kLHand,
  kRShoulder, kRElbow, kRHand,
  kLKnee, kLFoot, kRKnee, kRFoot,
};

constexpr std::array<std::pair<int, int>, 12> kBones{{
    {kPelvis, kNeck}, {kNeck, kHead},
    {kNeck, kLShoulder}, {kLShoulder, kLElbow}, {kLElbow, kLHand},
    {kNeck, kRShoulder}, {kRShoulder, kRElbow}, {kRElbow, kRHand},
    {kPelvis, kLKnee}, {kLKnee, kLFoot}, {kPelvis, kRKnee}, {kRKnee, kRFoot},
}};

struct BodyTraits {
  Scalar scale = 1.0;
  Scalar shoulder = 180.0;
};

struct Variation {
  Scalar amplitude = 1.0;
  Scalar phase = 0.0;  // shift of the motion clock, fraction of the clip
  Scalar facing = 0.0;
  Vec3 offset = Vec3::Zero();
};

// Neck-relative hand targets and whole-body vertical motion for one phase.
struct Motion {
  Vec3 left_hand, right_hand;
  Scalar crouch = 0.0;
  Scalar lift = 0.0;
};

Motion action_motion(Action action, Scalar u, Scalar amp) {
  Motion m;
  const Scalar arc = std::sin(kPi * u);
  switch (action) {
    case Action::dribble:
      m.crouch = 80.0;
      m.left_hand = Vec3(-220, -400, 100);
      m.right_hand = Vec3(260, -500 + 170 * amp * std::cos(4 * kPi * u), 220);
      break;
    case Action::shoot:
      m.crouch = 120.0 * amp * arc;
      m.left_hand = Vec3(-110, -200 + 650 * amp * u, 200 - 100 * u);
      m.right_hand = Vec3(110, -200 + 650 * amp * u, 200 - 100 * u);
      break;
    case Action::pass:
      m.crouch = 40.0;
      m.left_hand = Vec3(-160, -450 + 450 * amp * arc, 100 + 350 * amp * arc);
      m.right_hand = Vec3(160, -450 + 450 * amp * arc, 100 + 350 * amp * arc);
      break;
    case Action::jump:
      m.lift = 300.0 * amp * arc;
      m.left_hand = Vec3(-260, -450 + 300 * amp * arc, 30);
      m.right_hand = Vec3(260, -450 + 300 * amp * arc, 30);
      break;
  }
  return m;
}

// Body frame: x to the subject's right, y up from the floor, z forward.
SkeletonPose body_pose(Action action, Scalar u, const BodyTraits& body, Scalar amp) {
  const Motion m = action_motion(action, u, amp);
  SkeletonPose p(static_cast<Eigen::Index>(kJointCount), 3);
  const Vec3 pelvis(0, 950 - m.crouch + m.lift, 0);
  const Vec3 neck = pelvis + Vec3(0, 500, 0);
  p.row(kPelvis) = pelvis;
  p.row(kNeck) = neck;
  p.row(kHead) = neck + Vec3(0, 200, 0);
  const Vec3 lsho = neck + Vec3(-body.shoulder, -30, 0);
  const Vec3 rsho = neck + Vec3(body.shoulder, -30, 0);
  const Vec3 lhand = neck + m.left_hand;
  const Vec3 rhand = neck + m.right_hand;
  p.row(kLShoulder) = lsho;
  p.row(kLHand) = lhand;
  p.row(kLElbow) = 0.5 * (lsho + lhand) + Vec3(-70, -40, -30);
  p.row(kRShoulder) = rsho;
  p.row(kRHand) = rhand;
  p.row(kRElbow) = 0.5 * (rsho + rhand) + Vec3(70, -40, -30);
  for (const auto& [knee, foot, side] :
       {std::tuple{kLKnee, kLFoot, -1.0}, std::tuple{kRKnee, kRFoot, 1.0}}) {
    const Vec3 hip = pelvis + Vec3(100 * side, 0, 0);
    const Vec3 f(110 * side, 50 + m.lift, 0);
    p.row(foot) = f;
    p.row(knee) = 0.5 * (hip + f) + Vec3(0, 0, 60 + 1.2 * m.crouch);
  }
  return p * body.scale;
}

SkeletonPose to_camera(const SkeletonPose& body, Scalar angle, const Vec3& offset) {
  Eigen::Matrix3d r;
  r << std::cos(angle), 0, std::sin(angle),  //
      0, 1, 0,                               //
      -std::sin(angle), 0, std::cos(angle);
  SkeletonPose cam = body * r.transpose();
  cam.col(1).array() -= 1000.0;
  return cam.rowwise() + offset;
}

Scalar segment_dist2(Scalar px, Scalar py, const Point2& a, const Point2& b) {
  const Scalar dx = b[0] - a[0], dy = b[1] - a[1];
  const Scalar len2 = dx * dx + dy * dy;
  Scalar t = len2 > 0.0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0;
  t = std::clamp<Scalar>(t, 0.0, 1.0);
  const Scalar ex = a[0] + t * dx - px, ey = a[1] + t * dy - py;
  return ex * ex + ey * ey;
}

void render_frame(const SyntheticConfig& cfg, const SkeletonPose& pose, SplitMix64& rng,
                  Scalar* out) {
  std::vector<Point2> pts;
  for (Eigen::Index j = 0; j < pose.rows(); ++j) pts.push_back(project_joint(cfg, pose.row(j)));
  const Scalar bone = 1.0 / (2.0 * cfg.bone_sigma * cfg.bone_sigma);
  const Scalar head_sigma = 1.6 * cfg.bone_sigma;
  const Scalar head = 1.0 / (2.0 * head_sigma * head_sigma);
  for (std::size_t y = 0; y < cfg.height; ++y) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      const Scalar px = static_cast<Scalar>(x) + 0.5, py = static_cast<Scalar>(y) + 0.5;
      Scalar d2 = 1e30;
      for (const auto& [a, b] : kBones) d2 = std::min(d2, segment_dist2(px, py, pts[a], pts[b]));
      const Scalar hx = px - pts[kHead][0], hy = py - pts[kHead][1];
      const Scalar v = std::max(std::exp(-d2 * bone), std::exp(-(hx * hx + hy * hy) * head));
      out[y * cfg.width + x] = v + cfg.pixel_noise * rng.normal();
    }
  }
}

}  // namespace

const char* to_string(Action action) { return kActionNames.at(static_cast<std::size_t>(action)); }

Action parse_action(std::string_view name) {
  for (std::size_t i = 0; i < kActionCount; ++i) {
    if (name == kActionNames[i]) return static_cast<Action>(i);
  }
  throw std::invalid_argument("unknown action: " + std::string(name));
}

void SyntheticConfig::validate() const {
  if (classes != kActionCount) {
    throw std::invalid_argument("synthetic data has exactly 4 action classes, got " +
                                std::to_string(classes));
  }
  if (subjects != 10 || views != 5) {
    throw std::invalid_argument("synthetic data uses 10 subjects and 5 views");
  }
  if (repetitions == 0 || frames < 2 || height < 8 || width < 8) {
    throw std::invalid_argument("synthetic config: empty or undersized clips");
  }
  if (!(pixels_per_mm > 0.0) || pixel_noise < 0.0 || !(bone_sigma > 0.0)) {
    throw std::invalid_argument("synthetic config: nonpositive scale or sigma");
  }
}

Point2 project_joint(const SyntheticConfig& config, const Eigen::RowVector3d& p) {
  return {0.5 * static_cast<Scalar>(config.width) + p[0] * config.pixels_per_mm,
          0.5 * static_cast<Scalar>(config.height) - p[1] * config.pixels_per_mm};
}

std::vector<Point2> project_poses(const SyntheticConfig& config, const PoseSequence& poses) {
  std::vector<Point2> pts;
  for (const auto& pose : poses)
    for (Eigen::Index j = 0; j < pose.rows(); ++j) pts.push_back(project_joint(config, pose.row(j)));
  return pts;
}

void annotate_box(const SyntheticConfig& config, SyntheticAction& sample) {
  sample.keypoints = project_poses(config, sample.poses);
  sample.box_pad = 2.0 * config.bone_sigma;
  sample.box = points_box(sample.keypoints, sample.box_pad, static_cast<Scalar>(config.height),
                          static_cast<Scalar>(config.width));
}

std::vector<SyntheticAction> generate_synthetic_dataset(const SyntheticConfig& config,
                                                        std::uint64_t seed) {
  config.validate();
  std::vector<BodyTraits> bodies;
  for (std::size_t s = 0; s < config.subjects; ++s) {
    SplitMix64 rng(derive_seed(seed, 1'000'000 + s));
    bodies.push_back({rng.uniform(0.9, 1.1), rng.uniform(160.0, 200.0)});
  }
  std::vector<SyntheticAction> samples;
  samples.reserve(config.sample_count());
  const std::size_t frame_size = config.height * config.width;
  for (std::size_t s = 0; s < config.subjects; ++s) {
    for (std::size_t v = 0; v < config.views; ++v) {
      for (std::size_t c = 0; c < config.classes; ++c) {
        for (std::size_t r = 0; r < config.repetitions; ++r) {
          SyntheticAction a;
          a.sample_id = samples.size();
          a.subject_id = static_cast<int>(s + 1);
          a.view_id = static_cast<int>(v + 1);
          a.label = static_cast<Action>(c);
          SplitMix64 rng(derive_seed(seed, a.sample_id));
          Variation var;
          var.amplitude = rng.uniform(0.85, 1.15);
          var.phase = rng.uniform(-0.08, 0.08);
          var.facing = rng.uniform(-10.0, 10.0) * kPi / 180.0;
          var.offset = Vec3(rng.uniform(-300, 300), rng.uniform(-80, 40), rng.uniform(-200, 200));
          const Scalar angle = 2.0 * kPi * static_cast<Scalar>(v) /
                                   static_cast<Scalar>(config.views) + var.facing;
          a.clip = Tensor({1, config.frames, config.height, config.width});
          for (std::size_t t = 0; t < config.frames; ++t) {
            const Scalar u = std::clamp(
                static_cast<Scalar>(t) / static_cast<Scalar>(config.frames - 1) + var.phase, 0.0,
                1.0);
            const SkeletonPose body = body_pose(a.label, u, bodies[s], var.amplitude);
            a.poses.push_back(to_camera(body, angle, var.offset));
            render_frame(config, a.poses.back(), rng, a.clip.data().data() + t * frame_size);
          }
          annotate_box(config, a);
          samples.push_back(std::move(a));
        }
      }
    }
  }
  return samples;
}

void save_dataset(const std::string& dir, const std::vector<SyntheticAction>& samples,
                  std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "clips");
  fs::create_directories(fs::path(dir) / "poses");
  std::ofstream manifest(fs::path(dir) / "manifest.csv", std::ios::binary);
  CsvWriter csv(manifest, seed,
                {"sample_id", "subject_id", "view_id", "label", "clip_path", "pose_path"});
  for (const auto& s : samples) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.eitt", s.sample_id);
    const std::string clip_path = std::string("clips/") + name;
    const std::string pose_path = std::string("poses/") + name;
    save_tensor((fs::path(dir) / clip_path).string(), s.clip);
    save_tensor((fs::path(dir) / pose_path).string(), poses_to_tensor(s.poses));
    csv.row({format_number(s.sample_id), format_number(s.subject_id), format_number(s.view_id),
             to_string(s.label), clip_path, pose_path});
  }
  if (!manifest) throw std::runtime_error("failed writing manifest in " + dir);
}

std::vector<SyntheticAction> load_dataset(const std::string& dir, const SyntheticConfig& config) {
  namespace fs = std::filesystem;
  const CsvTable table = read_csv_file((fs::path(dir) / "manifest.csv").string());
  const std::size_t id = table.column("sample_id"), subject = table.column("subject_id"),
                    view = table.column("view_id"), label = table.column("label"),
                    clip = table.column("clip_path"), pose = table.column("pose_path");
  std::vector<SyntheticAction> samples;
  for (const auto& row : table.rows) {
    SyntheticAction a;
    a.sample_id = std::stoul(row.at(id));
    a.subject_id = std::stoi(row.at(subject));
    a.view_id = std::stoi(row.at(view));
    a.label = parse_action(row.at(label));
    a.clip = load_tensor((fs::path(dir) / row.at(clip)).string());
    a.poses = tensor_to_poses(load_tensor((fs::path(dir) / row.at(pose)).string()));
    if (a.clip.rank() != 4 || a.clip.dim(1) != a.poses.size()) {
      throw ShapeError("sample " + row.at(id) + ": clip " + to_string(a.clip.shape()) +
                       " does not match " + std::to_string(a.poses.size()) + " poses");
    }
    annotate_box(config, a);
    samples.push_back(std::move(a));
  }
  return samples;
}

}  // namespace eitnet
