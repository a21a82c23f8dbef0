#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "skillnet/geometry.hpp"

using namespace skillnet;

namespace {

// Independent quaternion from a rotation matrix (Shepperd), canonical sign.
Eigen::Vector4d quat_wxyz(const Eigen::Matrix3d& r) {
  const double tr = r.trace();
  Eigen::Vector4d q;
  if (tr > 0) {
    const double s = std::sqrt(tr + 1.0) * 2;
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    const double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  if (q[0] < 0) q = -q;
  return q;
}

Eigen::Matrix3d rot_axis_angle(const Eigen::Vector3d& axis, double angle) {
  // Rodrigues
  const Eigen::Vector3d k = axis.normalized();
  Eigen::Matrix3d K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * K + (1 - std::cos(angle)) * K * K;
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t s) : gen(s) {}
  double u(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }
  Eigen::Vector3d v(double r) { return {u(-r, r), u(-r, r), u(-r, r)}; }
  Eigen::Matrix3d rot() { return rot_axis_angle(v(1.0) + Eigen::Vector3d(0, 0, 1e-3), u(-M_PI, M_PI)); }
};

Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Eigen::Vector3d& p) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() = r;
  t.topRightCorner<3, 1>() = p;
  return t;
}

}  // namespace

TEST(Geometry, CanonicalizeFixesSign) {
  Eigen::Quaterniond q(-0.5, 0.5, -0.5, 0.5);
  const auto c = canonicalize(q);
  EXPECT_GT(c.w(), 0);
  EXPECT_NEAR(c.x(), -0.5, 1e-15);
  // w == 0: first non-zero vector component positive
  const auto d = canonicalize(Eigen::Quaterniond(0, 0, -1, 0));
  EXPECT_DOUBLE_EQ(d.y(), 1.0);
}

TEST(Geometry, ComposeMatchesHomogeneousMatrices) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d ra = rng.rot(), rb = rng.rot();
    const Eigen::Vector3d pa = rng.v(2), pb = rng.v(2);
    const Pose a(pa, Eigen::Quaterniond(ra)), b(pb, Eigen::Quaterniond(rb));
    const Eigen::Matrix4d expect = homogeneous(ra, pa) * homogeneous(rb, pb);
    EXPECT_LT((pose_compose(a, b).matrix() - expect).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.inverse().matrix() - homogeneous(ra, pa).inverse()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Geometry, RelativeTransformMatchesMatrixOracle) {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d ri = rng.rot(), rj = rng.rot();
    const Eigen::Vector3d bi = rng.v(1), bj = rng.v(1);
    const auto rel = relative_transform(Frame(bi, ri), Frame(bj, rj));
    const Eigen::Matrix4d t = homogeneous(ri, bi).inverse() * homogeneous(rj, bj);
    const Eigen::Vector3d b = t.topRightCorner<3, 1>();
    const Eigen::Vector4d q = quat_wxyz(t.topLeftCorner<3, 3>());
    EXPECT_LT((rel.head<3>() - b).norm(), 1e-12);
    EXPECT_LT((rel.tail<4>() - q).norm(), 1e-9);
  }
}

TEST(Geometry, SkillFeatureChainsConsecutiveFrames) {
  Rng rng(3);
  std::vector<Frame> frames;
  for (int i = 0; i < 4; ++i) frames.emplace_back(rng.v(1), rng.rot());
  const Eigen::VectorXd v = skill_feature(frames);
  ASSERT_EQ(v.size(), 7 * 3);
  for (int p = 0; p < 3; ++p) {
    EXPECT_LT((v.segment<7>(7 * p) - relative_transform(frames[p], frames[p + 1])).norm(), 1e-15);
  }
}

TEST(Geometry, EdgeFeatureInvariantUnderRigidMotion) {
  Rng rng(5);
  WorldState cur, goal;
  cur.robot = Pose(rng.v(1), Eigen::Quaterniond(rng.rot()));
  goal.robot = Pose(rng.v(1), Eigen::Quaterniond(rng.rot()));
  for (const char* id : {"a", "b", "c"}) {
    cur.objects.push_back({id, Pose(rng.v(1), Eigen::Quaterniond(rng.rot()))});
    goal.objects.push_back({id, Pose(rng.v(1), Eigen::Quaterniond(rng.rot()))});
  }
  const FrameSpec spec{{"robot", "a", "b", "c"}};
  const Eigen::VectorXd f = edge_feature(cur, goal, {"a", "c"}, spec);
  EXPECT_EQ(static_cast<std::size_t>(f.size()), edge_feature_size(2, 4));
  // Planar motion (the frames are planar, so only yaw rotations commute).
  for (int k = 0; k < 20; ++k) {
    const Pose g = Pose::planar(rng.u(-2, 2), rng.u(-2, 2), rng.u(-1, 1), rng.u(-M_PI, M_PI));
    auto move = [&](WorldState s) {
      s.robot = pose_compose(g, s.robot);
      for (auto& o : s.objects) o.pose = pose_compose(g, o.pose);
      return s;
    };
    const Eigen::VectorXd f2 = edge_feature(move(cur), move(goal), {"a", "c"}, spec);
    EXPECT_LT((f - f2).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Geometry, ProjectUnprojectRoundTrip) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const Frame f(rng.v(1), rng.rot());
    const Pose p(rng.v(1), Eigen::Quaterniond(rng.rot()));
    const Pose back = unproject_from_frame(f, project_to_frame(f, p));
    EXPECT_LT((back.position - p.position).norm(), 1e-12);
    EXPECT_LT(angular_distance(back.orientation, p.orientation), 1e-7);
  }
}

TEST(Geometry, WrapAngleRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(M_PI), M_PI);
  EXPECT_NEAR(wrap_angle(-M_PI), M_PI, 1e-15);
  EXPECT_NEAR(wrap_angle(3 * M_PI + 0.1), -M_PI + 0.1, 1e-12);
  EXPECT_NEAR(angular_distance(Eigen::Quaterniond::Identity(),
                               Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitX()))),
              0.3, 1e-12);
}

TEST(Geometry, EmptyFrameListRejected) {
  EXPECT_THROW(skill_feature({}), GeometryError);
}
