#include "mstack/uvdar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mstack/rng.hpp"

namespace mstack {

std::string BlinkSequence::to_string() const {
  std::string s;
  s.reserve(bits.size());
  for (bool b : bits) {
    s.push_back(b ? '1' : '0');
  }
  return s;
}

BlinkSequence BlinkSequence::from_string(const std::string& s) {
  BlinkSequence seq;
  seq.bits.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') {
      throw Error("blink sequence must be a string of 0/1");
    }
    seq.bits.push_back(c == '1');
  }
  return seq;
}

int circular_hamming(const BlinkSequence& a, const BlinkSequence& b) {
  const std::size_t n = a.length();
  if (n != b.length()) {
    throw LengthMismatch("sequences differ in length");
  }
  int best = static_cast<int>(n);
  for (std::size_t shift = 0; shift < n; ++shift) {
    int d = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d += a.bits[i] != b.bits[(i + shift) % n];
    }
    best = std::min(best, d);
  }
  return best;
}

int longest_zero_run(const BlinkSequence& seq) {
  const std::size_t n = seq.length();
  bool any_one = false;
  for (bool b : seq.bits) {
    any_one |= b;
  }
  if (!any_one) {
    return static_cast<int>(n);
  }
  int best = 0;
  int run = 0;
  // Doubling the scan covers runs that wrap around the cycle boundary.
  for (std::size_t i = 0; i < 2 * n; ++i) {
    if (!seq.bits[i % n]) {
      ++run;
      best = std::max(best, std::min(run, static_cast<int>(n)));
    } else {
      run = 0;
    }
  }
  return best;
}

namespace {

std::vector<bool> rotated(const std::vector<bool>& bits, std::size_t shift) {
  const std::size_t n = bits.size();
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = bits[(i + shift) % n];
  }
  return out;
}

// Lexicographically smallest rotation.
std::vector<bool> canonical_rotation(const std::vector<bool>& bits) {
  std::vector<bool> best = bits;
  for (std::size_t shift = 1; shift < bits.size(); ++shift) {
    std::vector<bool> r = rotated(bits, shift);
    if (r < best) {
      best = r;
    }
  }
  return best;
}

}  // namespace

std::vector<BlinkSequence> generate_set(const SequenceSetParams& params) {
  const int n = params.length;
  std::vector<BlinkSequence> out;
  if (n < 2 || params.max_off_run < 1 || params.max_off_run >= n) {
    throw Error("sequence set params out of range");
  }
  // Enumerate every admissible sequence and keep the ones that are their own
  // canonical rotation; that yields exactly one member per rotation class.
  for (std::uint64_t code = 1; code < (1ull << n); ++code) {
    BlinkSequence seq;
    seq.bits.resize(n);
    for (int i = 0; i < n; ++i) {
      seq.bits[i] = (code >> (n - 1 - i)) & 1;
    }
    if (longest_zero_run(seq) > params.max_off_run) {
      continue;
    }
    if (canonical_rotation(seq.bits) != seq.bits) {
      continue;
    }
    out.push_back(std::move(seq));
  }
  std::sort(out.begin(), out.end(), [](const BlinkSequence& a,
                                       const BlinkSequence& b) {
    return a.bits < b.bits;
  });
  return out;
}

bool encode(const BlinkSequence& seq, std::size_t frame_index) {
  return seq.bits[frame_index % seq.length()];
}

DecodeResult decode(const std::vector<bool>& window,
                    const std::vector<BlinkSequence>& set) {
  if (set.empty()) {
    return {};
  }
  const std::size_t n = set.front().length();
  if (window.size() != n) {
    throw LengthMismatch("decode window length differs from set length");
  }
  DecodeResult result;
  for (std::size_t id = 0; id < set.size(); ++id) {
    bool matched = false;
    for (std::size_t shift = 0; shift < n && !matched; ++shift) {
      matched = rotated(set[id].bits, shift) == window;
    }
    if (matched) {
      if (result.kind == DecodeResult::Kind::kMatch) {
        return {DecodeResult::Kind::kAmbiguous, -1};
      }
      result.kind = DecodeResult::Kind::kMatch;
      result.id = static_cast<int>(id);
    }
  }
  return result;
}

std::string export_set(const std::vector<BlinkSequence>& set,
                       const SequenceSetParams& params) {
  std::ostringstream out;
  out << "L=" << params.length << " max_off_run=" << params.max_off_run << "\n";
  for (const auto& seq : set) {
    out << seq.to_string() << "\n";
  }
  return out.str();
}

namespace {

struct MarkerProjection {
  bool visible{false};
  double focal{1.0};
  int camera_index{0};
  double ua{0.0}, va{0.0}, ub{0.0}, vb{0.0};
};

// The LEDs sit on a ring around the airframe; the camera sees the silhouette
// width, modeled as a marker pair perpendicular to the line of sight in the
// horizontal plane. The rig carries `cameras` pinhole units yaw-spaced around
// the body; unit k looks along the body x-axis rotated by k * 2 pi / cameras.
MarkerProjection project_markers(const UavState& observer,
                                 const UavState& target,
                                 double marker_baseline,
                                 const CameraModel& camera) {
  MarkerProjection out;
  const Vec3 rel_world = target.position - observer.position;
  if (rel_world.norm() < 1e-6) {
    return out;
  }
  Vec3 across = Vec3(-rel_world.y(), rel_world.x(), 0.0);
  if (across.norm() < 1e-9) {
    across = Vec3(1.0, 0.0, 0.0);  // target straight above/below
  }
  across.normalize();
  const Vec3 marker_a = target.position + 0.5 * marker_baseline * across;
  const Vec3 marker_b = target.position - 0.5 * marker_baseline * across;

  out.focal = (camera.resolution / 2.0) / std::tan(camera.fov / 2.0);

  struct Pixel {
    double u, v;
  };
  for (int k = 0; k < std::max(1, camera.cameras); ++k) {
    const Mat3 rig = observer.rotation *
                     rot_z(2.0 * std::numbers::pi * k / std::max(1, camera.cameras));
    const auto project = [&](const Vec3& point) -> std::optional<Pixel> {
      const Vec3 d = rig.transpose() * (point - observer.position);
      if (d.x() <= 1e-9) {
        return std::nullopt;  // behind this camera
      }
      const double off_axis = std::atan2(std::hypot(d.y(), d.z()), d.x());
      if (off_axis > camera.fov / 2.0) {
        return std::nullopt;
      }
      return Pixel{out.focal * d.y() / d.x(), out.focal * d.z() / d.x()};
    };
    const auto pa = project(marker_a);
    const auto pb = project(marker_b);
    if (pa && pb) {
      out.visible = true;
      out.camera_index = k;
      out.ua = pa->u;
      out.va = pa->v;
      out.ub = pb->u;
      out.vb = pb->v;
      return out;
    }
  }
  return out;
}

}  // namespace

bool marker_pair_visible(const UavState& observer, const UavState& target,
                         double marker_baseline, const CameraModel& camera) {
  const MarkerProjection proj =
      project_markers(observer, target, marker_baseline, camera);
  return proj.visible && std::hypot(proj.ua - proj.ub, proj.va - proj.vb) >= 2.0;
}

std::optional<RelativePoseEstimate> observe(const UavState& observer,
                                            const UavState& target,
                                            double marker_baseline,
                                            const CameraModel& camera,
                                            std::mt19937_64& rng) {
  // Noise draws are fixed per observation regardless of visibility.
  const double noise[4] = {
      SeedTree::draw_normal(rng, camera.pixel_noise_sigma),
      SeedTree::draw_normal(rng, camera.pixel_noise_sigma),
      SeedTree::draw_normal(rng, camera.pixel_noise_sigma),
      SeedTree::draw_normal(rng, camera.pixel_noise_sigma)};

  const MarkerProjection proj =
      project_markers(observer, target, marker_baseline, camera);
  if (!proj.visible) {
    return std::nullopt;
  }
  const double focal = proj.focal;

  // Inverts two image points back to a relative position.
  const auto reconstruct = [&](double ua, double va, double ub,
                               double vb) -> Vec3 {
    const Vec3 ray_a = Vec3(1.0, ua / focal, va / focal).normalized();
    const Vec3 ray_b = Vec3(1.0, ub / focal, vb / focal).normalized();
    const double alpha = std::acos(std::clamp(ray_a.dot(ray_b), -1.0, 1.0));
    const double dist = marker_baseline / (2.0 * std::tan(alpha / 2.0));
    const Vec3 bearing = (ray_a + ray_b).normalized();
    return dist * bearing;
  };

  const double ua = proj.ua + noise[0];
  const double va = proj.va + noise[1];
  const double ub = proj.ub + noise[2];
  const double vb = proj.vb + noise[3];

  if (std::hypot(ua - ub, va - vb) < 2.0) {
    return std::nullopt;  // sub-resolution separation
  }

  RelativePoseEstimate est;
  est.mean = reconstruct(ua, va, ub, vb);

  // First-order propagation of pixel noise through the reconstruction.
  Eigen::Matrix<double, 3, 4> jac;
  const double h = 0.01;  // px
  const double pix[4] = {ua, va, ub, vb};
  for (int i = 0; i < 4; ++i) {
    double plus[4];
    double minus[4];
    for (int k = 0; k < 4; ++k) {
      plus[k] = pix[k] + (k == i ? h : 0.0);
      minus[k] = pix[k] - (k == i ? h : 0.0);
    }
    const Vec3 dp = reconstruct(plus[0], plus[1], plus[2], plus[3]);
    const Vec3 dm = reconstruct(minus[0], minus[1], minus[2], minus[3]);
    jac.col(i) = (dp - dm) / (2.0 * h);
  }
  est.covariance = camera.pixel_noise_sigma * camera.pixel_noise_sigma *
                   (jac * jac.transpose());

  // Lift from the selected rig camera frame into the observer body frame.
  if (proj.camera_index != 0) {
    const Mat3 cam_from_body = rot_z(2.0 * std::numbers::pi * proj.camera_index /
                                     std::max(1, camera.cameras));
    est.mean = cam_from_body * est.mean;
    est.covariance = cam_from_body * est.covariance * cam_from_body.transpose();
  }
  return est;
}

}  // namespace mstack
