#include "physworld/registration.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "physworld/error.hpp"

namespace physworld::scene {
namespace {

Mat3 yaw_matrix(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

// Mesh vertices plus area-weighted surface samples, in the mesh frame.
std::vector<Vec3> surface_points(const TriangleMesh& mesh, std::size_t samples) {
  std::vector<Vec3> pts = mesh.vertices;
  std::vector<double> cumulative;
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) return pts;
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t s = 0; s < samples; ++s) {
    const double pick = u01(rng) * total;
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t t = std::min<std::size_t>(it - cumulative.begin(), mesh.triangles.size() - 1);
    double r1 = u01(rng), r2 = u01(rng);
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    const auto& tri = mesh.triangles[t];
    const Vec3& a = mesh.vertices[tri[0]];
    pts.push_back(a + r1 * (mesh.vertices[tri[1]] - a) + r2 * (mesh.vertices[tri[2]] - a));
  }
  return pts;
}

struct Candidate {
  double scale;
  double yaw;
  Vec3 translation;

  Vec3 apply(const Vec3& p) const { return scale * (yaw_matrix(yaw) * p) + translation; }
};

// Mean distance from each observed point to its nearest model point, and
// the matched model points.
double match(const std::vector<Vec3>& model, const std::vector<Vec3>& observed,
             const Candidate& c, std::vector<Vec3>* matched) {
  std::vector<Vec3> placed(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) placed[i] = c.apply(model[i]);
  if (matched) matched->resize(observed.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < placed.size(); ++j) {
      const double d = (placed[j] - observed[i]).squaredNorm();
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    sum += std::sqrt(best);
    if (matched) (*matched)[i] = placed[arg];
  }
  return sum / double(observed.size());
}

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / double(pts.size());
}

double diagonal_in_yaw_frame(const std::vector<Vec3>& pts, double yaw) {
  const Mat3 r = yaw_matrix(-yaw);
  Aabb box;
  for (const auto& p : pts) box.extend(r * p);
  return box.diagonal();
}

}  // namespace

Registration register_mesh(const TriangleMesh& mesh, const depth::PointCloud& observed,
                           const RegistrationOptions& options) {
  if (mesh.empty()) throw Error(ErrorCode::kEmptyInput, "registration: empty mesh");
  if (observed.empty()) throw Error(ErrorCode::kEmptyInput, "registration: empty observed segment");
  const double mesh_diag = mesh.bounds().diagonal();
  if (!(mesh_diag > 0.0)) throw Error(ErrorCode::kEmptyInput, "registration: degenerate mesh");

  // Nearest-neighbour matching is quadratic; a strided subset keeps it cheap.
  constexpr std::size_t kMaxObserved = 1500;
  std::vector<Vec3> obs;
  const std::size_t stride = (observed.size() + kMaxObserved - 1) / kMaxObserved;
  for (std::size_t i = 0; i < observed.size(); i += stride) obs.push_back(observed.points[i]);

  const std::vector<Vec3> model = surface_points(mesh, options.surface_samples);
  const Vec3 mesh_center = centroid(mesh.vertices);
  const Vec3 obs_center = centroid(observed.points);

  auto with_yaw = [&](double yaw) {
    Candidate c;
    c.yaw = yaw;
    c.scale = diagonal_in_yaw_frame(observed.points, yaw) / mesh_diag;
    c.translation = obs_center - c.scale * (yaw_matrix(yaw) * mesh_center);
    return c;
  };

  Candidate best = with_yaw(0.0);
  std::vector<Vec3> matched;
  double best_error = match(model, obs, best, &matched);
  int iterations = 0;
  for (int it = 0; it < options.max_icp_iterations; ++it) {
    // Closed-form yaw of the matched pairs about their centroids.
    const Vec3 ma = centroid(matched);
    const Vec3 mb = centroid(obs);
    double sin_sum = 0.0, cos_sum = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const Vec3 a = matched[i] - ma, b = obs[i] - mb;
      sin_sum += a.x() * b.y() - a.y() * b.x();
      cos_sum += a.x() * b.x() + a.y() * b.y();
    }
    const double delta = std::atan2(sin_sum, cos_sum);
    if (!(std::abs(delta) > 0.0)) break;
    const Candidate next = with_yaw(std::remainder(best.yaw + delta, 2.0 * M_PI));
    std::vector<Vec3> next_matched;
    const double err = match(model, obs, next, &next_matched);
    if (!(err < best_error)) break;
    best = next;
    best_error = err;
    matched = std::move(next_matched);
    iterations = it + 1;
    if (best_error == 0.0) break;
  }

  Registration r;
  r.transform.scale = best.scale;
  r.transform.rotation = yaw_matrix(best.yaw);
  r.transform.translation = best.translation;
  r.yaw = best.yaw;
  r.mean_distance = best_error;
  r.icp_iterations = iterations;
  return r;
}

}  // namespace physworld::scene
