#include "physworld/placement.hpp"

#include <algorithm>
#include <cmath>

#include "physworld/error.hpp"
#include "physworld/kernels.hpp"

namespace physworld::scene {
namespace {

struct Prepared {
  std::vector<Vec3> vertices;  // world frame, before the offset
};

std::vector<Prepared> prepare(const std::vector<PlacementObject>& objects) {
  std::vector<Prepared> out;
  out.reserve(objects.size());
  for (const auto& o : objects) {
    if (o.mesh == nullptr || o.mesh->vertices.empty()) {
      throw Error(ErrorCode::kEmptyMesh, "placement: object without vertices");
    }
    Prepared p;
    p.vertices.reserve(o.mesh->vertices.size());
    for (const auto& v : o.mesh->vertices) p.vertices.push_back(o.pose.apply(v));
    out.push_back(std::move(p));
  }
  return out;
}

// Mean squared clearance violation of one object lifted by tau.
double object_loss(const Prepared& obj, const SdfGrid& grid, double tau, double clearance,
                   std::vector<Vec3>& scratch, std::vector<double>& phi) {
  scratch.resize(obj.vertices.size());
  phi.resize(obj.vertices.size());
  for (std::size_t i = 0; i < obj.vertices.size(); ++i) {
    scratch[i] = obj.vertices[i] + Vec3(0.0, 0.0, tau);
  }
  sample_sdf(grid, scratch, phi);
  double sum = 0.0;
  for (double d : phi) {
    const double violation = std::max(0.0, clearance - d);
    sum += violation * violation;
  }
  return sum / double(phi.size());
}

}  // namespace

double placement_loss(const std::vector<PlacementObject>& objects, const SdfGrid& grid,
                      const std::vector<double>& offsets, double clearance) {
  if (offsets.size() != objects.size()) {
    throw Error(ErrorCode::kInvalidArgument, "placement: one offset per object required");
  }
  const auto prepared = prepare(objects);
  std::vector<Vec3> scratch;
  std::vector<double> phi;
  double loss = 0.0;
  for (std::size_t o = 0; o < prepared.size(); ++o) {
    loss += object_loss(prepared[o], grid, offsets[o], clearance, scratch, phi);
  }
  return loss;
}

PlacementResult optimize_placement(const std::vector<PlacementObject>& objects,
                                   const SdfGrid& grid, const PlacementOptions& options) {
  if (objects.empty()) throw Error(ErrorCode::kInvalidArgument, "placement: no objects");
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "placement: empty SDF grid");
  const auto prepared = prepare(objects);
  const std::size_t n = prepared.size();
  const double h = 0.5 * grid.voxel_size();

  std::vector<Vec3> scratch;
  std::vector<double> phi;
  auto total = [&](const std::vector<double>& tau) {
    double loss = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
      loss += object_loss(prepared[o], grid, tau[o], options.clearance, scratch, phi);
    }
    return loss;
  };

  PlacementResult result;
  result.offsets.assign(n, 0.0);
  std::vector<double> m(n, 0.0), v(n, 0.0), g(n, 0.0);
  double loss = total(result.offsets);
  result.initial_loss = loss;

  const auto& k = kernels::active();
  int step = 0;
  for (; step < options.max_steps; ++step) {
    result.loss_history.push_back(loss);
    if (loss < options.loss_tolerance) break;
    const int w = options.improvement_window;
    if (step >= w) {
      const double before = result.loss_history[step - w];
      if (before - loss < options.min_relative_improvement * before) break;
    }
    // The loss is a sum of per-object terms, so each partial derivative
    // only needs its own object's term.
    double norm2 = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
      const double up = object_loss(prepared[o], grid, result.offsets[o] + h, options.clearance,
                                    scratch, phi);
      const double down = object_loss(prepared[o], grid, result.offsets[o] - h, options.clearance,
                                      scratch, phi);
      g[o] = (up - down) / (2.0 * h);
      norm2 += g[o] * g[o];
    }
    const double norm = std::sqrt(norm2);
    if (norm > options.gradient_clip) {
      const double s = options.gradient_clip / norm;
      for (auto& gi : g) gi *= s;
    }
    const double t = double(step + 1);
    const double c1 = 1.0 - std::pow(options.beta1, t);
    const double c2 = 1.0 - std::pow(options.beta2, t);
    k.adam(result.offsets.data(), m.data(), v.data(), g.data(), n, options.beta1, options.beta2,
           options.learning_rate / c1, 1.0 / c2, options.epsilon);
    loss = total(result.offsets);
  }
  result.loss_history.push_back(loss);
  result.steps = step;
  result.final_loss = loss;
  result.converged = loss < options.loss_tolerance || step < options.max_steps;
  return result;
}

}  // namespace physworld::scene
