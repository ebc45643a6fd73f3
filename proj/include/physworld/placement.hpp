#pragma once

#include <vector>

#include "physworld/mesh.hpp"
#include "physworld/pose.hpp"
#include "physworld/sdf.hpp"

namespace physworld::scene {

struct PlacementObject {
  const TriangleMesh* mesh = nullptr;  // object frame
  Pose pose;
};

struct PlacementOptions {
  double clearance = 0.002;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double gradient_clip = 0.01;
  double loss_tolerance = 1e-10;
  double min_relative_improvement = 1e-6;
  int improvement_window = 20;
  int max_steps = 2000;
};

struct PlacementResult {
  std::vector<double> offsets;  // tau per object, metres along +z
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;
  bool converged = false;
  // Loss before each step, then the final loss.
  std::vector<double> loss_history;
};

// Penetration loss sum_o mean_i max(0, clearance - phi(v + tau e_z))^2.
double placement_loss(const std::vector<PlacementObject>& objects, const SdfGrid& grid,
                      const std::vector<double>& offsets, double clearance);

// Lifts objects out of the background by Adam on per-object offsets tau.
// Non-convergence is reported through `converged`, not thrown.
PlacementResult optimize_placement(const std::vector<PlacementObject>& objects,
                                   const SdfGrid& grid, const PlacementOptions& options = {});

}  // namespace physworld::scene
