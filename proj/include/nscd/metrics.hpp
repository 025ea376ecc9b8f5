#pragma once

#include "nscd/dynamics.hpp"

#include <span>

namespace nscd
{

/// Sum of translational and rotational kinetic energy of finite-inertia bodies (J).
double kineticEnergy(std::span<const RigidBody> bodies);

struct Momentum
{
  Vector3 linear = Vector3::Zero();   // kg m/s
  Vector3 angular = Vector3::Zero();  // about the origin, kg m^2/s
};

/// Finite-inertia bodies only.
Momentum totalMomentum(std::span<const RigidBody> bodies);

enum class ScalingMode : std::uint8_t
{
  Weak,
  Strong,
};

/// Weak: t1 / tp. Strong: t1 / (p tp).
double parallelEfficiency(double t1, double tp, int p, ScalingMode mode);

}  // namespace nscd
