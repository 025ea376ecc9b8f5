#include "nscd/metrics.hpp"

#include <stdexcept>

namespace nscd
{

double kineticEnergy(std::span<const RigidBody> bodies)
{
  double e = 0.0;
  for (const auto& b : bodies)
  {
    if (b.massProperties.isInfinite())
    {
      continue;
    }
    const Matrix3 inertia = worldInertia(b.orientation, b.massProperties).matrix();
    e += 0.5 * b.massProperties.mass() * b.linearVelocity.squaredNorm() +
         0.5 * b.angularVelocity.dot(inertia * b.angularVelocity);
  }
  return e;
}

Momentum totalMomentum(std::span<const RigidBody> bodies)
{
  Momentum p;
  for (const auto& b : bodies)
  {
    if (b.massProperties.isInfinite())
    {
      continue;
    }
    const Vector3 linear = b.massProperties.mass() * b.linearVelocity;
    const Matrix3 inertia = worldInertia(b.orientation, b.massProperties).matrix();
    p.linear += linear;
    p.angular += b.position.cross(linear) + inertia * b.angularVelocity;
  }
  return p;
}

double parallelEfficiency(double t1, double tp, int p, ScalingMode mode)
{
  if (!(t1 > 0.0) || !(tp > 0.0) || p < 1)
  {
    throw std::invalid_argument("efficiency needs positive times and rank count");
  }
  return mode == ScalingMode::Weak ? t1 / tp : t1 / (p * tp);
}

}  // namespace nscd
