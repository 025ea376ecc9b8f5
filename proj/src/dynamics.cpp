#include "nscd/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nscd
{

namespace
{

template <class... Ts>
struct Overloaded : Ts...
{
  using Ts::operator()...;
};

void requirePositiveRadius(double r)
{
  if (!(r > 0.0) || !std::isfinite(r))
  {
    throw std::invalid_argument("sphere radius must be positive and finite");
  }
}

}  // namespace

bool isBounded(const Shape& shape) noexcept
{
  return !std::holds_alternative<HalfSpace>(shape);
}

void validateShape(const Shape& shape)
{
  std::visit(Overloaded{
                 [](const Sphere& s) { requirePositiveRadius(s.radius); },
                 [](const CompositeOfSpheres& c) {
                   if (c.spheres.empty())
                   {
                     throw std::invalid_argument("composite needs at least one sphere");
                   }
                   for (const auto& e : c.spheres)
                   {
                     requirePositiveRadius(e.radius);
                   }
                 },
                 [](const HalfSpace& h) {
                   if (std::abs(h.normal.norm() - 1.0) > 1e-12)
                   {
                     throw std::invalid_argument("half-space normal must be unit length");
                   }
                 },
             },
             shape);
}

MassProperties MassProperties::infinite()
{
  return MassProperties{};
}

MassProperties MassProperties::finite(double mass, const Matrix3& bodyFrameInertia)
{
  if (!(mass > 0.0) || !std::isfinite(mass))
  {
    throw std::invalid_argument("mass must be positive and finite");
  }
  if ((bodyFrameInertia - bodyFrameInertia.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * bodyFrameInertia.cwiseAbs().maxCoeff())
  {
    throw std::invalid_argument("inertia must be symmetric");
  }
  Eigen::LLT<Matrix3> llt(bodyFrameInertia);
  if (llt.info() != Eigen::Success)
  {
    throw std::invalid_argument("inertia must be positive definite");
  }
  MassProperties p;
  p.infinite_ = false;
  p.mass_ = mass;
  p.inverseMass_ = 1.0 / mass;
  p.bodyInertia_ = bodyFrameInertia;
  p.bodyInverseInertia_ = bodyFrameInertia.inverse();
  // Keep the inverse exactly symmetric so world transforms stay symmetric.
  p.bodyInverseInertia_ = 0.5 * (p.bodyInverseInertia_ + p.bodyInverseInertia_.transpose()).eval();
  return p;
}

MassProperties MassProperties::solidSphere(double radius, double density)
{
  requirePositiveRadius(radius);
  const double m = density * 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
  return finite(m, Matrix3::Identity() * (0.4 * m * radius * radius));
}

MassProperties MassProperties::composite(const CompositeOfSpheres& shape, double density)
{
  validateShape(shape);
  double m = 0.0;
  Matrix3 inertia = Matrix3::Zero();
  for (const auto& e : shape.spheres)
  {
    const double r = e.radius;
    const double mk = density * 4.0 / 3.0 * std::numbers::pi * r * r * r;
    m += mk;
    inertia += Matrix3::Identity() * (0.4 * mk * r * r);
    inertia += mk * (e.offset.squaredNorm() * Matrix3::Identity() - e.offset * e.offset.transpose());
  }
  return finite(m, inertia);
}

double MassProperties::mass() const
{
  if (infinite_)
  {
    throw std::logic_error("mass of a fixture is infinite");
  }
  return mass_;
}

const Matrix3& MassProperties::bodyFrameInertia() const
{
  if (infinite_)
  {
    throw std::logic_error("inertia of a fixture is infinite");
  }
  return bodyInertia_;
}

const Matrix3& Inertia::matrix() const
{
  if (!tensor_)
  {
    throw std::logic_error("inertia is infinite");
  }
  return *tensor_;
}

Matrix43 quatDerivativeMatrix(const Quaternion& q)
{
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Matrix43 m;
  // clang-format off
  m << -x, -y, -z,
        w,  z, -y,
       -z,  w,  x,
        y, -x,  w;
  // clang-format on
  return 0.5 * m;
}

Matrix3 rotationMatrix(const Quaternion& q)
{
  return q.toRotationMatrix();
}

Inertia worldInertia(const Quaternion& q, const Inertia& bodyFrameInertia)
{
  if (bodyFrameInertia.isInfinite())
  {
    return bodyFrameInertia;
  }
  const Matrix3 r = rotationMatrix(q);
  return Inertia{r * bodyFrameInertia.matrix() * r.transpose()};
}

Inertia worldInertia(const Quaternion& q, const MassProperties& props)
{
  if (props.isInfinite())
  {
    return Inertia::infinite();
  }
  return worldInertia(q, Inertia{props.bodyFrameInertia()});
}

Matrix3 worldInverseInertia(const Quaternion& q, const MassProperties& props)
{
  if (props.isInfinite())
  {
    return Matrix3::Zero();
  }
  const Matrix3 r = rotationMatrix(q);
  return r * props.bodyFrameInverseInertia() * r.transpose();
}

Matrix3 crossMatrix(const Vector3& r)
{
  Matrix3 m;
  // clang-format off
  m <<     0.0, -r.z(),  r.y(),
         r.z(),    0.0, -r.x(),
        -r.y(),  r.x(),    0.0;
  // clang-format on
  return m;
}

Velocities integrateVelocities(const RigidBody& body, const Wrench& totalWrench, double dt)
{
  const auto& props = body.massProperties;
  if (props.isInfinite())
  {
    return {body.linearVelocity, body.angularVelocity};
  }
  const Matrix3 r = rotationMatrix(body.orientation);
  const Matrix3 inertia = r * props.bodyFrameInertia() * r.transpose();
  const Matrix3 inverseInertia = r * props.bodyFrameInverseInertia() * r.transpose();
  const Vector3& w = body.angularVelocity;
  const Vector3 gyroscopic = w.cross(inertia * w);
  Velocities out;
  out.linear = body.linearVelocity + dt * props.inverseMass() * totalWrench.force;
  out.angular = w + dt * (inverseInertia * (totalWrench.torque - gyroscopic));
  return out;
}

Pose integratePositions(const RigidBody& body, double dt)
{
  Pose out;
  out.position = body.position + dt * body.linearVelocity;
  const Eigen::Vector4d rate = quatDerivativeMatrix(body.orientation) * body.angularVelocity;
  const Quaternion& q = body.orientation;
  Quaternion next(q.w() + dt * rate(0), q.x() + dt * rate(1), q.y() + dt * rate(2),
                  q.z() + dt * rate(3));
  next.normalize();
  out.orientation = next;
  return out;
}

double boundingRadius(const Shape& shape)
{
  return std::visit(Overloaded{
                        [](const Sphere& s) { return s.radius; },
                        [](const CompositeOfSpheres& c) {
                          double r = 0.0;
                          for (const auto& e : c.spheres)
                          {
                            r = std::max(r, e.offset.norm() + e.radius);
                          }
                          return r;
                        },
                        [](const HalfSpace&) -> double {
                          throw UnboundedShapeError("half-spaces are global-only shapes");
                        },
                    },
                    shape);
}

std::vector<WorldSphere> worldSpheres(const Shape& shape, const Vector3& position,
                                      const Quaternion& orientation)
{
  return std::visit(Overloaded{
                        [&](const Sphere& s) {
                          return std::vector<WorldSphere>{{position, s.radius}};
                        },
                        [&](const CompositeOfSpheres& c) {
                          const Matrix3 r = rotationMatrix(orientation);
                          std::vector<WorldSphere> out;
                          out.reserve(c.spheres.size());
                          for (const auto& e : c.spheres)
                          {
                            out.push_back({position + r * e.offset, e.radius});
                          }
                          return out;
                        },
                        [](const HalfSpace&) -> std::vector<WorldSphere> {
                          throw UnboundedShapeError("half-spaces are global-only shapes");
                        },
                    },
                    shape);
}

}  // namespace nscd
