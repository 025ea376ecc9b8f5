#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace nscd
{

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix43 = Eigen::Matrix<double, 4, 3>;

/// Unit quaternions are scalar-first, right-handed, and rotate actively:
/// a body-frame vector r maps to R(q) r in the observational frame.
using Quaternion = Eigen::Quaterniond;

enum class BodyId : std::uint64_t
{
};

using RankId = int;

constexpr std::uint64_t raw(BodyId id) noexcept
{
  return static_cast<std::uint64_t>(id);
}

/// Raised when an operation requires a bounded shape and gets a half-space.
class UnboundedShapeError : public std::invalid_argument
{
 public:
  using std::invalid_argument::invalid_argument;
};

struct Sphere
{
  double radius = 0.0;
};

struct SphereElement
{
  Vector3 offset = Vector3::Zero();  // body frame, relative to the center of mass
  double radius = 0.0;
};

struct CompositeOfSpheres
{
  std::vector<SphereElement> spheres;
};

/// Solid region {y : normal . y <= offset} in the body frame.
struct HalfSpace
{
  Vector3 normal = Vector3::UnitZ();
  double offset = 0.0;
};

using Shape = std::variant<Sphere, CompositeOfSpheres, HalfSpace>;

bool isBounded(const Shape& shape) noexcept;

/// Throws std::invalid_argument if a radius is not positive, a composite is
/// empty or a half-space normal is not unit length.
void validateShape(const Shape& shape);

/// Mass or inertia of a fixture is "infinite": its inverse is exactly zero.
class MassProperties
{
 public:
  static MassProperties infinite();
  static MassProperties finite(double mass, const Matrix3& bodyFrameInertia);

  /// Uniform-density sphere, principal axes aligned with the body frame.
  static MassProperties solidSphere(double radius, double density);

  /// Sum of uniform-density constituent spheres; offsets are taken relative to
  /// the body origin, which the caller places at the center of mass.
  static MassProperties composite(const CompositeOfSpheres& shape, double density);

  bool isInfinite() const noexcept { return infinite_; }
  double mass() const;
  double inverseMass() const noexcept { return inverseMass_; }
  const Matrix3& bodyFrameInertia() const;
  const Matrix3& bodyFrameInverseInertia() const noexcept { return bodyInverseInertia_; }

 private:
  bool infinite_ = true;
  double mass_ = 0.0;
  double inverseMass_ = 0.0;
  Matrix3 bodyInertia_ = Matrix3::Zero();
  Matrix3 bodyInverseInertia_ = Matrix3::Zero();
};

/// World-frame inertia, or the infinite marker.
class Inertia
{
 public:
  static Inertia infinite() { return Inertia{}; }
  explicit Inertia(const Matrix3& tensor) : tensor_(tensor) {}

  bool isInfinite() const noexcept { return !tensor_.has_value(); }
  const Matrix3& matrix() const;

 private:
  Inertia() = default;
  std::optional<Matrix3> tensor_;
};

enum class BodyKind : std::uint8_t
{
  Local,
  Shadow,
  Global,
};

struct RigidBody
{
  BodyId id{};
  Vector3 position = Vector3::Zero();
  Quaternion orientation = Quaternion::Identity();
  Vector3 linearVelocity = Vector3::Zero();
  Vector3 angularVelocity = Vector3::Zero();
  MassProperties massProperties = MassProperties::infinite();
  Shape shape = Sphere{1.0};
  BodyKind kind = BodyKind::Local;
  RankId parentRank = 0;
};

struct Wrench
{
  Vector3 force = Vector3::Zero();
  Vector3 torque = Vector3::Zero();
};

struct Velocities
{
  Vector3 linear = Vector3::Zero();
  Vector3 angular = Vector3::Zero();
};

struct Pose
{
  Vector3 position = Vector3::Zero();
  Quaternion orientation = Quaternion::Identity();
};

/// Half of the 4x3 block mapping angular velocity to the quaternion rate,
/// with rows ordered (w, x, y, z).
Matrix43 quatDerivativeMatrix(const Quaternion& q);

Matrix3 rotationMatrix(const Quaternion& q);

Inertia worldInertia(const Quaternion& q, const Inertia& bodyFrameInertia);
Inertia worldInertia(const Quaternion& q, const MassProperties& props);

/// Inverse world inertia; zero for fixtures.
Matrix3 worldInverseInertia(const Quaternion& q, const MassProperties& props);

Matrix3 crossMatrix(const Vector3& r);

/// v' = v + dt m^-1 f and w' = w + dt I(q)^-1 (tau - w x I(q) w).
/// Fixtures keep their velocities.
Velocities integrateVelocities(const RigidBody& body, const Wrench& totalWrench, double dt);

/// Semi-implicit position update from the body's (already updated) velocities;
/// the orientation is renormalized.
Pose integratePositions(const RigidBody& body, double dt);

/// Largest body-frame distance from the origin to a point of the shape.
/// Throws UnboundedShapeError for half-spaces.
double boundingRadius(const Shape& shape);

/// World-space constituent spheres of a bounded shape (one for a sphere).
struct WorldSphere
{
  Vector3 center;
  double radius;
};
std::vector<WorldSphere> worldSpheres(const Shape& shape, const Vector3& position,
                                      const Quaternion& orientation);

}  // namespace nscd
