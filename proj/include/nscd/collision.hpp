#pragma once

#include "nscd/dynamics.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nscd
{

/// Intersection-hull parameters: h = dt (|v| + |w| r) + safetyMargin.
struct HullConfig
{
  double safetyMargin = 0.0;
  double dt = 1e-4;
};

double expansionRadius(const RigidBody& body, const HullConfig& cfg);
double expansionRadius(const Vector3& linearVelocity, const Vector3& angularVelocity,
                       double boundingRadius, const HullConfig& cfg);

using ImageShift = std::array<std::int8_t, 3>;

/// Constituent sphere key: body id in the upper 56 bits, element index below.
constexpr std::uint64_t constituentKey(BodyId id, std::size_t element) noexcept
{
  return (raw(id) << 8) | static_cast<std::uint64_t>(element);
}

/// Collision-free contact identity derived from the canonical constituent pair
/// and the periodic image of the second body relative to the first. Every rank
/// witnessing the same contact derives the same id.
struct ContactId
{
  std::uint64_t first = 0;
  std::uint64_t second = 0;
  ImageShift shift{0, 0, 0};

  auto operator<=>(const ContactId&) const = default;
  bool operator==(const ContactId&) const = default;
};

/// Indices into the proxy/body list handed to the broad phase; the entry with
/// the smaller body id comes first.
struct ContactCandidate
{
  std::size_t first = 0;
  std::size_t second = 0;

  auto operator<=>(const ContactCandidate&) const = default;
};

struct Contact
{
  ContactId id;
  BodyId body1{};
  BodyId body2{};
  Vector3 point = Vector3::Zero();
  Vector3 normal = Vector3::UnitZ();  // outward with respect to body2
  Vector3 tangent = Vector3::UnitX();
  Vector3 bitangent = Vector3::UnitY();
  double signedDistance = 0.0;
  double frictionCoefficient = 0.0;
};

/// Raised for coincident sphere centers.
class DegenerateContactError : public std::domain_error
{
 public:
  using std::domain_error::domain_error;
};

/// World-space view of one instantiation of a body used by detection.
struct ShapeInstance
{
  BodyId id{};
  std::vector<WorldSphere> spheres;      // empty for half-spaces
  std::optional<HalfSpace> plane;        // world-frame half-space
  Vector3 center = Vector3::Zero();
  double boundingRadius = 0.0;           // 0 for half-spaces
  double expansion = 0.0;                // hull expansion h
  bool global = false;

  bool bounded() const noexcept { return !plane.has_value(); }
  double hullRadius() const noexcept { return boundingRadius + expansion; }
};

ShapeInstance makeShapeInstance(const RigidBody& body, const HullConfig& cfg);

/// Instance translated by a periodic image offset.
ShapeInstance translated(const ShapeInstance& instance, const Vector3& offset);

/// Linked-cell broad phase over bounding-sphere hulls. Unbounded instances are
/// paired with every bounded one; pairs of globals and pairs of instances of
/// the same body are skipped. Output is sorted and duplicate-free.
std::vector<ContactCandidate> broadPhase(std::span<const ShapeInstance> instances);
std::vector<ContactCandidate> broadPhase(std::span<const RigidBody> bodies, const HullConfig& cfg);

/// Orthonormal right-handed tangent pair for a unit normal. The tangent is
/// n x e_k normalized, where e_k is the axis of the smallest |n_k|.
std::pair<Vector3, Vector3> contactFrame(const Vector3& normal);

std::optional<Contact> sphereSphereContact(const WorldSphere& a, double expansionA,
                                           const WorldSphere& b, double expansionB, double mu);

std::optional<Contact> sphereHalfSpaceContact(const WorldSphere& s, double expansion,
                                              const HalfSpace& plane, double mu);

/// All constituent contacts between two instances, j1 = a and j2 = b. Ids are
/// filled from the constituent keys with a zero image shift.
std::vector<Contact> narrowPhase(const ShapeInstance& a, const ShapeInstance& b, double mu);

std::optional<Contact> narrowPhaseSphereSphere(const RigidBody& a, const RigidBody& b, double mu,
                                               const HullConfig& cfg);
std::optional<Contact> narrowPhaseSphereHalfspace(const RigidBody& s, const RigidBody& w,
                                                  double mu, const HullConfig& cfg);

/// World-frame plane of a half-space body.
HalfSpace worldHalfSpace(const RigidBody& body);

}  // namespace nscd
