#include "nscd/dynamics.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace nscd;

namespace
{

Quaternion randomUnitQuaternion(std::mt19937_64& rng)
{
  std::normal_distribution<double> n;
  Quaternion q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

RigidBody freeSphere(double radius, double density)
{
  RigidBody b;
  b.shape = Sphere{radius};
  b.massProperties = MassProperties::solidSphere(radius, density);
  return b;
}

}  // namespace

TEST_CASE("quaternion derivative matrix at identity and at a half turn about x")
{
  Matrix43 expectedIdentity;
  expectedIdentity << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  CHECK(quatDerivativeMatrix(Quaternion::Identity()).isApprox(0.5 * expectedIdentity));

  Matrix43 expectedX;
  expectedX << -1, 0, 0, 0, 0, 0, 0, 0, 1, 0, -1, 0;
  CHECK((quatDerivativeMatrix(Quaternion(0, 1, 0, 0)) - 0.5 * expectedX).norm() == 0.0);
}

TEST_CASE("quaternion derivative matches the product rule q' = 1/2 (0, w) q")
{
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i)
  {
    const Quaternion q = randomUnitQuaternion(rng);
    const Vector3 w = Vector3::Random();
    const Quaternion pure(0.0, w.x(), w.y(), w.z());
    const Quaternion product = pure * q;
    const Eigen::Vector4d expected(0.5 * product.w(), 0.5 * product.x(), 0.5 * product.y(),
                                   0.5 * product.z());
    CHECK((quatDerivativeMatrix(q) * w - expected).norm() < 1e-15);
  }
}

TEST_CASE("world inertia rotates the body-frame tensor")
{
  const Matrix3 i0 = Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal();
  CHECK(worldInertia(Quaternion::Identity(), Inertia(i0)).matrix() == i0);

  const Quaternion quarter(Eigen::AngleAxisd(std::numbers::pi / 2, Vector3::UnitZ()));
  const Matrix3 expected = Eigen::Vector3d(2.0, 1.0, 3.0).asDiagonal();
  CHECK((worldInertia(quarter, Inertia(i0)).matrix() - expected).norm() < 1e-15);

  CHECK(worldInertia(quarter, Inertia::infinite()).isInfinite());
  CHECK(worldInertia(quarter, MassProperties::infinite()).isInfinite());
  CHECK(worldInverseInertia(quarter, MassProperties::infinite()) == Matrix3::Zero());
}

TEST_CASE("rotation matrix is the active rotation of the unit quaternion")
{
  const Quaternion quarter(Eigen::AngleAxisd(std::numbers::pi / 2, Vector3::UnitZ()));
  CHECK((rotationMatrix(quarter) * Vector3::UnitX() - Vector3::UnitY()).norm() < 1e-15);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i)
  {
    const Matrix3 r = rotationMatrix(randomUnitQuaternion(rng));
    CHECK((r * r.transpose() - Matrix3::Identity()).norm() < 1e-14);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("cross matrix reproduces the cross product")
{
  CHECK(crossMatrix(Vector3::Zero()) == Matrix3::Zero());
  CHECK(crossMatrix(Vector3::UnitX()) * Vector3::UnitY() == Vector3::UnitZ());
  const Vector3 r(0.3, -1.2, 2.5), v(-0.7, 0.4, 1.1);
  CHECK((crossMatrix(r) * v - r.cross(v)).norm() < 1e-15);
  CHECK(crossMatrix(r).transpose() == -crossMatrix(r));
}

TEST_CASE("velocity integration")
{
  RigidBody b = freeSphere(0.1, 1000.0);
  SUBCASE("zero wrench and zero spin leave velocities unchanged")
  {
    b.linearVelocity = Vector3(1, 2, 3);
    const Velocities v = integrateVelocities(b, Wrench{}, 1e-4);
    CHECK(v.linear == b.linearVelocity);
    CHECK(v.angular == Vector3::Zero());
  }
  SUBCASE("unit mass under gravity gains g dt")
  {
    b.massProperties = MassProperties::finite(1.0, Matrix3::Identity());
    const Velocities v = integrateVelocities(b, Wrench{Vector3(0, 0, -9.81), Vector3::Zero()}, 1e-4);
    CHECK(v.linear.z() == doctest::Approx(-9.81e-4).epsilon(1e-15));
    CHECK(v.linear.head<2>() == Eigen::Vector2d::Zero());
  }
  SUBCASE("fixtures keep their velocities")
  {
    RigidBody wall;
    wall.shape = HalfSpace{};
    wall.linearVelocity = Vector3(0.5, 0, 0);
    const Velocities v = integrateVelocities(wall, Wrench{Vector3(1, 1, 1), Vector3(1, 1, 1)}, 1.0);
    CHECK(v.linear == wall.linearVelocity);
    CHECK(v.angular == Vector3::Zero());
  }
  SUBCASE("gyroscopic term vanishes for an isotropic body")
  {
    b.angularVelocity = Vector3(3, -1, 2);
    CHECK((integrateVelocities(b, Wrench{}, 1e-2).angular - b.angularVelocity).norm() < 1e-15);
  }
}

TEST_CASE("position integration")
{
  RigidBody b = freeSphere(0.1, 1000.0);
  SUBCASE("a body at rest stays put")
  {
    b.position = Vector3(1, 2, 3);
    const Pose p = integratePositions(b, 1e-2);
    CHECK(p.position == b.position);
    CHECK(p.orientation.coeffs() == b.orientation.coeffs());
  }
  SUBCASE("translation by v dt")
  {
    b.linearVelocity = Vector3(1, 0, 0);
    CHECK((integratePositions(b, 1e-2).position - Vector3(0.01, 0, 0)).norm() < 1e-17);
  }
  SUBCASE("a full turn about z over 1000 steps closes with first-order error")
  {
    b.angularVelocity = Vector3(0, 0, 2 * std::numbers::pi);
    const double dt = 1e-3;
    for (int k = 0; k < 1000; ++k)
    {
      b.orientation = integratePositions(b, dt).orientation;
      CHECK(std::abs(b.orientation.norm() - 1.0) < 1e-14);
    }
    // Closed form after time T is a rotation by 2 pi; the explicit quaternion
    // update with renormalization lags by O(dt) in angle.
    const Eigen::AngleAxisd aa(b.orientation);
    const double angleError = std::min(aa.angle(), 2 * std::numbers::pi - aa.angle());
    CHECK(angleError < 10 * dt);
    CHECK(std::abs(b.orientation.x()) < 1e-14);
    CHECK(std::abs(b.orientation.y()) < 1e-14);
  }
}

TEST_CASE("bounding radius")
{
  CHECK(boundingRadius(Sphere{0.01}) == 0.01);
  CHECK(boundingRadius(CompositeOfSpheres{{{Vector3(0.004, 0, 0), 0.006}}}) ==
        doctest::Approx(0.01).epsilon(1e-15));
  CHECK_THROWS_AS(boundingRadius(HalfSpace{}), UnboundedShapeError);
}

TEST_CASE("shape validation")
{
  CHECK_THROWS_AS(validateShape(Sphere{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(validateShape(CompositeOfSpheres{}), std::invalid_argument);
  CHECK_THROWS_AS(validateShape(HalfSpace{Vector3(0, 0, 2), 0}), std::invalid_argument);
  CHECK_NOTHROW(validateShape(HalfSpace{Vector3::UnitX(), 1.0}));
}

TEST_CASE("mass properties")
{
  const auto sphere = MassProperties::solidSphere(0.5, 3.0);
  const double m = 3.0 * 4.0 / 3.0 * std::numbers::pi * 0.125;
  CHECK(sphere.mass() == doctest::Approx(m).epsilon(1e-15));
  CHECK(sphere.inverseMass() == doctest::Approx(1.0 / m).epsilon(1e-15));
  CHECK((sphere.bodyFrameInertia() * sphere.bodyFrameInverseInertia() - Matrix3::Identity()).norm() <
        1e-14);

  const auto fixture = MassProperties::infinite();
  CHECK(fixture.isInfinite());
  CHECK(fixture.inverseMass() == 0.0);
  CHECK(fixture.bodyFrameInverseInertia() == Matrix3::Zero());
  CHECK_THROWS(fixture.mass());

  // Two equal spheres at +-d: parallel-axis theorem by hand.
  const double r = 0.2, d = 0.3, rho = 2.0;
  const auto pair = MassProperties::composite(
      CompositeOfSpheres{{{Vector3(d, 0, 0), r}, {Vector3(-d, 0, 0), r}}}, rho);
  const double mk = rho * 4.0 / 3.0 * std::numbers::pi * r * r * r;
  CHECK(pair.mass() == doctest::Approx(2 * mk).epsilon(1e-15));
  CHECK(pair.bodyFrameInertia()(0, 0) == doctest::Approx(2 * 0.4 * mk * r * r).epsilon(1e-14));
  CHECK(pair.bodyFrameInertia()(1, 1) ==
        doctest::Approx(2 * (0.4 * mk * r * r + mk * d * d)).epsilon(1e-14));
}
