#pragma once

#include "nscd/collision.hpp"
#include "nscd/dynamics.hpp"

#include <array>
#include <compare>
#include <span>
#include <stdexcept>
#include <vector>

namespace nscd
{

struct Box
{
  Vector3 lo = Vector3::Zero();
  Vector3 hi = Vector3::Zero();

  bool contains(const Vector3& x) const;  // half-open [lo, hi)
};

/// Euclidean distance from a point to the closed box (0 inside).
double distanceToBox(const Vector3& x, const Box& box);

/// Distance between two closed boxes.
double boxDistance(const Box& a, const Box& b);

class OutOfDomainError : public std::out_of_range
{
 public:
  using std::out_of_range::out_of_range;
};

/// Axis-aligned Cartesian grid of subdomains over Omega with optional
/// per-axis periodicity. Split planes are lo + extent * c / n and intervals are
/// half-open, so every point of Omega belongs to exactly one subdomain.
class DomainPartition
{
 public:
  DomainPartition(const Box& domain, std::array<int, 3> grid, std::array<bool, 3> periodic);

  int size() const noexcept { return grid_[0] * grid_[1] * grid_[2]; }
  const Box& domain() const noexcept { return domain_; }
  const std::array<int, 3>& grid() const noexcept { return grid_; }
  const std::array<bool, 3>& periodic() const noexcept { return periodic_; }
  Vector3 extent() const { return domain_.hi - domain_.lo; }

  std::array<int, 3> coordinates(RankId rank) const;
  RankId rankAt(std::array<int, 3> coords) const;
  Box subdomain(RankId rank) const;

  /// Ranks other than `rank` whose subdomain (or a periodic image of it)
  /// touches the subdomain of `rank`, ascending.
  const std::vector<RankId>& neighbors(RankId rank) const;
  bool isNeighbor(RankId rank, RankId other) const;

  /// Minimum distance from any subdomain to a non-neighbour subdomain;
  /// +infinity when every pair of subdomains is adjacent.
  double ldd() const noexcept { return ldd_; }

  /// Maps periodic coordinates into [lo, hi); non-periodic axes are untouched.
  Vector3 wrap(const Vector3& x) const;

  /// Owning rank of a point. Periodic coordinates are wrapped first; a point
  /// outside a non-periodic extent raises OutOfDomainError.
  RankId ownerOfPoint(const Vector3& x) const;

  /// Image shifts in {-1, 0, 1} along periodic axes (0 elsewhere), zero first.
  const std::vector<ImageShift>& imageShifts() const noexcept { return shifts_; }
  Vector3 shiftVector(const ImageShift& s) const;

 private:
  int axisIndex(int axis, double x) const;

  Box domain_;
  std::array<int, 3> grid_;
  std::array<bool, 3> periodic_;
  std::array<std::vector<double>, 3> splits_;
  std::vector<std::vector<RankId>> neighbors_;
  std::vector<ImageShift> shifts_;
  double ldd_ = 0.0;
};

RankId ownerOfPoint(const DomainPartition& part, const Vector3& x);

struct LddViolation
{
  BodyId body{};
  double margin = 0.0;  // (r + |v| dt + tau) - l_dd, >= 0
};

/// Checks r + |v| dt + tau < l_dd for every bounded, non-global body.
std::vector<LddViolation> checkLddCondition(const DomainPartition& part,
                                            std::span<const RigidBody> bodies,
                                            const HullConfig& cfg);

/// True if any constituent hull sphere of the instance touches the closed box.
bool hullIntersectsBox(const ShapeInstance& instance, const Box& box);

}  // namespace nscd
