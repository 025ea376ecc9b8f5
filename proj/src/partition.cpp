#include "nscd/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nscd
{

bool Box::contains(const Vector3& x) const
{
  return (x.array() >= lo.array()).all() && (x.array() < hi.array()).all();
}

double distanceToBox(const Vector3& x, const Box& box)
{
  const Vector3 clamped = x.cwiseMax(box.lo).cwiseMin(box.hi);
  return (x - clamped).norm();
}

double boxDistance(const Box& a, const Box& b)
{
  Vector3 gap;
  for (int k = 0; k < 3; ++k)
  {
    gap(k) = std::max({0.0, a.lo(k) - b.hi(k), b.lo(k) - a.hi(k)});
  }
  return gap.norm();
}

DomainPartition::DomainPartition(const Box& domain, std::array<int, 3> grid,
                                 std::array<bool, 3> periodic)
    : domain_(domain), grid_(grid), periodic_(periodic)
{
  for (int k = 0; k < 3; ++k)
  {
    if (grid_[k] < 1)
    {
      throw std::invalid_argument("rank grid counts must be positive");
    }
    if (!(domain_.hi(k) > domain_.lo(k)))
    {
      throw std::invalid_argument("domain box must have positive extent");
    }
    auto& s = splits_[k];
    s.resize(grid_[k] + 1);
    const double extent = domain_.hi(k) - domain_.lo(k);
    for (int c = 0; c <= grid_[k]; ++c)
    {
      s[c] = domain_.lo(k) + extent * c / grid_[k];
    }
    s.back() = domain_.hi(k);
  }

  for (int dx = -1; dx <= 1; ++dx)
  {
    for (int dy = -1; dy <= 1; ++dy)
    {
      for (int dz = -1; dz <= 1; ++dz)
      {
        const std::array<int, 3> d{dx, dy, dz};
        bool ok = true;
        for (int k = 0; k < 3; ++k)
        {
          ok = ok && (d[k] == 0 || periodic_[k]);
        }
        if (ok)
        {
          shifts_.push_back({static_cast<std::int8_t>(dx), static_cast<std::int8_t>(dy),
                             static_cast<std::int8_t>(dz)});
        }
      }
    }
  }
  std::stable_partition(shifts_.begin(), shifts_.end(),
                        [](const ImageShift& s) { return s == ImageShift{0, 0, 0}; });

  neighbors_.resize(size());
  for (RankId p = 0; p < size(); ++p)
  {
    const auto c = coordinates(p);
    auto& list = neighbors_[p];
    for (int dx = -1; dx <= 1; ++dx)
    {
      for (int dy = -1; dy <= 1; ++dy)
      {
        for (int dz = -1; dz <= 1; ++dz)
        {
          std::array<int, 3> n{c[0] + dx, c[1] + dy, c[2] + dz};
          bool ok = true;
          for (int k = 0; k < 3; ++k)
          {
            if (n[k] < 0 || n[k] >= grid_[k])
            {
              if (!periodic_[k])
              {
                ok = false;
                break;
              }
              n[k] = (n[k] + grid_[k]) % grid_[k];
            }
          }
          if (!ok)
          {
            continue;
          }
          const RankId q = rankAt(n);
          if (q != p)
          {
            list.push_back(q);
          }
        }
      }
    }
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }

  ldd_ = std::numeric_limits<double>::infinity();
  for (RankId p = 0; p < size(); ++p)
  {
    const Box bp = subdomain(p);
    for (RankId q = 0; q < size(); ++q)
    {
      if (q == p || isNeighbor(p, q))
      {
        continue;
      }
      const Box bq = subdomain(q);
      for (const auto& s : shifts_)
      {
        const Vector3 off = shiftVector(s);
        ldd_ = std::min(ldd_, boxDistance(bp, Box{bq.lo + off, bq.hi + off}));
      }
    }
  }
}

std::array<int, 3> DomainPartition::coordinates(RankId rank) const
{
  if (rank < 0 || rank >= size())
  {
    throw std::out_of_range("rank out of range");
  }
  return {rank % grid_[0], (rank / grid_[0]) % grid_[1], rank / (grid_[0] * grid_[1])};
}

RankId DomainPartition::rankAt(std::array<int, 3> c) const
{
  return c[0] + grid_[0] * (c[1] + grid_[1] * c[2]);
}

Box DomainPartition::subdomain(RankId rank) const
{
  const auto c = coordinates(rank);
  Box b;
  for (int k = 0; k < 3; ++k)
  {
    b.lo(k) = splits_[k][c[k]];
    b.hi(k) = splits_[k][c[k] + 1];
  }
  return b;
}

const std::vector<RankId>& DomainPartition::neighbors(RankId rank) const
{
  return neighbors_.at(rank);
}

bool DomainPartition::isNeighbor(RankId rank, RankId other) const
{
  const auto& n = neighbors(rank);
  return std::binary_search(n.begin(), n.end(), other);
}

Vector3 DomainPartition::wrap(const Vector3& x) const
{
  Vector3 out = x;
  for (int k = 0; k < 3; ++k)
  {
    if (!periodic_[k])
    {
      continue;
    }
    const double lo = domain_.lo(k), hi = domain_.hi(k), len = hi - lo;
    double v = out(k);
    if (v < lo || v >= hi)
    {
      v -= std::floor((v - lo) / len) * len;
      if (v >= hi || v < lo)
      {
        v = lo;
      }
    }
    out(k) = v;
  }
  return out;
}

int DomainPartition::axisIndex(int axis, double x) const
{
  const auto& s = splits_[axis];
  if (!(x >= s.front() && x < s.back()))
  {
    throw OutOfDomainError("point outside the domain along axis " + std::to_string(axis));
  }
  const auto it = std::upper_bound(s.begin(), s.end(), x);
  return static_cast<int>(it - s.begin()) - 1;
}

RankId DomainPartition::ownerOfPoint(const Vector3& x) const
{
  const Vector3 w = wrap(x);
  return rankAt({axisIndex(0, w.x()), axisIndex(1, w.y()), axisIndex(2, w.z())});
}

Vector3 DomainPartition::shiftVector(const ImageShift& s) const
{
  const Vector3 e = extent();
  return Vector3(s[0] * e.x(), s[1] * e.y(), s[2] * e.z());
}

RankId ownerOfPoint(const DomainPartition& part, const Vector3& x)
{
  return part.ownerOfPoint(x);
}

std::vector<LddViolation> checkLddCondition(const DomainPartition& part,
                                            std::span<const RigidBody> bodies,
                                            const HullConfig& cfg)
{
  std::vector<LddViolation> out;
  for (const auto& b : bodies)
  {
    if (b.kind == BodyKind::Global || !isBounded(b.shape))
    {
      continue;
    }
    const double reach =
        boundingRadius(b.shape) + b.linearVelocity.norm() * cfg.dt + cfg.safetyMargin;
    if (!(reach < part.ldd()))
    {
      out.push_back({b.id, reach - part.ldd()});
    }
  }
  return out;
}

bool hullIntersectsBox(const ShapeInstance& instance, const Box& box)
{
  if (!instance.bounded())
  {
    return true;
  }
  if (distanceToBox(instance.center, box) > instance.hullRadius())
  {
    return false;
  }
  for (const auto& s : instance.spheres)
  {
    if (distanceToBox(s.center, box) <= s.radius + instance.expansion)
    {
      return true;
    }
  }
  return false;
}

}  // namespace nscd
