#include "nscd/collision.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace nscd
{

double expansionRadius(const Vector3& linearVelocity, const Vector3& angularVelocity,
                       double boundingRadius, const HullConfig& cfg)
{
  return cfg.dt * (linearVelocity.norm() + angularVelocity.norm() * boundingRadius) +
         cfg.safetyMargin;
}

double expansionRadius(const RigidBody& body, const HullConfig& cfg)
{
  return expansionRadius(body.linearVelocity, body.angularVelocity, boundingRadius(body.shape),
                         cfg);
}

HalfSpace worldHalfSpace(const RigidBody& body)
{
  const auto& local = std::get<HalfSpace>(body.shape);
  HalfSpace out;
  out.normal = rotationMatrix(body.orientation) * local.normal;
  out.offset = local.offset + out.normal.dot(body.position);
  return out;
}

ShapeInstance makeShapeInstance(const RigidBody& body, const HullConfig& cfg)
{
  ShapeInstance inst;
  inst.id = body.id;
  inst.center = body.position;
  inst.global = body.kind == BodyKind::Global;
  if (isBounded(body.shape))
  {
    inst.spheres = worldSpheres(body.shape, body.position, body.orientation);
    inst.boundingRadius = boundingRadius(body.shape);
    inst.expansion = expansionRadius(body.linearVelocity, body.angularVelocity,
                                     inst.boundingRadius, cfg);
  }
  else
  {
    inst.plane = worldHalfSpace(body);
    inst.global = true;
  }
  return inst;
}

ShapeInstance translated(const ShapeInstance& instance, const Vector3& offset)
{
  ShapeInstance out = instance;
  out.center += offset;
  for (auto& s : out.spheres)
  {
    s.center += offset;
  }
  if (out.plane)
  {
    out.plane->offset += out.plane->normal.dot(offset);
  }
  return out;
}

namespace
{

struct CellKey
{
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash
{
  std::size_t operator()(const CellKey& k) const noexcept
  {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

ContactCandidate canonical(std::span<const ShapeInstance> inst, std::size_t i, std::size_t j)
{
  const auto ki = std::pair{raw(inst[i].id), i};
  const auto kj = std::pair{raw(inst[j].id), j};
  return ki < kj ? ContactCandidate{i, j} : ContactCandidate{j, i};
}

bool pairable(const ShapeInstance& a, const ShapeInstance& b)
{
  return a.id != b.id && !(a.global && b.global);
}

}  // namespace

std::vector<ContactCandidate> broadPhase(std::span<const ShapeInstance> instances)
{
  std::vector<ContactCandidate> out;
  std::vector<std::size_t> gridded;
  std::vector<std::size_t> unboundedOrGlobal;
  double cell = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i)
  {
    const auto& in = instances[i];
    if (in.bounded() && !in.global)
    {
      gridded.push_back(i);
      cell = std::max(cell, 2.0 * in.hullRadius());
    }
    else
    {
      unboundedOrGlobal.push_back(i);
    }
  }

  if (!gridded.empty())
  {
    const double inv = 1.0 / cell;
    auto keyOf = [&](const Vector3& x) {
      return CellKey{static_cast<std::int64_t>(std::floor(x.x() * inv)),
                     static_cast<std::int64_t>(std::floor(x.y() * inv)),
                     static_cast<std::int64_t>(std::floor(x.z() * inv))};
    };
    std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> grid;
    grid.reserve(gridded.size());
    for (std::size_t i : gridded)
    {
      grid[keyOf(instances[i].center)].push_back(i);
    }
    for (std::size_t i : gridded)
    {
      const auto& a = instances[i];
      const CellKey k = keyOf(a.center);
      for (std::int64_t dx = -1; dx <= 1; ++dx)
      {
        for (std::int64_t dy = -1; dy <= 1; ++dy)
        {
          for (std::int64_t dz = -1; dz <= 1; ++dz)
          {
            const auto it = grid.find(CellKey{k.x + dx, k.y + dy, k.z + dz});
            if (it == grid.end())
            {
              continue;
            }
            for (std::size_t j : it->second)
            {
              if (j <= i || !pairable(a, instances[j]))
              {
                continue;
              }
              const auto& b = instances[j];
              const double reach = a.hullRadius() + b.hullRadius();
              if ((a.center - b.center).squaredNorm() <= reach * reach)
              {
                out.push_back(canonical(instances, i, j));
              }
            }
          }
        }
      }
    }
  }

  for (std::size_t g : unboundedOrGlobal)
  {
    for (std::size_t i = 0; i < instances.size(); ++i)
    {
      if (i == g || !pairable(instances[g], instances[i]))
      {
        continue;
      }
      // Pairs of two non-gridded instances are only visited from the smaller index.
      const bool otherUngridded = !(instances[i].bounded() && !instances[i].global);
      if (otherUngridded && i < g)
      {
        continue;
      }
      out.push_back(canonical(instances, g, i));
    }
  }

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<ContactCandidate> broadPhase(std::span<const RigidBody> bodies, const HullConfig& cfg)
{
  std::vector<ShapeInstance> instances;
  instances.reserve(bodies.size());
  for (const auto& b : bodies)
  {
    instances.push_back(makeShapeInstance(b, cfg));
  }
  return broadPhase(instances);
}

std::pair<Vector3, Vector3> contactFrame(const Vector3& normal)
{
  const Vector3 a = normal.cwiseAbs();
  int axis = 0;
  if (a.y() < a(axis))
  {
    axis = 1;
  }
  if (a.z() < a(axis))
  {
    axis = 2;
  }
  const Vector3 t = normal.cross(Vector3::Unit(axis)).normalized();
  const Vector3 o = normal.cross(t);
  return {t, o};
}

namespace
{

Contact withFrame(Contact c)
{
  auto [t, o] = contactFrame(c.normal);
  c.tangent = t;
  c.bitangent = o;
  return c;
}

}  // namespace

std::optional<Contact> sphereSphereContact(const WorldSphere& a, double expansionA,
                                           const WorldSphere& b, double expansionB, double mu)
{
  const Vector3 d = a.center - b.center;
  const double dist = d.norm();
  if (dist > a.radius + b.radius + expansionA + expansionB)
  {
    return std::nullopt;
  }
  if (dist == 0.0)
  {
    throw DegenerateContactError("coincident sphere centers");
  }
  Contact c;
  c.normal = d / dist;
  c.signedDistance = dist - a.radius - b.radius;
  c.point = b.center + (b.radius + 0.5 * c.signedDistance) * c.normal;
  c.frictionCoefficient = mu;
  return withFrame(c);
}

std::optional<Contact> sphereHalfSpaceContact(const WorldSphere& s, double expansion,
                                              const HalfSpace& plane, double mu)
{
  const double height = plane.normal.dot(s.center) - plane.offset;
  const double xi = height - s.radius;
  if (xi > expansion)
  {
    return std::nullopt;
  }
  Contact c;
  c.normal = plane.normal;
  c.signedDistance = xi;
  c.point = s.center - (s.radius + 0.5 * xi) * plane.normal;
  c.frictionCoefficient = mu;
  return withFrame(c);
}

std::vector<Contact> narrowPhase(const ShapeInstance& a, const ShapeInstance& b, double mu)
{
  std::vector<Contact> out;
  if (!a.bounded())
  {
    throw std::invalid_argument("the first instance of a contact must be bounded");
  }
  for (std::size_t i = 0; i < a.spheres.size(); ++i)
  {
    if (b.plane)
    {
      if (auto c = sphereHalfSpaceContact(a.spheres[i], a.expansion, *b.plane, mu))
      {
        c->id = ContactId{constituentKey(a.id, i), constituentKey(b.id, 0), {0, 0, 0}};
        c->body1 = a.id;
        c->body2 = b.id;
        out.push_back(*c);
      }
      continue;
    }
    for (std::size_t j = 0; j < b.spheres.size(); ++j)
    {
      if (auto c = sphereSphereContact(a.spheres[i], a.expansion, b.spheres[j], b.expansion, mu))
      {
        c->id = ContactId{constituentKey(a.id, i), constituentKey(b.id, j), {0, 0, 0}};
        c->body1 = a.id;
        c->body2 = b.id;
        out.push_back(*c);
      }
    }
  }
  return out;
}

std::optional<Contact> narrowPhaseSphereSphere(const RigidBody& a, const RigidBody& b, double mu,
                                               const HullConfig& cfg)
{
  if (!std::holds_alternative<Sphere>(a.shape) || !std::holds_alternative<Sphere>(b.shape))
  {
    throw std::invalid_argument("narrowPhaseSphereSphere expects two spheres");
  }
  auto contacts = narrowPhase(makeShapeInstance(a, cfg), makeShapeInstance(b, cfg), mu);
  if (contacts.empty())
  {
    return std::nullopt;
  }
  return contacts.front();
}

std::optional<Contact> narrowPhaseSphereHalfspace(const RigidBody& s, const RigidBody& w,
                                                  double mu, const HullConfig& cfg)
{
  if (!std::holds_alternative<Sphere>(s.shape) || !std::holds_alternative<HalfSpace>(w.shape))
  {
    throw std::invalid_argument("narrowPhaseSphereHalfspace expects a sphere and a half-space");
  }
  auto contacts = narrowPhase(makeShapeInstance(s, cfg), makeShapeInstance(w, cfg), mu);
  if (contacts.empty())
  {
    return std::nullopt;
  }
  return contacts.front();
}

}  // namespace nscd
