#include "nscd/scenario.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace nscd
{

std::string_view scenarioName(ScenarioKind kind) noexcept
{
  switch (kind)
  {
    case ScenarioKind::GranularGas:
      return "gas";
    case ScenarioKind::HcpIncline:
      return "hcp";
    case ScenarioKind::Pile:
      return "pile";
  }
  return "unknown";
}

ScenarioKind parseScenarioKind(std::string_view text)
{
  if (text == "gas")
  {
    return ScenarioKind::GranularGas;
  }
  if (text == "hcp")
  {
    return ScenarioKind::HcpIncline;
  }
  if (text == "pile")
  {
    return ScenarioKind::Pile;
  }
  throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

ScenarioConfig defaultConfig(ScenarioKind kind)
{
  ScenarioConfig cfg;
  cfg.scenario = kind;
  switch (kind)
  {
    case ScenarioKind::GranularGas:
      cfg.dt = 1e-4;
      cfg.mu = 0.1;
      cfg.solver.relaxation = 0.75;
      cfg.solver.iterations = 10;
      break;
    case ScenarioKind::HcpIncline:
      cfg.particles = {8, 8, 4};
      cfg.dt = 1e-5;
      cfg.mu = 0.85;
      cfg.solver.relaxation = 0.75;
      cfg.solver.iterations = 100;
      break;
    case ScenarioKind::Pile:
      cfg.dt = 1e-4;
      cfg.mu = 0.85;
      cfg.solver.relaxation = 1.0;
      cfg.solver.iterations = 100;
      cfg.solver.warmStart = true;
      cfg.gravity = Vector3(0.0, 0.0, -9.81);
      break;
  }
  return cfg;
}

void validate(const ScenarioConfig& cfg)
{
  for (int k = 0; k < 3; ++k)
  {
    if (cfg.particles[k] < 1 || cfg.ranks[k] < 1)
    {
      throw ConfigError("particle and rank grid counts must be positive");
    }
    if (cfg.scenario != ScenarioKind::Pile && cfg.particles[k] % cfg.ranks[k] != 0)
    {
      throw ConfigError("particle grid must be divisible by the rank grid along every axis");
    }
  }
  if (cfg.scenario == ScenarioKind::HcpIncline && cfg.particles[1] % 2 != 0)
  {
    throw ConfigError("HCP scenario needs an even n_y");
  }
  if (cfg.steps < 0)
  {
    throw ConfigError("step count must be non-negative");
  }
  if (cfg.scenario == ScenarioKind::Pile && cfg.pileCount < 1)
  {
    throw ConfigError("pile needs at least one sphere");
  }
  if (cfg.scenario == ScenarioKind::GranularGas &&
      !(0.0 < cfg.minRadius && cfg.minRadius <= cfg.maxRadius &&
        cfg.maxRadius <= cfg.boundingRadius && 2.0 * cfg.boundingRadius <= cfg.pitch))
  {
    throw ConfigError("inconsistent granular gas geometry");
  }
}

DomainPartition Scenario::partition(const std::array<int, 3>& ranks) const
{
  return DomainPartition(domain, ranks, periodic);
}

std::mt19937_64 particleStream(std::uint64_t seed, std::uint64_t index)
{
  auto splitmix = [](std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  };
  return std::mt19937_64(splitmix(seed ^ splitmix(index)));
}

double uniform01(std::mt19937_64& rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

RigidBody makeWall(BodyId id, const Vector3& normal, double offset)
{
  RigidBody w;
  w.id = id;
  w.shape = HalfSpace{normal, offset};
  w.massProperties = MassProperties::infinite();
  w.kind = BodyKind::Global;
  return w;
}

namespace
{

StepConfig stepConfigOf(const ScenarioConfig& cfg)
{
  StepConfig s;
  s.dt = cfg.dt;
  s.gravity = cfg.gravity;
  s.frictionCoefficient = cfg.mu;
  s.safetyMargin = cfg.safetyMargin.value_or(0.0);
  s.solver = cfg.solver;
  return s;
}

// Unset margins default to a hundredth of the smallest constituent radius.
void applyDefaultMargin(Scenario& s, const ScenarioConfig& cfg)
{
  if (cfg.safetyMargin)
  {
    return;
  }
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& b : s.bodies)
  {
    if (const auto* sphere = std::get_if<Sphere>(&b.shape))
    {
      smallest = std::min(smallest, sphere->radius);
    }
    else if (const auto* composite = std::get_if<CompositeOfSpheres>(&b.shape))
    {
      for (const auto& e : composite->spheres)
      {
        smallest = std::min(smallest, e.radius);
      }
    }
  }
  s.step.safetyMargin = std::isfinite(smallest) ? 1e-2 * smallest : 0.0;
}

void addBoxWalls(Scenario& s, std::uint64_t firstId, const std::array<bool, 3>& axes)
{
  std::uint64_t id = firstId;
  for (int k = 0; k < 3; ++k)
  {
    if (!axes[k])
    {
      continue;
    }
    const Vector3 e = Vector3::Unit(k);
    s.bodies.push_back(makeWall(BodyId{id++}, e, s.domain.lo(k)));
    s.bodies.push_back(makeWall(BodyId{id++}, -e, -s.domain.hi(k)));
  }
}

const std::vector<Vector3>& compositeTemplate(int count)
{
  static const std::vector<Vector3> two{Vector3::UnitX(), -Vector3::UnitX()};
  static const std::vector<Vector3> three{
      Vector3(1.0, 0.0, 0.0), Vector3(-0.5, std::sqrt(3.0) / 2.0, 0.0),
      Vector3(-0.5, -std::sqrt(3.0) / 2.0, 0.0)};
  static const std::vector<Vector3> four{
      Vector3(1.0, 1.0, 1.0).normalized(), Vector3(1.0, -1.0, -1.0).normalized(),
      Vector3(-1.0, 1.0, -1.0).normalized(), Vector3(-1.0, -1.0, 1.0).normalized()};
  switch (count)
  {
    case 2:
      return two;
    case 3:
      return three;
    default:
      return four;
  }
}

Quaternion randomOrientation(std::mt19937_64& rng)
{
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  const double u3 = uniform01(rng);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const double tau = 2.0 * std::numbers::pi;
  return Quaternion(b * std::cos(tau * u3), a * std::sin(tau * u2), a * std::cos(tau * u2),
                    b * std::sin(tau * u3))
      .normalized();
}

}  // namespace

Scenario generateGranularGas(const ScenarioConfig& cfg)
{
  validate(cfg);
  Scenario s;
  s.step = stepConfigOf(cfg);
  const auto& n = cfg.particles;
  s.domain.lo = Vector3::Zero();
  s.domain.hi = Vector3(n[0] * cfg.pitch, n[1] * cfg.pitch, n[2] * cfg.pitch);
  s.periodic = cfg.walls ? std::array{false, false, false} : std::array{true, true, true};

  std::uint64_t index = 0;
  for (int k = 0; k < n[2]; ++k)
  {
    for (int j = 0; j < n[1]; ++j)
    {
      for (int i = 0; i < n[0]; ++i, ++index)
      {
        auto rng = particleStream(cfg.seed, index);
        const int count = 2 + static_cast<int>(rng() % 3);
        const auto& dirs = compositeTemplate(count);
        CompositeOfSpheres shape;
        Vector3 com = Vector3::Zero();
        double mass = 0.0;
        for (int c = 0; c < count; ++c)
        {
          const double r = cfg.minRadius + (cfg.maxRadius - cfg.minRadius) * uniform01(rng);
          const Vector3 offset = (cfg.boundingRadius - r) * dirs[c];
          shape.spheres.push_back({offset, r});
          const double m = r * r * r;
          com += m * offset;
          mass += m;
        }
        com /= mass;
        double rbar = 0.0;
        for (auto& e : shape.spheres)
        {
          e.offset -= com;
          rbar = std::max(rbar, e.offset.norm() + e.radius);
        }
        if (rbar > cfg.boundingRadius)
        {
          const double scale = cfg.boundingRadius / rbar;
          for (auto& e : shape.spheres)
          {
            e.offset *= scale;
            e.radius *= scale;
          }
        }

        RigidBody b;
        b.id = BodyId{index};
        b.position = Vector3((i + 0.5) * cfg.pitch, (j + 0.5) * cfg.pitch, (k + 0.5) * cfg.pitch);
        b.orientation = randomOrientation(rng);
        for (int d = 0; d < 3; ++d)
        {
          b.linearVelocity(d) = cfg.speedComponent * (2.0 * uniform01(rng) - 1.0);
        }
        b.massProperties = MassProperties::composite(shape, cfg.density);
        b.shape = std::move(shape);
        s.bodies.push_back(std::move(b));
      }
    }
  }
  if (cfg.walls)
  {
    addBoxWalls(s, index, {true, true, true});
  }
  applyDefaultMargin(s, cfg);
  return s;
}

Scenario generateHcp(const ScenarioConfig& cfg)
{
  validate(cfg);
  Scenario s;
  s.step = stepConfigOf(cfg);
  const double r = cfg.sphereRadius;
  const double theta = cfg.inclination * std::numbers::pi / 180.0;
  s.step.gravity =
      Vector3(-cfg.gravityMagnitude * std::sin(theta), 0.0, -cfg.gravityMagnitude * std::cos(theta));
  const auto& n = cfg.particles;
  const double layer = 2.0 * std::sqrt(6.0) / 3.0 * r;
  const double topZ = r + layer * (n[2] - 1);
  s.domain.lo = Vector3::Zero();
  s.domain.hi = Vector3(2.0 * r * n[0], std::sqrt(3.0) * r * n[1], topZ + r);
  s.periodic = {true, true, false};

  const auto props = MassProperties::solidSphere(r, cfg.density);
  std::uint64_t index = 0;
  for (int k = 0; k < n[2]; ++k)
  {
    for (int j = 0; j < n[1]; ++j)
    {
      for (int i = 0; i < n[0]; ++i, ++index)
      {
        RigidBody b;
        b.id = BodyId{index};
        b.position = Vector3((2 * i + (j + k) % 2) * r, std::sqrt(3.0) * (j + (k % 2) / 3.0) * r,
                             k == n[2] - 1 ? topZ : r + layer * k);
        b.linearVelocity = Vector3(-cfg.initialSpeed, 0.0, 0.0);
        b.massProperties = props;
        b.shape = Sphere{r};
        s.bodies.push_back(std::move(b));
      }
    }
  }
  addBoxWalls(s, index, {false, false, true});
  applyDefaultMargin(s, cfg);
  return s;
}

Scenario generatePile(const ScenarioConfig& cfg)
{
  validate(cfg);
  Scenario s;
  s.step = stepConfigOf(cfg);
  const double r = cfg.sphereRadius;
  const double footprint = 4.0 * r;
  s.domain.lo = Vector3(-40.0 * r, -40.0 * r, 0.0);
  s.domain.hi = Vector3(40.0 * r, 40.0 * r, 80.0 * r);
  s.periodic = {false, false, false};

  std::vector<std::pair<Vector3, double>> placed;
  for (int idx = 0; idx < cfg.pileCount; ++idx)
  {
    auto rng = particleStream(cfg.seed, static_cast<std::uint64_t>(idx));
    const double ri = r * (0.8 + 0.4 * uniform01(rng));
    const double x = footprint * (2.0 * uniform01(rng) - 1.0);
    const double y = footprint * (2.0 * uniform01(rng) - 1.0);
    // Ballistic deposition: drop vertically until touching the plane or a sphere.
    double z = ri;
    for (const auto& [c, rj] : placed)
    {
      const double reach = ri + rj;
      const double d2 = (x - c.x()) * (x - c.x()) + (y - c.y()) * (y - c.y());
      if (d2 < reach * reach)
      {
        z = std::max(z, c.z() + std::sqrt(reach * reach - d2));
      }
    }
    placed.emplace_back(Vector3(x, y, z), ri);

    RigidBody b;
    b.id = BodyId{static_cast<std::uint64_t>(idx)};
    b.position = Vector3(x, y, z);
    b.massProperties = MassProperties::solidSphere(ri, cfg.density);
    b.shape = Sphere{ri};
    s.bodies.push_back(std::move(b));
  }
  s.bodies.push_back(makeWall(BodyId{static_cast<std::uint64_t>(cfg.pileCount)},
                              Vector3::UnitZ(), 0.0));
  applyDefaultMargin(s, cfg);
  return s;
}

Scenario generate(const ScenarioConfig& cfg)
{
  switch (cfg.scenario)
  {
    case ScenarioKind::GranularGas:
      return generateGranularGas(cfg);
    case ScenarioKind::HcpIncline:
      return generateHcp(cfg);
    case ScenarioKind::Pile:
      return generatePile(cfg);
  }
  throw ConfigError("unknown scenario");
}

std::size_t hcpContactCount(const std::array<int, 3>& n)
{
  return static_cast<std::size_t>(n[0]) * static_cast<std::size_t>(n[1]) *
         static_cast<std::size_t>(6 * n[2] - 1);
}

}  // namespace nscd
