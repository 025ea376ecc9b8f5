#pragma once

#include "nscd/rank.hpp"
#include "nscd/simulation.hpp"
#include "nscd/transport.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace nscd
{

enum class ScenarioKind : std::uint8_t
{
  GranularGas,
  HcpIncline,
  Pile,
};

std::string_view scenarioName(ScenarioKind kind) noexcept;
ScenarioKind parseScenarioKind(std::string_view text);

struct ScenarioConfig
{
  ScenarioKind scenario = ScenarioKind::GranularGas;
  std::array<int, 3> particles{2, 2, 2};
  std::array<int, 3> ranks{1, 1, 1};
  double dt = 1e-4;
  int steps = 10;
  SolverConfig solver;
  double mu = 0.1;
  Vector3 gravity = Vector3::Zero();
  std::uint64_t seed = 42;
  TransportKind transport = TransportKind::Sequential;
  std::filesystem::path output = "out";
  std::optional<double> safetyMargin;  // unset: 1e-2 x smallest particle radius

  // Granular gas.
  double pitch = 0.011;           // lattice spacing (m)
  double boundingRadius = 0.005;  // composite bounding-sphere radius (m)
  double minRadius = 0.003;       // constituent radii (m)
  double maxRadius = 0.004;
  double speedComponent = 0.2;    // per-component velocity bound (m/s)
  double density = 2650.0;        // kg/m^3
  bool walls = true;              // false: periodic along every axis

  // HCP incline.
  double sphereRadius = 1e-3;
  double inclination = 30.0;      // degrees
  double initialSpeed = 0.1;      // downhill (m/s)
  double gravityMagnitude = 9.81;

  // Pile.
  int pileCount = 50;
};

/// Reference defaults for the given scenario.
ScenarioConfig defaultConfig(ScenarioKind kind);

/// Throws ConfigError on an invalid combination.
void validate(const ScenarioConfig& cfg);

struct Scenario
{
  Box domain;
  std::array<bool, 3> periodic{false, false, false};
  std::vector<RigidBody> bodies;  // locals first, then globals
  StepConfig step;

  DomainPartition partition(const std::array<int, 3>& ranks) const;
};

/// Per-particle generator: splitmix64 of (seed, index) seeds an mt19937_64, so
/// a particle's draws do not depend on how many particles precede it.
std::mt19937_64 particleStream(std::uint64_t seed, std::uint64_t index);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

Scenario generateGranularGas(const ScenarioConfig& cfg);
Scenario generateHcp(const ScenarioConfig& cfg);
Scenario generatePile(const ScenarioConfig& cfg);
Scenario generate(const ScenarioConfig& cfg);

/// Closed-form HCP contact count n_x n_y (6 n_z - 1).
std::size_t hcpContactCount(const std::array<int, 3>& n);

/// Half-space body whose solid side is {normal . x <= offset}.
RigidBody makeWall(BodyId id, const Vector3& normal, double offset);

}  // namespace nscd
