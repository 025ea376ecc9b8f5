#pragma once

#include "nscd/metrics.hpp"
#include "nscd/scenario.hpp"
#include "nscd/simulation.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace nscd
{

struct StepSummary
{
  int step = 0;  // 1-based
  double wallSeconds = 0.0;
  std::vector<std::array<double, kPhaseCount>> phaseSeconds;  // per rank
  std::size_t contacts = 0;
  ContactResidual maxResidual;
  std::size_t unconvergedSolves = 0;
  std::uint64_t messages = 0;
  double kineticEnergy = 0.0;
  Momentum momentum;
};

struct RunResult
{
  ScenarioConfig config;
  std::size_t particles = 0;
  std::size_t initialContacts = 0;
  double initialKineticEnergy = 0.0;
  Momentum initialMomentum;
  std::vector<StepSummary> steps;
  std::vector<RigidBody> finalBodies;

  double totalStepSeconds() const;
  /// Average wall-clock time per step per 1000 particles (s); 0 without steps.
  double secondsPerStepPer1000() const;
};

/// Generates the scenario, distributes it and advances cfg.steps steps.
RunResult runScenario(const ScenarioConfig& cfg,
                      const std::function<void(const StepSummary&)>& onStep = {});

/// CSV with columns step,rank,phase,seconds; one row per step, rank and phase.
void writeTimingCsv(const std::filesystem::path& file, const RunResult& run);

struct ScalingPoint
{
  int ranks = 1;
  std::array<int, 3> rankGrid{1, 1, 1};
  std::size_t particles = 0;
  double secondsPerStep = 0.0;
  double efficiency = 1.0;
};

/// Weak scaling: the per-rank particle grid stays fixed while ranks grow.
/// Rank grids double along x, then y, then z.
std::vector<ScalingPoint> weakScaling(const ScenarioConfig& perRank, const std::vector<int>& ranks);

/// JSON summary: config echo, totals, per-step observables, efficiencies.
void writeSummaryJson(const std::filesystem::path& file, const RunResult& run,
                      const std::vector<ScalingPoint>& scaling = {});

/// Command-line entry point. Exit codes: 0 ok, 2 config error, 3 protocol violation.
int runCli(int argc, char** argv);

}  // namespace nscd
