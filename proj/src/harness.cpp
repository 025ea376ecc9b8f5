#include "nscd/harness.hpp"

#include <bit>
#include <numeric>

namespace nscd
{

double RunResult::totalStepSeconds() const
{
  return std::accumulate(steps.begin(), steps.end(), 0.0,
                         [](double acc, const StepSummary& s) { return acc + s.wallSeconds; });
}

double RunResult::secondsPerStepPer1000() const
{
  if (steps.empty() || particles == 0)
  {
    return 0.0;
  }
  return totalStepSeconds() / static_cast<double>(steps.size()) /
         (static_cast<double>(particles) / 1000.0);
}

RunResult runScenario(const ScenarioConfig& cfg,
                      const std::function<void(const StepSummary&)>& onStep)
{
  validate(cfg);
  const Scenario scenario = generate(cfg);
  Simulation sim(scenario.partition(cfg.ranks), scenario.bodies, scenario.step);
  const auto transport = makeTransport(cfg.transport, sim.partition().size());

  RunResult run;
  run.config = cfg;
  run.config.safetyMargin = scenario.step.safetyMargin;
  run.config.gravity = scenario.step.gravity;
  run.particles = sim.localBodyCount();
  run.initialContacts = referenceContacts(sim).size();
  {
    const auto bodies = sim.bodies();
    run.initialKineticEnergy = kineticEnergy(bodies);
    run.initialMomentum = totalMomentum(bodies);
  }
  run.steps.reserve(cfg.steps);
  for (int k = 1; k <= cfg.steps; ++k)
  {
    const StepReport rep = sim.step(*transport);
    StepSummary s;
    s.step = k;
    s.wallSeconds = rep.wallSeconds;
    for (const auto& r : rep.ranks)
    {
      s.phaseSeconds.push_back(r.seconds);
    }
    s.contacts = rep.contacts;
    s.maxResidual = rep.maxResidual;
    s.unconvergedSolves = rep.unconvergedSolves;
    s.messages = rep.messages;
    const auto bodies = sim.bodies();
    s.kineticEnergy = kineticEnergy(bodies);
    s.momentum = totalMomentum(bodies);
    if (onStep)
    {
      onStep(s);
    }
    run.steps.push_back(std::move(s));
  }
  run.finalBodies = sim.bodies();
  return run;
}

std::vector<ScalingPoint> weakScaling(const ScenarioConfig& perRank, const std::vector<int>& ranks)
{
  std::vector<ScalingPoint> out;
  for (int p : ranks)
  {
    if (p < 1 || !std::has_single_bit(static_cast<unsigned>(p)))
    {
      throw ConfigError("weak scaling rank counts must be powers of two");
    }
    ScalingPoint pt;
    pt.ranks = p;
    for (int doublings = std::countr_zero(static_cast<unsigned>(p)), axis = 0; doublings > 0;
         --doublings, axis = (axis + 1) % 3)
    {
      pt.rankGrid[axis] *= 2;
    }
    ScenarioConfig cfg = perRank;
    for (int k = 0; k < 3; ++k)
    {
      cfg.particles[k] = perRank.particles[k] * pt.rankGrid[k];
    }
    cfg.ranks = pt.rankGrid;
    const RunResult run = runScenario(cfg);
    pt.particles = run.particles;
    pt.secondsPerStep = run.steps.empty() ? 0.0 : run.totalStepSeconds() / run.steps.size();
    out.push_back(pt);
  }
  if (!out.empty() && out.front().ranks == 1 && out.front().secondsPerStep > 0.0)
  {
    for (auto& pt : out)
    {
      pt.efficiency = parallelEfficiency(out.front().secondsPerStep, pt.secondsPerStep, pt.ranks,
                                         ScalingMode::Weak);
    }
  }
  return out;
}

}  // namespace nscd
