#include "nscd/harness.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <limits>

namespace nscd
{

namespace
{

std::ofstream openForWrite(const std::filesystem::path& file)
{
  if (file.has_parent_path())
  {
    std::filesystem::create_directories(file.parent_path());
  }
  std::ofstream out(file);
  if (!out)
  {
    throw std::runtime_error("cannot write " + file.string());
  }
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

nlohmann::ordered_json vec(const Vector3& v)
{
  return nlohmann::ordered_json::array({v.x(), v.y(), v.z()});
}

nlohmann::ordered_json residualJson(const ContactResidual& r)
{
  nlohmann::ordered_json j;
  j["negative_normal"] = r.negativeNormal;
  j["penetration"] = r.penetration;
  j["complementarity"] = r.complementarity;
  j["cone_violation"] = r.coneViolation;
  j["sliding_misalignment"] = r.slidingMisalignment;
  j["friction_deficit"] = r.frictionDeficit;
  return j;
}

}  // namespace

void writeTimingCsv(const std::filesystem::path& file, const RunResult& run)
{
  auto out = openForWrite(file);
  out << "step,rank,phase,seconds\n";
  for (const auto& s : run.steps)
  {
    for (std::size_t r = 0; r < s.phaseSeconds.size(); ++r)
    {
      for (std::size_t p = 0; p < kPhaseCount; ++p)
      {
        out << s.step << ',' << r << ',' << phaseName(static_cast<Phase>(p)) << ','
            << s.phaseSeconds[r][p] << '\n';
      }
    }
  }
}

void writeSummaryJson(const std::filesystem::path& file, const RunResult& run,
                      const std::vector<ScalingPoint>& scaling)
{
  const ScenarioConfig& c = run.config;
  nlohmann::ordered_json j;

  auto& cfg = j["config"];
  cfg["scenario"] = std::string(scenarioName(c.scenario));
  cfg["particles"] = c.particles;
  cfg["ranks"] = c.ranks;
  cfg["dt"] = c.dt;
  cfg["steps"] = c.steps;
  cfg["iterations"] = c.solver.iterations;
  cfg["omega"] = c.solver.relaxation;
  cfg["error_reduction"] = c.solver.errorReduction;
  cfg["warm_start"] = c.solver.warmStart;
  cfg["sweep"] = c.solver.mode == SweepMode::PerContactJacobi ? "jacobi" : "gauss-seidel";
  cfg["mu"] = c.mu;
  cfg["safety_margin"] = c.safetyMargin.value_or(0.0);
  cfg["gravity"] = vec(c.gravity);
  cfg["seed"] = c.seed;
  cfg["transport"] = c.transport == TransportKind::Sequential ? "sequential" : "concurrent";
  cfg["walls"] = c.walls;

  auto& totals = j["totals"];
  totals["particles"] = run.particles;
  totals["initial_contacts"] = run.initialContacts;
  totals["initial_kinetic_energy"] = run.initialKineticEnergy;
  totals["initial_linear_momentum"] = vec(run.initialMomentum.linear);
  totals["initial_angular_momentum"] = vec(run.initialMomentum.angular);
  if (!run.steps.empty())
  {
    const auto& last = run.steps.back();
    totals["final_kinetic_energy"] = last.kineticEnergy;
    totals["final_linear_momentum"] = vec(last.momentum.linear);
    totals["final_angular_momentum"] = vec(last.momentum.angular);
  }
  ContactResidual worst;
  for (const auto& s : run.steps)
  {
    worst.negativeNormal = std::max(worst.negativeNormal, s.maxResidual.negativeNormal);
    worst.penetration = std::max(worst.penetration, s.maxResidual.penetration);
    worst.complementarity = std::max(worst.complementarity, s.maxResidual.complementarity);
    worst.coneViolation = std::max(worst.coneViolation, s.maxResidual.coneViolation);
    worst.slidingMisalignment =
        std::max(worst.slidingMisalignment, s.maxResidual.slidingMisalignment);
    worst.frictionDeficit = std::max(worst.frictionDeficit, s.maxResidual.frictionDeficit);
  }
  totals["max_residual"] = residualJson(worst);
  totals["total_step_seconds"] = run.totalStepSeconds();
  totals["seconds_per_step_per_1000_particles"] = run.secondsPerStepPer1000();

  auto& history = j["steps"];
  history = nlohmann::ordered_json::array();
  for (const auto& s : run.steps)
  {
    nlohmann::ordered_json h;
    h["step"] = s.step;
    h["contacts"] = s.contacts;
    h["kinetic_energy"] = s.kineticEnergy;
    h["linear_momentum"] = vec(s.momentum.linear);
    h["angular_momentum"] = vec(s.momentum.angular);
    h["unconverged_solves"] = s.unconvergedSolves;
    h["messages"] = s.messages;
    h["wall_seconds"] = s.wallSeconds;
    history.push_back(std::move(h));
  }

  auto& eff = j["efficiencies"];
  eff = nlohmann::ordered_json::array();
  for (const auto& p : scaling)
  {
    nlohmann::ordered_json e;
    e["mode"] = "weak";
    e["ranks"] = p.ranks;
    e["rank_grid"] = p.rankGrid;
    e["particles"] = p.particles;
    e["seconds_per_step"] = p.secondsPerStep;
    e["efficiency"] = p.efficiency;
    eff.push_back(std::move(e));
  }

  auto out = openForWrite(file);
  out << j.dump(2) << '\n';
}

}  // namespace nscd
