#include "nscd/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace nscd
{

namespace
{

struct CliOptions
{
  std::string scenario = "gas";
  std::optional<int> nx, ny, nz;
  int px = 1, py = 1, pz = 1;
  std::optional<int> steps;
  std::optional<double> dt, omega, mu, safetyMargin;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::string transport = "sequential";
  std::string sweep = "gauss-seidel";
  std::string out = "out";
  bool noWalls = false;
  bool warmStart = false;
  bool weakScaling = false;
  std::vector<int> scalingRanks{1, 2, 4, 8};
};

ScenarioConfig toConfig(const CliOptions& o)
{
  ScenarioConfig cfg = defaultConfig(parseScenarioKind(o.scenario));
  if (o.nx)
  {
    cfg.particles[0] = *o.nx;
  }
  if (o.ny)
  {
    cfg.particles[1] = *o.ny;
  }
  if (o.nz)
  {
    cfg.particles[2] = *o.nz;
  }
  cfg.ranks = {o.px, o.py, o.pz};
  if (o.steps)
  {
    cfg.steps = *o.steps;
  }
  if (o.dt)
  {
    cfg.dt = *o.dt;
  }
  if (o.omega)
  {
    cfg.solver.relaxation = *o.omega;
  }
  if (o.mu)
  {
    cfg.mu = *o.mu;
  }
  if (o.safetyMargin)
  {
    cfg.safetyMargin = *o.safetyMargin;
  }
  if (o.iterations)
  {
    cfg.solver.iterations = *o.iterations;
  }
  if (o.seed)
  {
    cfg.seed = *o.seed;
  }
  cfg.transport = o.transport == "concurrent" ? TransportKind::Concurrent : TransportKind::Sequential;
  cfg.solver.mode =
      o.sweep == "jacobi" ? SweepMode::PerContactJacobi : SweepMode::SubdomainGaussSeidel;
  cfg.solver.warmStart = cfg.solver.warmStart || o.warmStart;
  cfg.walls = !o.noWalls;
  cfg.output = o.out;
  validate(cfg);
  return cfg;
}

}  // namespace

int runCli(int argc, char** argv)
{
  CLI::App app{"Parallel non-smooth granular dynamics driver"};
  CliOptions o;
  app.set_config("--config", "", "Key-value configuration file (key = value per line)");
  app.add_option("--scenario", o.scenario, "gas, hcp or pile")
      ->check(CLI::IsMember({"gas", "hcp", "pile"}));
  app.add_option("--nx", o.nx, "Particles along x");
  app.add_option("--ny", o.ny, "Particles along y");
  app.add_option("--nz", o.nz, "Particles along z");
  app.add_option("--px", o.px, "Ranks along x")->check(CLI::PositiveNumber);
  app.add_option("--py", o.py, "Ranks along y")->check(CLI::PositiveNumber);
  app.add_option("--pz", o.pz, "Ranks along z")->check(CLI::PositiveNumber);
  app.add_option("--steps", o.steps, "Time steps");
  app.add_option("--dt", o.dt, "Time step length (s)");
  app.add_option("--iterations", o.iterations, "Solver sweeps per step");
  app.add_option("--omega", o.omega, "Relaxation parameter");
  app.add_option("--mu", o.mu, "Coulomb friction coefficient");
  app.add_option("--safety-margin", o.safetyMargin,
                 "Hull safety margin (m); default 1e-2 of the smallest particle radius")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--transport", o.transport, "sequential or concurrent")
      ->check(CLI::IsMember({"sequential", "concurrent"}));
  app.add_option("--sweep", o.sweep, "gauss-seidel (per rank) or jacobi (per contact)")
      ->check(CLI::IsMember({"gauss-seidel", "jacobi"}));
  app.add_option("--out", o.out, "Output directory for report.csv and summary.json");
  app.add_flag("--no-walls", o.noWalls, "Gas without walls, periodic along every axis");
  app.add_flag("--warm-start", o.warmStart, "Start each solve from the previous reactions");
  app.add_flag("--weak-scaling", o.weakScaling,
               "Also run a weak-scaling series; the particle grid is taken per rank");
  app.add_option("--scaling-ranks", o.scalingRanks, "Rank counts of the weak-scaling series");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::CallForHelp& e)
  {
    return app.exit(e);
  }
  catch (const CLI::ParseError& e)
  {
    app.exit(e);
    return 2;
  }

  try
  {
    const ScenarioConfig cfg = toConfig(o);
    const RunResult run = runScenario(cfg);
    std::vector<ScalingPoint> scaling;
    if (o.weakScaling)
    {
      ScenarioConfig perRank = cfg;
      perRank.ranks = {1, 1, 1};
      perRank.transport = TransportKind::Concurrent;
      scaling = weakScaling(perRank, o.scalingRanks);
    }
    writeTimingCsv(cfg.output / "report.csv", run);
    writeSummaryJson(cfg.output / "summary.json", run, scaling);

    std::cout << "particles: " << run.particles << "\n"
              << "initial contacts: " << run.initialContacts << "\n"
              << "steps: " << run.steps.size() << "\n"
              << "initial kinetic energy (J): " << run.initialKineticEnergy << "\n";
    if (!run.steps.empty())
    {
      std::cout << "final kinetic energy (J): " << run.steps.back().kineticEnergy << "\n"
                << "average time per step per 1000 particles (s): "
                << run.secondsPerStepPer1000() << "\n";
    }
    for (const auto& p : scaling)
    {
      std::cout << "weak scaling p=" << p.ranks << " t=" << p.secondsPerStep
                << " s/step e=" << p.efficiency << "\n";
    }
    return 0;
  }
  catch (const ConfigError& e)
  {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }
  catch (const ProtocolViolation& e)
  {
    std::cerr << "protocol violation: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace nscd
