#include "nscd/harness.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <sys/wait.h>
#include <unistd.h>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace nscd;

namespace
{

std::filesystem::path scratch(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() /
                   ("nscd_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

int runCliProcess(const std::string& args)
{
  const std::string cmd = std::string(NSCD_RUN_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& file)
{
  std::ifstream in(file);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// CSV rows without the trailing seconds column.
std::vector<std::string> csvKeys(const std::filesystem::path& file)
{
  std::ifstream in(file);
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);)
  {
    rows.push_back(line.substr(0, line.rfind(',')));
  }
  return rows;
}

nlohmann::ordered_json withoutTimings(nlohmann::ordered_json j)
{
  j["totals"].erase("total_step_seconds");
  j["totals"].erase("seconds_per_step_per_1000_particles");
  for (auto& s : j["steps"])
  {
    s.erase("wall_seconds");
  }
  return j;
}

// Union volume of a body's constituent spheres by stratified sampling of its
// bounding cube.
double unionVolume(const CompositeOfSpheres& shape, double bound, std::mt19937_64& rng)
{
  constexpr int kSamples = 20000;
  std::uniform_real_distribution<double> u(-bound, bound);
  int inside = 0;
  for (int k = 0; k < kSamples; ++k)
  {
    const Vector3 p(u(rng), u(rng), u(rng));
    for (const auto& e : shape.spheres)
    {
      if ((p - e.offset).squaredNorm() <= e.radius * e.radius)
      {
        ++inside;
        break;
      }
    }
  }
  return 8.0 * bound * bound * bound * inside / kSamples;
}

}  // namespace

TEST_CASE("gas generation: counts, globals and determinism")
{
  ScenarioConfig cfg = defaultConfig(ScenarioKind::GranularGas);
  cfg.particles = {2, 2, 2};
  const Scenario a = generate(cfg), b = generate(cfg);
  REQUIRE(a.bodies.size() == 14);
  int composites = 0, walls = 0;
  for (const auto& body : a.bodies)
  {
    if (std::holds_alternative<CompositeOfSpheres>(body.shape))
    {
      ++composites;
      const auto& s = std::get<CompositeOfSpheres>(body.shape);
      CHECK(s.spheres.size() >= 2);
      CHECK(s.spheres.size() <= 4);
      CHECK(boundingRadius(body.shape) <= 0.005 * (1 + 1e-12));
      CHECK(body.linearVelocity.norm() <= 2 * std::sqrt(3.0) / 10);
      CHECK(body.linearVelocity.cwiseAbs().maxCoeff() <= 0.2);
    }
    if (std::holds_alternative<HalfSpace>(body.shape))
    {
      ++walls;
      CHECK(body.massProperties.isInfinite());
    }
  }
  CHECK(composites == 8);
  CHECK(walls == 6);
  for (std::size_t i = 0; i < a.bodies.size(); ++i)
  {
    CHECK(a.bodies[i].position == b.bodies[i].position);
    CHECK(a.bodies[i].orientation.coeffs() == b.bodies[i].orientation.coeffs());
    CHECK(a.bodies[i].linearVelocity == b.bodies[i].linearVelocity);
    CHECK(a.bodies[i].shape.index() == b.bodies[i].shape.index());
  }
  Simulation sim(a.partition({2, 2, 2}), a.bodies, a.step);
  CHECK(sim.localBodyCount() == 8);
  CHECK(sim.ranks()[3].registry().globals().size() == 6);
}

TEST_CASE("gas particle streams do not depend on the lattice size")
{
  ScenarioConfig small = defaultConfig(ScenarioKind::GranularGas);
  small.particles = {2, 1, 1};
  ScenarioConfig large = small;
  large.particles = {2, 3, 2};
  const Scenario a = generate(small), b = generate(large);
  for (std::size_t i = 0; i < 2; ++i)
  {
    CHECK(a.bodies[i].linearVelocity == b.bodies[i].linearVelocity);
    CHECK(a.bodies[i].orientation.coeffs() == b.bodies[i].orientation.coeffs());
  }
  ScenarioConfig other = small;
  other.seed = small.seed + 1;
  CHECK(generate(other).bodies[0].linearVelocity != a.bodies[0].linearVelocity);
}

TEST_CASE("gas solid volume fraction is about 23 percent")
{
  ScenarioConfig cfg = defaultConfig(ScenarioKind::GranularGas);
  cfg.particles = {8, 8, 8};
  const Scenario s = generate(cfg);
  std::mt19937_64 rng(41);
  double solid = 0.0;
  for (const auto& b : s.bodies)
  {
    if (const auto* shape = std::get_if<CompositeOfSpheres>(&b.shape))
    {
      solid += unionVolume(*shape, cfg.boundingRadius, rng);
    }
  }
  const Vector3 ext = s.domain.hi - s.domain.lo;
  const double fraction = solid / (ext.x() * ext.y() * ext.z());
  MESSAGE("solid volume fraction " << fraction);
  CHECK(fraction == doctest::Approx(0.23).epsilon(0.03 / 0.23));
}

TEST_CASE("rank grid must divide the particle grid")
{
  ScenarioConfig cfg = defaultConfig(ScenarioKind::GranularGas);
  cfg.particles = {4, 4, 4};
  cfg.ranks = {3, 1, 1};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.ranks = {2, 4, 1};
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("HCP (2,2,1) has 20 contacts by brute force")
{
  ScenarioConfig cfg = defaultConfig(ScenarioKind::HcpIncline);
  cfg.particles = {2, 2, 1};
  const Scenario s = generate(cfg);
  const double r = cfg.sphereRadius;
  const Vector3 ext = s.domain.hi - s.domain.lo;
  std::vector<Vector3> centers;
  for (const auto& b : s.bodies)
  {
    if (std::holds_alternative<Sphere>(b.shape))
    {
      centers.push_back(b.position);
    }
  }
  REQUIRE(centers.size() == 4);
  const double touch = 2 * r * (1 + 1e-9);
  std::size_t count = 0;
  for (std::size_t i = 0; i < centers.size(); ++i)
  {
    count += centers[i].z() - r <= s.domain.lo.z() + 1e-12 ? 1 : 0;
    count += centers[i].z() + r >= s.domain.hi.z() - 1e-12 ? 1 : 0;
    for (std::size_t j = i + 1; j < centers.size(); ++j)
    {
      for (int sx = -1; sx <= 1; ++sx)
      {
        for (int sy = -1; sy <= 1; ++sy)
        {
          const Vector3 image = centers[j] + Vector3(sx * ext.x(), sy * ext.y(), 0.0);
          count += (centers[i] - image).norm() <= touch ? 1 : 0;
        }
      }
    }
  }
  CHECK(count == 20);
  CHECK(hcpContactCount({2, 2, 1}) == 20);
  CHECK(hcpContactCount({8, 8, 4}) == 1472);
}

TEST_CASE("HCP detected contacts match the closed form on random even grids")
{
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 12; ++trial)
  {
    ScenarioConfig cfg = defaultConfig(ScenarioKind::HcpIncline);
    cfg.particles = {2 + static_cast<int>(rng() % 5), 2 * (1 + static_cast<int>(rng() % 3)),
                     1 + static_cast<int>(rng() % 4)};
    for (int k = 0; k < 2; ++k)
    {
      const bool split = rng() % 2 == 0 && cfg.particles[k] % 2 == 0 && cfg.particles[k] >= 4;
      cfg.ranks[k] = split ? 2 : 1;
    }
    cfg.solver.iterations = 1;
    CAPTURE(cfg.particles[0]);
    CAPTURE(cfg.particles[1]);
    CAPTURE(cfg.particles[2]);
    const Scenario s = generate(cfg);
    Simulation sim(s.partition(cfg.ranks), s.bodies, s.step);
    CHECK(referenceContacts(sim).size() == hcpContactCount(cfg.particles));
    SequentialTransport t(sim.partition().size());
    CHECK(sim.step(t).contacts == hcpContactCount(cfg.particles));
  }
}

TEST_CASE("HCP lattice geometry")
{
  ScenarioConfig cfg = defaultConfig(ScenarioKind::HcpIncline);
  cfg.particles = {4, 4, 2};
  const Scenario s = generate(cfg);
  const double r = cfg.sphereRadius;
  const Vector3 ext = s.domain.hi - s.domain.lo;
  const double layer = s.bodies[16].position.z() - s.bodies[0].position.z();
  const double fraction = 16 * (4.0 / 3.0) * std::numbers::pi * r * r * r / (ext.x() * ext.y() * layer);
  CHECK(fraction == doctest::Approx(std::numbers::pi / (3 * std::sqrt(2.0))).epsilon(1e-12));
  CHECK(s.periodic == std::array{true, true, false});
  const double g = 9.81, theta = std::numbers::pi / 6;
  CHECK((s.step.gravity - Vector3(-g * std::sin(theta), 0, -g * std::cos(theta))).norm() < 1e-14);
  CHECK(s.bodies[0].linearVelocity == Vector3(-0.1, 0, 0));
  CHECK(s.step.solver.iterations == 100);
  CHECK(s.step.frictionCoefficient == 0.85);
  CHECK(s.step.dt == 1e-5);

  cfg.particles = {4, 3, 2};
  CHECK_THROWS_AS(generate(cfg), ConfigError);
}

TEST_CASE("kinetic energy and momentum")
{
  CHECK(kineticEnergy({}) == 0.0);
  RigidBody b;
  b.shape = Sphere{0.1};
  b.massProperties = MassProperties::finite(2.0, Matrix3::Identity());
  b.linearVelocity = Vector3(3, 0, 0);
  std::vector<RigidBody> one{b};
  CHECK(kineticEnergy(one) == 9.0);
  CHECK(totalMomentum(one).linear == Vector3(6, 0, 0));

  one[0].linearVelocity.setZero();
  CHECK(kineticEnergy(one) == 0.0);
  CHECK(totalMomentum(one).linear == Vector3::Zero());
  CHECK(totalMomentum(one).angular == Vector3::Zero());

  one[0].position = Vector3(0, 1, 0);
  one[0].linearVelocity = Vector3(1, 0, 0);
  one[0].angularVelocity = Vector3(0, 0, 4);
  CHECK(kineticEnergy(one) == doctest::Approx(1.0 + 8.0));
  CHECK(totalMomentum(one).angular == Vector3(0, 0, -2 + 4));

  RigidBody wall;
  wall.shape = HalfSpace{};
  wall.linearVelocity = Vector3(1, 1, 1);
  one.push_back(wall);
  CHECK(kineticEnergy(one) == doctest::Approx(9.0));
}

namespace
{

// One contact-free step of a spread-out gas with random spins; returns the
// momenta before and after.
std::pair<Momentum, Momentum> freeFlightStep(double dt, bool spheres)
{
  ScenarioConfig cfg = defaultConfig(ScenarioKind::GranularGas);
  cfg.particles = {3, 3, 3};
  cfg.pitch = 0.05;
  const Scenario s = generate(cfg);
  std::vector<RigidBody> bodies = s.bodies;
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (auto& b : bodies)
  {
    if (b.massProperties.isInfinite())
    {
      continue;
    }
    b.angularVelocity = Vector3(u(rng), u(rng), u(rng));
    if (spheres)
    {
      b.shape = Sphere{0.004};
      b.massProperties = MassProperties::solidSphere(0.004, cfg.density);
    }
  }
  StepConfig step = s.step;
  step.dt = dt;
  Simulation sim(s.partition({1, 1, 1}), bodies, step);
  const Momentum before = totalMomentum(sim.bodies());
  SequentialTransport t(1);
  REQUIRE(sim.step(t).contacts == 0);
  return {before, totalMomentum(sim.bodies())};
}

}  // namespace

TEST_CASE("free flight conserves momentum")
{
  SUBCASE("isotropic bodies: linear and angular exactly")
  {
    const auto [p0, p1] = freeFlightStep(1e-4, true);
    CHECK((p1.linear - p0.linear).norm() <= 1e-12 * p0.linear.norm());
    CHECK((p1.angular - p0.angular).norm() <= 1e-12 * p0.angular.norm());
  }
  SUBCASE("composites: linear exactly, spin drift second order in dt")
  {
    // The explicit gyroscopic update with rotating inertia is first-order
    // accurate, so the one-step angular momentum error is O(dt^2).
    const auto [a0, a1] = freeFlightStep(1e-4, false);
    const auto [b0, b1] = freeFlightStep(5e-5, false);
    CHECK((a1.linear - a0.linear).norm() <= 1e-12 * a0.linear.norm());
    const double coarse = (a1.angular - a0.angular).norm();
    const double fine = (b1.angular - b0.angular).norm();
    MESSAGE("one-step angular drift " << coarse << " at dt 1e-4, " << fine << " at dt 5e-5");
    CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.1));
  }
}

TEST_CASE("parallel efficiency")
{
  CHECK(parallelEfficiency(4.0, 4.0, 16, ScalingMode::Weak) == 1.0);
  CHECK(parallelEfficiency(10.0, 12.5, 4, ScalingMode::Weak) == 0.8);
  CHECK(parallelEfficiency(10.0, 1.25, 8, ScalingMode::Strong) == 1.0);
  CHECK_THROWS(parallelEfficiency(0.0, 1.0, 1, ScalingMode::Weak));
  CHECK_THROWS(parallelEfficiency(1.0, -1.0, 1, ScalingMode::Strong));
  CHECK_THROWS(parallelEfficiency(1.0, 1.0, 0, ScalingMode::Strong));
}

TEST_CASE("phase times fit inside the step wall time")
{
  ScenarioConfig cfg = defaultConfig(ScenarioKind::GranularGas);
  cfg.particles = {4, 4, 2};
  cfg.ranks = {2, 2, 1};
  cfg.steps = 5;
  for (const auto kind : {TransportKind::Sequential, TransportKind::Concurrent})
  {
    cfg.transport = kind;
    const RunResult run = runScenario(cfg);
    REQUIRE(run.steps.size() == 5);
    for (const auto& s : run.steps)
    {
      REQUIRE(s.phaseSeconds.size() == 4);
      for (const auto& ranks : s.phaseSeconds)
      {
        double sum = 0.0;
        for (double p : ranks)
        {
          CHECK(p >= 0.0);
          sum += p;
        }
        CHECK(sum <= s.wallSeconds + 1e-6);
      }
    }
  }
}

TEST_CASE("weak scaling grows the rank grid x first")
{
  ScenarioConfig perRank = defaultConfig(ScenarioKind::GranularGas);
  perRank.particles = {2, 2, 2};
  perRank.steps = 1;
  const auto points = weakScaling(perRank, {1, 2, 4, 8});
  REQUIRE(points.size() == 4);
  CHECK(points[1].rankGrid == std::array{2, 1, 1});
  CHECK(points[2].rankGrid == std::array{2, 2, 1});
  CHECK(points[3].rankGrid == std::array{2, 2, 2});
  CHECK(points[3].particles == 64);
  CHECK(points[0].efficiency == 1.0);
  CHECK_THROWS_AS(weakScaling(perRank, {3}), ConfigError);
}

TEST_CASE("CLI writes identical reports apart from timings")
{
  const auto a = scratch("cli_a"), b = scratch("cli_b");
  const std::string args = "--scenario gas --nx 4 --ny 4 --nz 2 --px 2 --py 2 --steps 6";
  REQUIRE(runCliProcess(args + " --out " + a.string()) == 0);
  REQUIRE(runCliProcess(args + " --out " + b.string()) == 0);
  const auto rowsA = csvKeys(a / "report.csv");
  CHECK(rowsA.front() == "step,rank,phase");
  CHECK(rowsA.size() == 1 + 6 * 4 * kPhaseCount);
  CHECK(rowsA == csvKeys(b / "report.csv"));

  const auto ja = nlohmann::ordered_json::parse(slurp(a / "summary.json"));
  const auto jb = nlohmann::ordered_json::parse(slurp(b / "summary.json"));
  std::vector<std::string> keys;
  for (const auto& [k, v] : ja.items())
  {
    keys.push_back(k);
  }
  CHECK(keys == std::vector<std::string>{"config", "totals", "steps", "efficiencies"});
  CHECK(withoutTimings(ja) == withoutTimings(jb));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("CLI HCP example and zero-step run")
{
  const auto out = scratch("cli_hcp");
  REQUIRE(runCliProcess("--scenario hcp --nx 8 --ny 8 --nz 4 --px 2 --py 2 --steps 1 --out " +
                        out.string()) == 0);
  const auto j = nlohmann::ordered_json::parse(slurp(out / "summary.json"));
  CHECK(j["totals"]["initial_contacts"] == 1472);
  CHECK(j["steps"][0]["contacts"] == 1472);

  const auto zero = scratch("cli_zero");
  REQUIRE(runCliProcess("--scenario gas --steps 0 --out " + zero.string()) == 0);
  const auto z = nlohmann::ordered_json::parse(slurp(zero / "summary.json"));
  CHECK(z["steps"].empty());
  CHECK(z["totals"]["initial_kinetic_energy"].get<double>() > 0.0);
  CHECK_FALSE(z["totals"].contains("final_kinetic_energy"));
  CHECK(csvKeys(zero / "report.csv").size() == 1);
  std::filesystem::remove_all(out);
  std::filesystem::remove_all(zero);
}

TEST_CASE("CLI exit codes")
{
  const auto out = scratch("cli_err");
  CHECK(runCliProcess("--scenario hcp --ny 3 --out " + out.string()) == 2);
  CHECK(runCliProcess("--scenario gas --nx 4 --px 3 --out " + out.string()) == 2);
  CHECK(runCliProcess("--bogus") == 2);
  CHECK(runCliProcess("--scenario gas --dt -1 --out " + out.string()) == 2);

  std::filesystem::create_directories(out);
  {
    std::ofstream cfg(out / "run.cfg");
    cfg << "scenario = hcp\nnx = 2\nny = 2\nnz = 1\nsteps = 1\nout = " << (out / "from_file").string()
        << "\n";
  }
  CHECK(runCliProcess("--config " + (out / "run.cfg").string()) == 0);
  const auto j = nlohmann::ordered_json::parse(slurp(out / "from_file" / "summary.json"));
  CHECK(j["config"]["scenario"] == "hcp");
  CHECK(j["totals"]["initial_contacts"] == 20);
  std::filesystem::remove_all(out);
}
