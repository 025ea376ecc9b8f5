#pragma once

#include "nscd/partition.hpp"
#include "nscd/registry.hpp"
#include "nscd/solver.hpp"
#include "nscd/transport.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string_view>
#include <vector>

namespace nscd
{

struct StepConfig
{
  double dt = 1e-4;
  Vector3 gravity = Vector3::Zero();
  double frictionCoefficient = 0.1;
  /// Hull safety margin tau (m).
  double safetyMargin = 0.0;
  SolverConfig solver;
  /// Records owned contact ids, integrated bodies and message targets.
  bool recordDiagnostics = false;
  /// Called on every rank after each sweep's reduction (iteration 0 is the
  /// initial reduction).
  std::function<void(RankId, int iteration, const SolverState&)> onIteration;
};

enum class Phase : std::uint8_t
{
  Detection,
  AccumulatorInit,
  Sweeps,
  ReductionFirst,
  ReductionSecond,
  Integration,
  Synchronization,
};

inline constexpr std::size_t kPhaseCount = 7;

std::string_view phaseName(Phase phase) noexcept;

struct RankStepReport
{
  RankId rank = 0;
  std::array<double, kPhaseCount> seconds{};
  double totalSeconds = 0.0;
  std::size_t contacts = 0;
  ContactResidual maxResidual;
  std::size_t unconvergedSolves = 0;
  std::uint64_t messagesSent = 0;
  // Diagnostics, filled only when requested.
  std::vector<ContactId> ownedContacts;
  std::vector<BodyId> integratedBodies;
  std::vector<RankId> messageTargets;
};

/// Owner of a contact between the given instantiations, derived identically
/// on every witnessing rank. A null record denotes a global body. `relative`
/// is the image shift of the second body relative to the first.
RankId contactOwner(const BodyRecord* first, const BodyRecord* second,
                    ImageShift relative = {0, 0, 0});

/// One rank's state machine: its registry plus warm-start memory.
class RankState
{
 public:
  RankState(RankId self, std::shared_ptr<const DomainPartition> partition);

  RankId rank() const noexcept { return registry_.rank(); }
  BodyRegistry& registry() noexcept { return registry_; }
  const BodyRegistry& registry() const noexcept { return registry_; }
  const DomainPartition& partition() const noexcept { return *partition_; }

  /// One full time step; must be entered by every rank of the transport.
  RankStepReport step(Transport& transport, const StepConfig& cfg);

 private:
  struct Workspace;

  void detect(Workspace& ws, const StepConfig& cfg);
  void initializeAccumulators(Workspace& ws, Transport& transport, const StepConfig& cfg);
  void reduceCorrections(Workspace& ws, Transport& transport, const StepConfig& cfg,
                         bool broadcastAll);
  void integrate(Workspace& ws, const StepConfig& cfg);
  void synchronize(Workspace& ws, Transport& transport, const StepConfig& cfg);

  std::shared_ptr<const DomainPartition> partition_;
  BodyRegistry registry_;
  std::map<ContactId, Vector3> previousReactions_;
};

}  // namespace nscd
