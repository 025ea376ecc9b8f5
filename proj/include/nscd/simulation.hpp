#pragma once

#include "nscd/rank.hpp"

#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nscd
{

/// Invalid scenario or run configuration.
class ConfigError : public std::invalid_argument
{
 public:
  using std::invalid_argument::invalid_argument;
};

struct StepReport
{
  std::vector<RankStepReport> ranks;
  double wallSeconds = 0.0;
  std::size_t contacts = 0;
  ContactResidual maxResidual;
  std::size_t unconvergedSolves = 0;
  std::uint64_t messages = 0;
};

/// All ranks of one partitioned simulation plus the global driver.
class Simulation
{
 public:
  /// Distributes the bodies: each non-global body goes to the rank owning its
  /// (wrapped) center with shadows on every hull-intersecting rank; globals are
  /// replicated. Throws ConfigError for bodies outside the domain, bounded
  /// shapes crossing a non-periodic boundary, or l_dd violations.
  Simulation(DomainPartition partition, std::span<const RigidBody> bodies, StepConfig config);

  const DomainPartition& partition() const noexcept { return *partition_; }
  const StepConfig& config() const noexcept { return config_; }
  StepConfig& config() noexcept { return config_; }

  std::span<RankState> ranks() noexcept { return ranks_; }
  std::span<const RankState> ranks() const noexcept { return ranks_; }

  /// Runs one time step on every rank through the transport, whose size must
  /// match the partition. Traffic is restricted to nearest neighbours.
  StepReport step(Transport& transport);

  /// Current originals of all ranks plus the globals of rank 0, sorted by id.
  std::vector<RigidBody> bodies() const;

  std::size_t localBodyCount() const;

 private:
  std::shared_ptr<const DomainPartition> partition_;
  StepConfig config_;
  std::vector<RankState> ranks_;
};

/// Contact ids a single global observer detects for the current state:
/// every non-global body at every image, owned or not by any rank.
std::set<ContactId> referenceContacts(const Simulation& sim);

/// Global test-only sweep over the protocol invariants. `contacts` is the
/// reference contact set taken before the step that produced `report`
/// (diagnostics enabled). Returns human-readable violations; empty if all hold.
std::vector<std::string> checkProtocolInvariants(const Simulation& sim,
                                                 const std::set<ContactId>* contacts = nullptr,
                                                 const StepReport* report = nullptr);

}  // namespace nscd
