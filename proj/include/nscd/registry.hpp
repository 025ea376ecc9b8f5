#pragma once

#include "nscd/collision.hpp"
#include "nscd/dynamics.hpp"
#include "nscd/partition.hpp"

#include <compare>
#include <map>
#include <stdexcept>
#include <vector>

namespace nscd
{

/// Raised when the shadow-copy protocol detects a broken invariant
/// (unknown body, non-neighbour target, empty witness set, ...).
class ProtocolViolation : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

/// A rank instantiating a body at a periodic image (shift relative to the
/// original's position).
struct Holder
{
  RankId rank = 0;
  ImageShift shift{0, 0, 0};

  auto operator<=>(const Holder&) const = default;
  bool operator==(const Holder&) const = default;
};

/// Body state plus the explicitly communicated parent and holder list.
/// `holders` is sorted and never contains {parent, zero shift}.
struct BodyRecord
{
  RigidBody body;
  RankId parent = 0;
  std::vector<Holder> holders;
};

/// Hull-instance holders of a body whose center lies in the parent's
/// subdomain. Only the parent and its neighbours are examined.
std::vector<Holder> computeHolders(const DomainPartition& part, const RigidBody& body,
                                   RankId parent, const HullConfig& cfg);

/// Same test over every rank; used by invariant checkers.
std::vector<Holder> computeHoldersExhaustive(const DomainPartition& part, const RigidBody& body,
                                             RankId parent, const HullConfig& cfg);

/// Image shifts at which `rank` instantiates the body.
std::vector<ImageShift> shiftsOn(const BodyRecord& record, RankId rank);

/// All ranks instantiating the body (parent included), ascending.
std::vector<RankId> holderRanks(const BodyRecord& record);

class BodyRegistry
{
 public:
  explicit BodyRegistry(RankId self = 0) : self_(self) {}

  RankId rank() const noexcept { return self_; }

  std::map<BodyId, BodyRecord>& originals() noexcept { return originals_; }
  const std::map<BodyId, BodyRecord>& originals() const noexcept { return originals_; }
  std::map<BodyId, BodyRecord>& shadows() noexcept { return shadows_; }
  const std::map<BodyId, BodyRecord>& shadows() const noexcept { return shadows_; }
  std::vector<RigidBody>& globals() noexcept { return globals_; }
  const std::vector<RigidBody>& globals() const noexcept { return globals_; }

  /// Original or shadow record, nullptr if the body is not held here.
  const BodyRecord* find(BodyId id) const;

  std::size_t instantiatedCount() const noexcept { return originals_.size() + shadows_.size(); }

 private:
  RankId self_;
  std::map<BodyId, BodyRecord> originals_;
  std::map<BodyId, BodyRecord> shadows_;
  std::vector<RigidBody> globals_;
};

}  // namespace nscd
