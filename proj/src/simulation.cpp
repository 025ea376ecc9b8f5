#include "nscd/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

namespace nscd
{

namespace
{

constexpr ImageShift kZeroShift{0, 0, 0};

std::string bodyText(BodyId id)
{
  return "body " + std::to_string(raw(id));
}

void validateConfig(const StepConfig& cfg)
{
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt))
  {
    throw ConfigError("time step must be positive");
  }
  if (cfg.solver.iterations < 0)
  {
    throw ConfigError("iteration count must be non-negative");
  }
  if (!(cfg.solver.relaxation > 0.0) || !std::isfinite(cfg.solver.relaxation))
  {
    throw ConfigError("relaxation parameter must be positive");
  }
  if (!(cfg.frictionCoefficient >= 0.0) || !std::isfinite(cfg.frictionCoefficient))
  {
    throw ConfigError("friction coefficient must be non-negative");
  }
  if (!(cfg.safetyMargin >= 0.0))
  {
    throw ConfigError("hull safety margin must be non-negative");
  }
  if (!(cfg.solver.errorReduction >= 0.0))
  {
    throw ConfigError("error reduction parameter must be non-negative");
  }
}

bool sameState(const RigidBody& a, const RigidBody& b)
{
  return a.position == b.position && a.orientation.coeffs() == b.orientation.coeffs() &&
         a.linearVelocity == b.linearVelocity && a.angularVelocity == b.angularVelocity;
}

}  // namespace

Simulation::Simulation(DomainPartition partition, std::span<const RigidBody> bodies,
                       StepConfig config)
    : partition_(std::make_shared<const DomainPartition>(std::move(partition))),
      config_(std::move(config))
{
  validateConfig(config_);
  const DomainPartition& part = *partition_;
  ranks_.reserve(part.size());
  for (RankId r = 0; r < part.size(); ++r)
  {
    ranks_.emplace_back(r, partition_);
  }
  const HullConfig hull{config_.safetyMargin, config_.dt};

  std::unordered_set<BodyId> seen;
  std::vector<RigidBody> locals;
  for (RigidBody b : bodies)
  {
    if (!seen.insert(b.id).second)
    {
      throw ConfigError("duplicate " + bodyText(b.id));
    }
    try
    {
      validateShape(b.shape);
    }
    catch (const std::invalid_argument& e)
    {
      throw ConfigError(bodyText(b.id) + ": " + e.what());
    }
    if (b.kind == BodyKind::Global || !isBounded(b.shape))
    {
      b.kind = BodyKind::Global;
      for (auto& r : ranks_)
      {
        r.registry().globals().push_back(b);
      }
      continue;
    }
    b.position = part.wrap(b.position);
    const double rbar = boundingRadius(b.shape);
    const Box& dom = part.domain();
    for (int k = 0; k < 3; ++k)
    {
      if (part.periodic()[k])
      {
        continue;
      }
      const double slack = 1e-12 * (dom.hi(k) - dom.lo(k));
      if (b.position(k) - rbar < dom.lo(k) - slack || b.position(k) + rbar > dom.hi(k) + slack)
      {
        throw ConfigError(bodyText(b.id) + " crosses a non-periodic domain boundary");
      }
    }
    locals.push_back(std::move(b));
  }

  const auto violations = checkLddCondition(part, locals, hull);
  if (!violations.empty())
  {
    std::ostringstream msg;
    msg << "l_dd condition violated (l_dd = " << part.ldd() << " m):";
    for (const auto& v : violations)
    {
      msg << ' ' << raw(v.body) << " by " << v.margin << " m;";
    }
    throw ConfigError(msg.str());
  }

  for (auto& b : locals)
  {
    RankId parent = 0;
    try
    {
      parent = part.ownerOfPoint(b.position);
    }
    catch (const OutOfDomainError&)
    {
      throw ConfigError(bodyText(b.id) + " lies outside the domain");
    }
    BodyRecord rec;
    b.kind = BodyKind::Local;
    b.parentRank = parent;
    rec.body = b;
    rec.parent = parent;
    try
    {
      rec.holders = computeHolders(part, b, parent, hull);
    }
    catch (const ProtocolViolation& e)
    {
      throw ConfigError(e.what());
    }
    for (RankId r : holderRanks(rec))
    {
      if (r == parent)
      {
        continue;
      }
      BodyRecord copy = rec;
      copy.body.kind = BodyKind::Shadow;
      ranks_[r].registry().shadows().emplace(b.id, std::move(copy));
    }
    ranks_[parent].registry().originals().emplace(b.id, std::move(rec));
  }
}

StepReport Simulation::step(Transport& transport)
{
  if (transport.size() != partition_->size())
  {
    throw ConfigError("transport has " + std::to_string(transport.size()) +
                      " ranks but the partition needs " + std::to_string(partition_->size()));
  }
  auto part = partition_;
  transport.setTopology([part](RankId from, RankId to) { return part->isNeighbor(from, to); });

  StepReport report;
  report.ranks.resize(ranks_.size());
  const auto start = std::chrono::steady_clock::now();
  transport.run([&](RankId r) { report.ranks[r] = ranks_[r].step(transport, config_); });
  report.wallSeconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (const auto& r : report.ranks)
  {
    report.contacts += r.contacts;
    report.unconvergedSolves += r.unconvergedSolves;
    report.messages += r.messagesSent;
    auto& m = report.maxResidual;
    m.negativeNormal = std::max(m.negativeNormal, r.maxResidual.negativeNormal);
    m.penetration = std::max(m.penetration, r.maxResidual.penetration);
    m.complementarity = std::max(m.complementarity, r.maxResidual.complementarity);
    m.coneViolation = std::max(m.coneViolation, r.maxResidual.coneViolation);
    m.slidingMisalignment = std::max(m.slidingMisalignment, r.maxResidual.slidingMisalignment);
    m.frictionDeficit = std::max(m.frictionDeficit, r.maxResidual.frictionDeficit);
  }
  return report;
}

std::vector<RigidBody> Simulation::bodies() const
{
  std::vector<RigidBody> out;
  for (const auto& r : ranks_)
  {
    for (const auto& [id, rec] : r.registry().originals())
    {
      out.push_back(rec.body);
    }
  }
  if (!ranks_.empty())
  {
    const auto& g = ranks_.front().registry().globals();
    out.insert(out.end(), g.begin(), g.end());
  }
  std::sort(out.begin(), out.end(),
            [](const RigidBody& a, const RigidBody& b) { return a.id < b.id; });
  return out;
}

std::size_t Simulation::localBodyCount() const
{
  std::size_t n = 0;
  for (const auto& r : ranks_)
  {
    n += r.registry().originals().size();
  }
  return n;
}

std::set<ContactId> referenceContacts(const Simulation& sim)
{
  const DomainPartition& part = sim.partition();
  const HullConfig hull{sim.config().safetyMargin, sim.config().dt};
  std::vector<ShapeInstance> shapes;
  std::vector<ImageShift> shifts;
  for (const auto& b : sim.bodies())
  {
    ShapeInstance base = makeShapeInstance(b, hull);
    if (b.kind == BodyKind::Global)
    {
      base.global = true;
      shapes.push_back(std::move(base));
      shifts.push_back(kZeroShift);
      continue;
    }
    for (const auto& s : part.imageShifts())
    {
      shapes.push_back(s == kZeroShift ? base : translated(base, part.shiftVector(s)));
      shifts.push_back(s);
    }
  }

  std::set<ContactId> out;
  for (auto [i, j] : broadPhase(shapes))
  {
    if (!shapes[i].bounded())
    {
      std::swap(i, j);
    }
    if (shifts[i] != kZeroShift || (shapes[j].global && shifts[j] != kZeroShift))
    {
      continue;
    }
    for (auto& c : narrowPhase(shapes[i], shapes[j], sim.config().frictionCoefficient))
    {
      c.id.shift = shapes[j].global ? kZeroShift : shifts[j];
      out.insert(c.id);
    }
  }
  return out;
}

std::vector<std::string> checkProtocolInvariants(const Simulation& sim,
                                                 const std::set<ContactId>* contacts,
                                                 const StepReport* report)
{
  std::vector<std::string> issues;
  const DomainPartition& part = sim.partition();
  const HullConfig hull{sim.config().safetyMargin, sim.config().dt};

  struct Seen
  {
    std::vector<std::pair<RankId, const BodyRecord*>> originals;
    std::vector<std::pair<RankId, const BodyRecord*>> shadows;
  };
  std::map<BodyId, Seen> all;
  for (const auto& r : sim.ranks())
  {
    for (const auto& [id, rec] : r.registry().originals())
    {
      all[id].originals.emplace_back(r.rank(), &rec);
    }
    for (const auto& [id, rec] : r.registry().shadows())
    {
      all[id].shadows.emplace_back(r.rank(), &rec);
    }
  }

  for (const auto& [id, seen] : all)
  {
    if (seen.originals.size() != 1)
    {
      issues.push_back(bodyText(id) + " is original on " + std::to_string(seen.originals.size()) +
                       " ranks");
      continue;
    }
    const auto [parent, rec] = seen.originals.front();
    if (rec->parent != parent || rec->body.parentRank != parent ||
        rec->body.kind != BodyKind::Local)
    {
      issues.push_back(bodyText(id) + " original record disagrees with its rank");
    }
    if (!part.subdomain(parent).contains(rec->body.position))
    {
      issues.push_back(bodyText(id) + " center lies outside its parent's subdomain");
    }
    // Requirement 1: holders are exactly the hull-intersecting (rank, image) pairs.
    const auto expected = computeHoldersExhaustive(part, rec->body, parent, hull);
    if (expected != rec->holders)
    {
      issues.push_back(bodyText(id) + " holder list differs from the hull intersection test");
    }
    auto expectedRanks = holderRanks(*rec);
    expectedRanks.erase(std::remove(expectedRanks.begin(), expectedRanks.end(), parent),
                        expectedRanks.end());
    std::vector<RankId> shadowRanks;
    for (const auto& [r, s] : seen.shadows)
    {
      shadowRanks.push_back(r);
      // Requirement 2: identical parent, holder list and state everywhere.
      if (s->parent != rec->parent || s->holders != rec->holders || !sameState(s->body, rec->body) ||
          s->body.kind != BodyKind::Shadow || s->body.parentRank != parent)
      {
        issues.push_back(bodyText(id) + " shadow on rank " + std::to_string(r) +
                         " is out of sync");
      }
    }
    std::sort(shadowRanks.begin(), shadowRanks.end());
    if (shadowRanks != expectedRanks)
    {
      issues.push_back(bodyText(id) + " shadows are not held exactly by the listed ranks");
    }
  }

  const auto ranks = sim.ranks();
  for (std::size_t r = 1; r < ranks.size(); ++r)
  {
    const auto& g0 = ranks[0].registry().globals();
    const auto& gr = ranks[r].registry().globals();
    bool same = g0.size() == gr.size();
    for (std::size_t k = 0; same && k < g0.size(); ++k)
    {
      same = g0[k].id == gr[k].id && sameState(g0[k], gr[k]);
    }
    if (!same)
    {
      issues.push_back("globals on rank " + std::to_string(r) + " differ from rank 0");
    }
  }

  if (report != nullptr)
  {
    std::map<ContactId, int> owners;
    std::map<BodyId, int> integrated;
    for (const auto& rr : report->ranks)
    {
      for (const auto& c : rr.ownedContacts)
      {
        ++owners[c];
      }
      for (BodyId b : rr.integratedBodies)
      {
        ++integrated[b];
      }
      for (RankId t : rr.messageTargets)
      {
        if (!part.isNeighbor(rr.rank, t))
        {
          issues.push_back("rank " + std::to_string(rr.rank) + " sent to non-neighbour " +
                           std::to_string(t));
        }
      }
    }
    for (const auto& [c, n] : owners)
    {
      if (n != 1)
      {
        issues.push_back("contact owned by " + std::to_string(n) + " ranks");
      }
      if (contacts != nullptr && !contacts->contains(c))
      {
        issues.push_back("owned contact missing from the reference detection");
      }
    }
    if (contacts != nullptr)
    {
      for (const auto& c : *contacts)
      {
        if (!owners.contains(c))
        {
          issues.push_back("contact detected globally but owned by no rank");
        }
      }
    }
    for (const auto& [id, seen] : all)
    {
      const auto it = integrated.find(id);
      if (it == integrated.end() || it->second != 1)
      {
        issues.push_back(bodyText(id) + " integrated " +
                         std::to_string(it == integrated.end() ? 0 : it->second) + " times");
      }
    }
  }
  return issues;
}

}  // namespace nscd
