#include "nscd/rank.hpp"

#include "nscd/wire.hpp"

#include <algorithm>
#include <chrono>
#include <string>
#include <tuple>
#include <unordered_map>

namespace nscd
{

std::string_view phaseName(Phase phase) noexcept
{
  switch (phase)
  {
    case Phase::Detection:
      return "detection";
    case Phase::AccumulatorInit:
      return "accumulator_init";
    case Phase::Sweeps:
      return "sweeps";
    case Phase::ReductionFirst:
      return "reduction_first";
    case Phase::ReductionSecond:
      return "reduction_second";
    case Phase::Integration:
      return "integration";
    case Phase::Synchronization:
      return "synchronization";
  }
  return "unknown";
}

namespace
{

using Clock = std::chrono::steady_clock;

constexpr ImageShift kZeroShift{0, 0, 0};

bool holdsInstance(const BodyRecord& r, RankId rank, const ImageShift& shift)
{
  if (rank == r.parent && shift == kZeroShift)
  {
    return true;
  }
  return std::binary_search(r.holders.begin(), r.holders.end(), Holder{rank, shift});
}

std::string idText(BodyId id)
{
  return std::to_string(raw(id));
}

class PhaseTimer
{
 public:
  PhaseTimer(RankStepReport& report, Phase phase)
      : slot_(report.seconds[static_cast<std::size_t>(phase)]), start_(Clock::now())
  {
  }
  ~PhaseTimer() { slot_ += std::chrono::duration<double>(Clock::now() - start_).count(); }
  PhaseTimer(const PhaseTimer&) = delete;
  PhaseTimer& operator=(const PhaseTimer&) = delete;

 private:
  double& slot_;
  Clock::time_point start_;
};

using Outbox = std::map<RankId, std::vector<Message>>;

}  // namespace

RankId contactOwner(const BodyRecord* first, const BodyRecord* second, ImageShift relative)
{
  if (first == nullptr && second == nullptr)
  {
    throw ProtocolViolation("contact between two global bodies");
  }
  if (first == nullptr || second == nullptr)
  {
    return (first != nullptr ? first : second)->parent;
  }

  std::vector<RankId> witnesses;
  auto consider = [&](RankId rank, const ImageShift& shiftA) {
    ImageShift shiftB{};
    for (int k = 0; k < 3; ++k)
    {
      const int s = shiftA[k] + relative[k];
      if (s < -1 || s > 1)
      {
        return;
      }
      shiftB[k] = static_cast<std::int8_t>(s);
    }
    if (holdsInstance(*second, rank, shiftB))
    {
      witnesses.push_back(rank);
    }
  };
  consider(first->parent, kZeroShift);
  for (const auto& h : first->holders)
  {
    consider(h.rank, h.shift);
  }
  if (witnesses.empty())
  {
    throw ProtocolViolation("no rank holds both bodies " + idText(first->body.id) + " and " +
                            idText(second->body.id));
  }
  std::sort(witnesses.begin(), witnesses.end());
  const bool p1 = std::binary_search(witnesses.begin(), witnesses.end(), first->parent);
  const bool p2 = std::binary_search(witnesses.begin(), witnesses.end(), second->parent);
  if (p1 && p2)
  {
    return std::min(first->parent, second->parent);
  }
  if (p1)
  {
    return first->parent;
  }
  if (p2)
  {
    return second->parent;
  }
  return witnesses.front();
}

namespace
{

enum class Role : std::uint8_t
{
  Original,
  Shadow,
  Global,
};

}  // namespace

struct RankState::Workspace
{
  RankStepReport report;
  SolverState solver;
  std::vector<Role> roles;
  std::vector<RigidBody*> bodies;
  std::vector<BodyRecord*> records;  // null for globals
  std::vector<std::size_t> finiteGlobals;
  std::unordered_map<BodyId, std::size_t> index;

  std::size_t lookup(BodyId id) const
  {
    const auto it = index.find(id);
    if (it == index.end())
    {
      throw ProtocolViolation("message for unknown body " + idText(id));
    }
    return it->second;
  }
};

RankState::RankState(RankId self, std::shared_ptr<const DomainPartition> partition)
    : partition_(std::move(partition)), registry_(self)
{
  if (!partition_ || self < 0 || self >= partition_->size())
  {
    throw std::invalid_argument("rank outside the partition");
  }
}

namespace
{

void sendAll(Transport& transport, RankId self, Outbox& out, RankStepReport& report,
             bool diagnostics)
{
  for (auto& [dest, messages] : out)
  {
    if (messages.empty())
    {
      continue;
    }
    report.messagesSent += messages.size();
    if (diagnostics)
    {
      report.messageTargets.push_back(dest);
    }
    transport.send(self, Envelope{self, dest, encodeEnvelope(self, messages)});
  }
  out.clear();
}

std::vector<Message> receiveAll(Transport& transport, RankId self)
{
  std::vector<Message> out;
  for (const auto& env : transport.exchange(self))
  {
    auto decoded = decodeEnvelope(env.payload);
    if (decoded.source != env.source)
    {
      throw ProtocolViolation("envelope source mismatch");
    }
    for (auto& m : decoded.messages)
    {
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace

void RankState::detect(Workspace& ws, const StepConfig& cfg)
{
  const HullConfig hull{cfg.safetyMargin, cfg.dt};
  const RankId self = rank();
  const DomainPartition& part = *partition_;

  struct Meta
  {
    std::size_t body;
    ImageShift shift;
    Vector3 position;
  };
  std::vector<ShapeInstance> shapes;
  std::vector<Meta> meta;

  auto addState = [&](RigidBody& b, Role role, BodyRecord* record) {
    BodyState s;
    s.id = b.id;
    s.inverseMass = b.massProperties.inverseMass();
    s.inverseInertia = worldInverseInertia(b.orientation, b.massProperties);
    const std::size_t idx = ws.solver.bodies.size();
    ws.solver.bodies.push_back(s);
    ws.roles.push_back(role);
    ws.bodies.push_back(&b);
    ws.records.push_back(record);
    if (!ws.index.emplace(b.id, idx).second)
    {
      throw ProtocolViolation("body " + idText(b.id) + " instantiated twice on rank " +
                              std::to_string(self));
    }
    return idx;
  };

  auto addRecords = [&](std::map<BodyId, BodyRecord>& records, Role role) {
    for (auto& [id, rec] : records)
    {
      const std::size_t idx = addState(rec.body, role, &rec);
      const ShapeInstance base = makeShapeInstance(rec.body, hull);
      for (const auto& s : shiftsOn(rec, self))
      {
        const Vector3 off = part.shiftVector(s);
        shapes.push_back(s == kZeroShift ? base : translated(base, off));
        meta.push_back({idx, s, s == kZeroShift ? rec.body.position : Vector3(rec.body.position + off)});
      }
    }
  };
  addRecords(registry_.originals(), Role::Original);
  addRecords(registry_.shadows(), Role::Shadow);
  for (auto& g : registry_.globals())
  {
    const std::size_t idx = addState(g, Role::Global, nullptr);
    if (!g.massProperties.isInfinite())
    {
      ws.finiteGlobals.push_back(idx);
    }
    ShapeInstance inst = makeShapeInstance(g, hull);
    inst.global = true;
    shapes.push_back(std::move(inst));
    meta.push_back({idx, kZeroShift, g.position});
  }

  struct Pending
  {
    Contact contact;
    ImageShift firstShift;
    std::size_t first;
    std::size_t second;
  };
  std::map<ContactId, Pending> owned;

  for (auto [i, j] : broadPhase(shapes))
  {
    if (!shapes[i].bounded())
    {
      std::swap(i, j);
    }
    const Meta& a = meta[i];
    const Meta& b = meta[j];
    const bool anyGlobal = ws.roles[a.body] == Role::Global || ws.roles[b.body] == Role::Global;
    ImageShift relative{};
    if (anyGlobal)
    {
      // Globals are identical in every image; only the unshifted pairing counts.
      if (a.shift != kZeroShift || b.shift != kZeroShift)
      {
        continue;
      }
    }
    else
    {
      for (int k = 0; k < 3; ++k)
      {
        relative[k] = static_cast<std::int8_t>(b.shift[k] - a.shift[k]);
      }
    }
    auto contacts = narrowPhase(shapes[i], shapes[j], cfg.frictionCoefficient);
    // Witnesses are only guaranteed for overlapping constituent hulls.
    if (contacts.empty() ||
        contactOwner(ws.records[a.body], ws.records[b.body], relative) != self)
    {
      continue;
    }
    for (auto& c : contacts)
    {
      c.id.shift = relative;
      auto [it, inserted] = owned.try_emplace(c.id, Pending{c, a.shift, i, j});
      if (!inserted && a.shift < it->second.firstShift)
      {
        it->second = Pending{c, a.shift, i, j};
      }
    }
  }

  ws.solver.contacts.reserve(owned.size());
  for (const auto& [id, p] : owned)
  {
    const Meta& a = meta[p.first];
    const Meta& b = meta[p.second];
    ws.solver.contacts.push_back(makeContactRow(p.contact, ws.solver.bodies, a.body, a.position,
                                                b.body, b.position, cfg.dt,
                                                cfg.solver.errorReduction));
    if (cfg.recordDiagnostics)
    {
      ws.report.ownedContacts.push_back(id);
    }
  }
  ws.report.contacts = ws.solver.contacts.size();
}

void RankState::initializeAccumulators(Workspace& ws, Transport& transport, const StepConfig& cfg)
{
  {
    PhaseTimer timer(ws.report, Phase::AccumulatorInit);
    for (std::size_t i = 0; i < ws.solver.bodies.size(); ++i)
    {
      if (ws.roles[i] == Role::Shadow)
      {
        continue;
      }
      const RigidBody& b = *ws.bodies[i];
      Wrench w;
      if (!b.massProperties.isInfinite())
      {
        w.force = b.massProperties.mass() * cfg.gravity;
      }
      const Velocities v = integrateVelocities(b, w, cfg.dt);
      ws.solver.bodies[i].accLinear = v.linear;
      ws.solver.bodies[i].accAngular = v.angular;
    }
    for (auto& row : ws.solver.contacts)
    {
      row.reactionAtSweepStart.setZero();
      if (!cfg.solver.warmStart)
      {
        continue;
      }
      const auto it = previousReactions_.find(row.contact.id);
      if (it == previousReactions_.end())
      {
        continue;
      }
      row.reaction = it->second;
      const ImpulseResponse r = impulseResponse(row, ws.solver.bodies, row.reaction);
      BodyState& b1 = ws.solver.bodies[row.body1];
      BodyState& b2 = ws.solver.bodies[row.body2];
      b1.corrLinear += r.linear1;
      b1.corrAngular += r.angular1;
      b2.corrLinear += r.linear2;
      b2.corrAngular += r.angular2;
    }
  }
  reduceCorrections(ws, transport, cfg, true);
}

void RankState::reduceCorrections(Workspace& ws, Transport& transport, const StepConfig& cfg,
                                  bool broadcastAll)
{
  const RankId self = rank();
  auto& bodies = ws.solver.bodies;
  std::vector<char> touched(bodies.size(), 0);
  {
    PhaseTimer timer(ws.report, Phase::ReductionFirst);
    const auto entries = collectCorrections(ws.solver, cfg.solver, self);
    std::vector<CorrectionEntry> mine;
    std::vector<CorrectionEntry> globals;
    Outbox out;
    for (const auto& e : entries)
    {
      const std::size_t idx = ws.lookup(e.body);
      switch (ws.roles[idx])
      {
        case Role::Original:
          mine.push_back(e);
          break;
        case Role::Shadow:
          out[ws.records[idx]->parent].push_back(CorrectionContribution{e});
          break;
        case Role::Global:
          globals.push_back(e);
          break;
      }
    }
    sendAll(transport, self, out, ws.report, cfg.recordDiagnostics);
    for (auto& m : receiveAll(transport, self))
    {
      auto* c = std::get_if<CorrectionContribution>(&m);
      if (c == nullptr)
      {
        throw ProtocolViolation("unexpected message during correction reduction");
      }
      const std::size_t idx = ws.lookup(c->entry.body);
      if (ws.roles[idx] != Role::Original)
      {
        throw ProtocolViolation("correction for body " + idText(c->entry.body) +
                                " sent to a rank that is not its parent");
      }
      mine.push_back(c->entry);
    }
    // Fixed summation order per body: ascending group key.
    std::stable_sort(mine.begin(), mine.end(), [](const auto& x, const auto& y) {
      return std::tie(x.body, x.group) < std::tie(y.body, y.group);
    });
    for (const auto& e : mine)
    {
      const std::size_t idx = ws.index.at(e.body);
      bodies[idx].accLinear += e.linear;
      bodies[idx].accAngular += e.angular;
      touched[idx] = 1;
    }

    if (!ws.finiteGlobals.empty())
    {
      std::vector<double> sum(6 * ws.finiteGlobals.size(), 0.0);
      for (std::size_t g = 0; g < ws.finiteGlobals.size(); ++g)
      {
        const BodyId id = bodies[ws.finiteGlobals[g]].id;
        for (const auto& e : globals)
        {
          if (e.body != id)
          {
            continue;
          }
          for (int k = 0; k < 3; ++k)
          {
            sum[6 * g + k] += e.linear(k);
            sum[6 * g + 3 + k] += e.angular(k);
          }
        }
      }
      const auto total = transport.allReduceSum(self, sum);
      for (std::size_t g = 0; g < ws.finiteGlobals.size(); ++g)
      {
        BodyState& b = bodies[ws.finiteGlobals[g]];
        for (int k = 0; k < 3; ++k)
        {
          b.accLinear(k) += total[6 * g + k];
          b.accAngular(k) += total[6 * g + 3 + k];
        }
      }
    }
  }

  {
    PhaseTimer timer(ws.report, Phase::ReductionSecond);
    Outbox out;
    for (std::size_t i = 0; i < bodies.size(); ++i)
    {
      if (ws.roles[i] != Role::Original || !(broadcastAll || touched[i]))
      {
        continue;
      }
      const BodyRecord& rec = *ws.records[i];
      for (RankId r : holderRanks(rec))
      {
        if (r != self)
        {
          out[r].push_back(AccumulatorBroadcast{rec.body.id, bodies[i].accLinear,
                                                bodies[i].accAngular});
        }
      }
    }
    sendAll(transport, self, out, ws.report, cfg.recordDiagnostics);
    for (auto& m : receiveAll(transport, self))
    {
      auto* a = std::get_if<AccumulatorBroadcast>(&m);
      if (a == nullptr)
      {
        throw ProtocolViolation("unexpected message during accumulator broadcast");
      }
      const std::size_t idx = ws.lookup(a->id);
      if (ws.roles[idx] != Role::Shadow)
      {
        throw ProtocolViolation("accumulator broadcast for body " + idText(a->id) +
                                " that is not a shadow here");
      }
      bodies[idx].accLinear = a->linear;
      bodies[idx].accAngular = a->angular;
    }
    for (auto& b : bodies)
    {
      b.corrLinear.setZero();
      b.corrAngular.setZero();
    }
  }
}

void RankState::integrate(Workspace& ws, const StepConfig& cfg)
{
  PhaseTimer timer(ws.report, Phase::Integration);
  for (std::size_t i = 0; i < ws.solver.bodies.size(); ++i)
  {
    if (ws.roles[i] == Role::Shadow)
    {
      continue;
    }
    RigidBody& b = *ws.bodies[i];
    b.linearVelocity = ws.solver.bodies[i].accLinear;
    b.angularVelocity = ws.solver.bodies[i].accAngular;
    const Pose p = integratePositions(b, cfg.dt);
    b.position = p.position;
    b.orientation = p.orientation;
    if (cfg.recordDiagnostics && ws.roles[i] == Role::Original)
    {
      ws.report.integratedBodies.push_back(b.id);
    }
  }
  if (cfg.solver.warmStart)
  {
    previousReactions_.clear();
    for (const auto& row : ws.solver.contacts)
    {
      previousReactions_.emplace(row.contact.id, row.reaction);
    }
  }
}

void RankState::synchronize(Workspace& ws, Transport& transport, const StepConfig& cfg)
{
  PhaseTimer timer(ws.report, Phase::Synchronization);
  const RankId self = rank();
  const DomainPartition& part = *partition_;
  const HullConfig hull{cfg.safetyMargin, cfg.dt};
  auto& originals = registry_.originals();
  auto& shadows = registry_.shadows();

  Outbox out;
  std::vector<BodyRecord> demoted;
  std::vector<BodyId> leaving;
  for (auto& [id, rec] : originals)
  {
    RigidBody& b = rec.body;
    b.position = part.wrap(b.position);
    RankId parent = self;
    try
    {
      parent = part.ownerOfPoint(b.position);
    }
    catch (const OutOfDomainError&)
    {
      throw ProtocolViolation("body " + idText(id) + " left the domain");
    }
    if (parent != self && !part.isNeighbor(self, parent))
    {
      throw ProtocolViolation("body " + idText(id) + " migrates to non-neighbour rank " +
                              std::to_string(parent));
    }
    BodyRecord next;
    next.body = b;
    next.parent = parent;
    next.body.parentRank = parent;
    next.holders = computeHolders(part, b, parent, hull);
    const auto oldRanks = holderRanks(rec);
    const auto newRanks = holderRanks(next);

    if (parent != self)
    {
      BodyRecord moved = next;
      moved.body.kind = BodyKind::Local;
      out[parent].push_back(Migrate{std::move(moved)});
    }
    for (RankId r : newRanks)
    {
      if (r == self || r == parent)
      {
        continue;
      }
      if (std::binary_search(oldRanks.begin(), oldRanks.end(), r))
      {
        out[r].push_back(ShadowUpdate{id, b.position, b.orientation, b.linearVelocity,
                                      b.angularVelocity, parent, next.holders});
      }
      else
      {
        BodyRecord copy = next;
        copy.body.kind = BodyKind::Shadow;
        out[r].push_back(ShadowCreate{std::move(copy)});
      }
    }
    for (RankId r : oldRanks)
    {
      if (r != self && !std::binary_search(newRanks.begin(), newRanks.end(), r))
      {
        out[r].push_back(ShadowRemove{id});
      }
    }

    if (parent == self)
    {
      next.body.kind = BodyKind::Local;
      rec = std::move(next);
    }
    else
    {
      leaving.push_back(id);
      if (std::binary_search(newRanks.begin(), newRanks.end(), self))
      {
        next.body.kind = BodyKind::Shadow;
        demoted.push_back(std::move(next));
      }
    }
  }
  for (BodyId id : leaving)
  {
    originals.erase(id);
  }
  for (auto& rec : demoted)
  {
    const BodyId id = rec.body.id;
    shadows.insert_or_assign(id, std::move(rec));
  }

  sendAll(transport, self, out, ws.report, cfg.recordDiagnostics);
  for (auto& m : receiveAll(transport, self))
  {
    if (auto* mig = std::get_if<Migrate>(&m))
    {
      const BodyId id = mig->record.body.id;
      if (mig->record.parent != self || originals.contains(id))
      {
        throw ProtocolViolation("invalid migration of body " + idText(id));
      }
      shadows.erase(id);
      mig->record.body.kind = BodyKind::Local;
      originals.emplace(id, std::move(mig->record));
    }
    else if (auto* cr = std::get_if<ShadowCreate>(&m))
    {
      const BodyId id = cr->record.body.id;
      if (originals.contains(id) || shadows.contains(id))
      {
        throw ProtocolViolation("shadow of body " + idText(id) + " created twice");
      }
      cr->record.body.kind = BodyKind::Shadow;
      shadows.emplace(id, std::move(cr->record));
    }
    else if (auto* up = std::get_if<ShadowUpdate>(&m))
    {
      const auto it = shadows.find(up->id);
      if (it == shadows.end())
      {
        throw ProtocolViolation("update for unknown shadow " + idText(up->id));
      }
      BodyRecord& rec = it->second;
      rec.body.position = up->position;
      rec.body.orientation = up->orientation;
      rec.body.linearVelocity = up->linearVelocity;
      rec.body.angularVelocity = up->angularVelocity;
      rec.body.parentRank = up->parent;
      rec.parent = up->parent;
      rec.holders = std::move(up->holders);
    }
    else if (auto* rm = std::get_if<ShadowRemove>(&m))
    {
      if (shadows.erase(rm->id) == 0)
      {
        throw ProtocolViolation("removal of unknown shadow " + idText(rm->id));
      }
    }
    else
    {
      throw ProtocolViolation("unexpected message during synchronization");
    }
  }
}

RankStepReport RankState::step(Transport& transport, const StepConfig& cfg)
{
  const auto start = Clock::now();
  Workspace ws;
  ws.report.rank = rank();
  {
    PhaseTimer timer(ws.report, Phase::Detection);
    detect(ws, cfg);
  }
  initializeAccumulators(ws, transport, cfg);
  if (cfg.onIteration)
  {
    cfg.onIteration(rank(), 0, ws.solver);
  }
  for (int k = 0; k < cfg.solver.iterations; ++k)
  {
    {
      PhaseTimer timer(ws.report, Phase::Sweeps);
      beginSweep(ws.solver);
      sweep(ws.solver, cfg.solver);
    }
    reduceCorrections(ws, transport, cfg, false);
    if (cfg.onIteration)
    {
      cfg.onIteration(rank(), k + 1, ws.solver);
    }
  }
  const ResidualReport res = residual(ws.solver, cfg.solver);
  ws.report.maxResidual = res.max;
  ws.report.unconvergedSolves = static_cast<std::size_t>(std::count_if(
      ws.solver.contacts.begin(), ws.solver.contacts.end(),
      [](const ContactRow& r) { return !r.converged; }));
  integrate(ws, cfg);
  synchronize(ws, transport, cfg);
  ws.report.totalSeconds = std::chrono::duration<double>(Clock::now() - start).count();
  return std::move(ws.report);
}

}  // namespace nscd
