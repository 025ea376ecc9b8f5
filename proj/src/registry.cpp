#include "nscd/registry.hpp"

#include <algorithm>

namespace nscd
{

namespace
{

void appendHolders(const DomainPartition& part, const ShapeInstance& inst, RankId rank,
                   RankId parent, std::vector<Holder>& out)
{
  const Box box = part.subdomain(rank);
  for (const auto& s : part.imageShifts())
  {
    if (rank == parent && s == ImageShift{0, 0, 0})
    {
      continue;
    }
    const Vector3 off = part.shiftVector(s);
    const Box shifted{box.lo - off, box.hi - off};
    // Testing the unshifted hull against the inversely shifted box keeps the
    // hull coordinates bitwise identical across images.
    if (hullIntersectsBox(inst, shifted))
    {
      out.push_back({rank, s});
    }
  }
}

}  // namespace

std::vector<Holder> computeHolders(const DomainPartition& part, const RigidBody& body,
                                   RankId parent, const HullConfig& cfg)
{
  std::vector<Holder> out;
  const ShapeInstance inst = makeShapeInstance(body, cfg);
  if (!(inst.hullRadius() < part.ldd()))
  {
    throw ProtocolViolation("hull of body " + std::to_string(raw(body.id)) +
                            " reaches past neighbouring subdomains");
  }
  appendHolders(part, inst, parent, parent, out);
  for (RankId q : part.neighbors(parent))
  {
    appendHolders(part, inst, q, parent, out);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Holder> computeHoldersExhaustive(const DomainPartition& part, const RigidBody& body,
                                             RankId parent, const HullConfig& cfg)
{
  std::vector<Holder> out;
  const ShapeInstance inst = makeShapeInstance(body, cfg);
  for (RankId q = 0; q < part.size(); ++q)
  {
    appendHolders(part, inst, q, parent, out);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ImageShift> shiftsOn(const BodyRecord& record, RankId rank)
{
  std::vector<ImageShift> out;
  if (record.parent == rank)
  {
    out.push_back({0, 0, 0});
  }
  for (const auto& h : record.holders)
  {
    if (h.rank == rank)
    {
      out.push_back(h.shift);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<RankId> holderRanks(const BodyRecord& record)
{
  std::vector<RankId> out{record.parent};
  for (const auto& h : record.holders)
  {
    out.push_back(h.rank);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const BodyRecord* BodyRegistry::find(BodyId id) const
{
  if (auto it = originals_.find(id); it != originals_.end())
  {
    return &it->second;
  }
  if (auto it = shadows_.find(id); it != shadows_.end())
  {
    return &it->second;
  }
  return nullptr;
}

}  // namespace nscd
