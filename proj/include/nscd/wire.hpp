#pragma once

#include "nscd/registry.hpp"
#include "nscd/solver.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace nscd
{

/// Envelope wire format, version 1. All integers and IEEE-754 doubles are
/// little-endian; doubles travel as their raw 64-bit pattern.
///
///   envelope   := magic:u32 ("NSCD" = 0x4443534E) version:u16 source:i32
///                 count:u32 message*count
///   message    := kind:u8 payload
///
/// Payloads by kind:
///   1 ShadowCreate   record
///   2 ShadowUpdate   id:u64 position:vec3 orientation:quat linear:vec3
///                    angular:vec3 parent:i32 holders
///   3 ShadowRemove   id:u64
///   4 Migrate        record
///   5 Correction     id:u64 groupMajor:u64 groupMinor:u64 groupShift:i8[3]
///                    linear:vec3 angular:vec3
///   6 Accumulator    id:u64 linear:vec3 angular:vec3
///
///   record     := id:u64 kind:u8 position:vec3 orientation:quat linear:vec3
///                 angular:vec3 mass shape parent:i32 holders
///   mass       := infinite:u8 [mass:f64 inertia:f64[9] (row-major)]
///   shape      := tag:u8 (0 sphere radius:f64
///                        | 1 composite count:u32 (offset:vec3 radius:f64)*count
///                        | 2 half-space normal:vec3 offset:f64)
///   holders    := count:u32 (rank:i32 shift:i8[3])*count
///   vec3       := f64 x y z;   quat := f64 w x y z
inline constexpr std::uint32_t kWireMagic = 0x4443534E;
inline constexpr std::uint16_t kWireVersion = 1;

struct ShadowCreate
{
  BodyRecord record;
};

struct ShadowUpdate
{
  BodyId id{};
  Vector3 position = Vector3::Zero();
  Quaternion orientation = Quaternion::Identity();
  Vector3 linearVelocity = Vector3::Zero();
  Vector3 angularVelocity = Vector3::Zero();
  RankId parent = 0;
  std::vector<Holder> holders;
};

struct ShadowRemove
{
  BodyId id{};
};

struct Migrate
{
  BodyRecord record;
};

struct CorrectionContribution
{
  CorrectionEntry entry;
};

struct AccumulatorBroadcast
{
  BodyId id{};
  Vector3 linear = Vector3::Zero();
  Vector3 angular = Vector3::Zero();
};

using Message = std::variant<ShadowCreate, ShadowUpdate, ShadowRemove, Migrate,
                             CorrectionContribution, AccumulatorBroadcast>;

class WireError : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::byte> encodeEnvelope(RankId source, std::span<const Message> messages);

struct DecodedEnvelope
{
  RankId source = 0;
  std::vector<Message> messages;
};

/// Throws WireError on bad magic, unknown version or kind, or truncation.
DecodedEnvelope decodeEnvelope(std::span<const std::byte> bytes);

}  // namespace nscd
