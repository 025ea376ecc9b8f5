#include "nscd/wire.hpp"

#include <bit>
#include <string>

namespace nscd
{

namespace
{

enum class Kind : std::uint8_t
{
  ShadowCreate = 1,
  ShadowUpdate = 2,
  ShadowRemove = 3,
  Migrate = 4,
  Correction = 5,
  Accumulator = 6,
};

enum class ShapeTag : std::uint8_t
{
  Sphere = 0,
  Composite = 1,
  HalfSpace = 2,
};

class Writer
{
 public:
  template <typename U>
  void unsignedLe(U v)
  {
    for (std::size_t i = 0; i < sizeof(U); ++i)
    {
      out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
    }
  }

  void u8(std::uint8_t v) { unsignedLe(v); }
  void u16(std::uint16_t v) { unsignedLe(v); }
  void u32(std::uint32_t v) { unsignedLe(v); }
  void u64(std::uint64_t v) { unsignedLe(v); }
  void i8(std::int8_t v) { u8(std::bit_cast<std::uint8_t>(v)); }
  void i32(std::int32_t v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void vec3(const Vector3& v)
  {
    f64(v.x());
    f64(v.y());
    f64(v.z());
  }

  void quat(const Quaternion& q)
  {
    f64(q.w());
    f64(q.x());
    f64(q.y());
    f64(q.z());
  }

  void shift(const ImageShift& s)
  {
    for (auto c : s)
    {
      i8(c);
    }
  }

  void holders(const std::vector<Holder>& hs)
  {
    u32(static_cast<std::uint32_t>(hs.size()));
    for (const auto& h : hs)
    {
      i32(h.rank);
      shift(h.shift);
    }
  }

  void mass(const MassProperties& m)
  {
    u8(m.isInfinite() ? 1 : 0);
    if (m.isInfinite())
    {
      return;
    }
    f64(m.mass());
    const Matrix3& i = m.bodyFrameInertia();
    for (int r = 0; r < 3; ++r)
    {
      for (int c = 0; c < 3; ++c)
      {
        f64(i(r, c));
      }
    }
  }

  void shape(const Shape& s)
  {
    if (const auto* sp = std::get_if<Sphere>(&s))
    {
      u8(static_cast<std::uint8_t>(ShapeTag::Sphere));
      f64(sp->radius);
    }
    else if (const auto* cs = std::get_if<CompositeOfSpheres>(&s))
    {
      u8(static_cast<std::uint8_t>(ShapeTag::Composite));
      u32(static_cast<std::uint32_t>(cs->spheres.size()));
      for (const auto& e : cs->spheres)
      {
        vec3(e.offset);
        f64(e.radius);
      }
    }
    else
    {
      const auto& h = std::get<HalfSpace>(s);
      u8(static_cast<std::uint8_t>(ShapeTag::HalfSpace));
      vec3(h.normal);
      f64(h.offset);
    }
  }

  void record(const BodyRecord& r)
  {
    const RigidBody& b = r.body;
    u64(raw(b.id));
    u8(static_cast<std::uint8_t>(b.kind));
    vec3(b.position);
    quat(b.orientation);
    vec3(b.linearVelocity);
    vec3(b.angularVelocity);
    mass(b.massProperties);
    shape(b.shape);
    i32(r.parent);
    holders(r.holders);
  }

  void message(const Message& m)
  {
    std::visit([this](const auto& v) { payload(v); }, m);
  }

  std::vector<std::byte> take() { return std::move(out_); }

 private:
  void kind(Kind k) { u8(static_cast<std::uint8_t>(k)); }

  void payload(const ShadowCreate& m)
  {
    kind(Kind::ShadowCreate);
    record(m.record);
  }

  void payload(const ShadowUpdate& m)
  {
    kind(Kind::ShadowUpdate);
    u64(raw(m.id));
    vec3(m.position);
    quat(m.orientation);
    vec3(m.linearVelocity);
    vec3(m.angularVelocity);
    i32(m.parent);
    holders(m.holders);
  }

  void payload(const ShadowRemove& m)
  {
    kind(Kind::ShadowRemove);
    u64(raw(m.id));
  }

  void payload(const Migrate& m)
  {
    kind(Kind::Migrate);
    record(m.record);
  }

  void payload(const CorrectionContribution& m)
  {
    kind(Kind::Correction);
    u64(raw(m.entry.body));
    u64(m.entry.group.major);
    u64(m.entry.group.minor);
    shift(m.entry.group.shift);
    vec3(m.entry.linear);
    vec3(m.entry.angular);
  }

  void payload(const AccumulatorBroadcast& m)
  {
    kind(Kind::Accumulator);
    u64(raw(m.id));
    vec3(m.linear);
    vec3(m.angular);
  }

  std::vector<std::byte> out_;
};

class Reader
{
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}

  template <typename U>
  U unsignedLe()
  {
    if (in_.size() - pos_ < sizeof(U))
    {
      throw WireError("truncated envelope");
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
    {
      v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }

  std::uint8_t u8() { return unsignedLe<std::uint8_t>(); }
  std::uint16_t u16() { return unsignedLe<std::uint16_t>(); }
  std::uint32_t u32() { return unsignedLe<std::uint32_t>(); }
  std::uint64_t u64() { return unsignedLe<std::uint64_t>(); }
  std::int8_t i8() { return std::bit_cast<std::int8_t>(u8()); }
  std::int32_t i32() { return std::bit_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  Vector3 vec3()
  {
    const double x = f64();
    const double y = f64();
    const double z = f64();
    return {x, y, z};
  }

  Quaternion quat()
  {
    const double w = f64();
    const double x = f64();
    const double y = f64();
    const double z = f64();
    return Quaternion(w, x, y, z);
  }

  ImageShift shift()
  {
    ImageShift s{};
    for (auto& c : s)
    {
      c = i8();
    }
    return s;
  }

  std::vector<Holder> holders()
  {
    const std::uint32_t n = u32();
    std::vector<Holder> out;
    out.reserve(std::min<std::size_t>(n, remaining() / 7));
    for (std::uint32_t i = 0; i < n; ++i)
    {
      const RankId r = i32();
      out.push_back({r, shift()});
    }
    return out;
  }

  MassProperties mass()
  {
    if (u8() != 0)
    {
      return MassProperties::infinite();
    }
    const double m = f64();
    Matrix3 inertia;
    for (int r = 0; r < 3; ++r)
    {
      for (int c = 0; c < 3; ++c)
      {
        inertia(r, c) = f64();
      }
    }
    return MassProperties::finite(m, inertia);
  }

  Shape shape()
  {
    switch (static_cast<ShapeTag>(u8()))
    {
      case ShapeTag::Sphere:
        return Sphere{f64()};
      case ShapeTag::Composite:
      {
        const std::uint32_t n = u32();
        CompositeOfSpheres cs;
        cs.spheres.reserve(std::min<std::size_t>(n, remaining() / 32));
        for (std::uint32_t i = 0; i < n; ++i)
        {
          const Vector3 off = vec3();
          cs.spheres.push_back({off, f64()});
        }
        return cs;
      }
      case ShapeTag::HalfSpace:
      {
        const Vector3 n = vec3();
        return HalfSpace{n, f64()};
      }
    }
    throw WireError("unknown shape tag");
  }

  BodyRecord record()
  {
    BodyRecord r;
    RigidBody& b = r.body;
    b.id = BodyId{u64()};
    const std::uint8_t kind = u8();
    if (kind > static_cast<std::uint8_t>(BodyKind::Global))
    {
      throw WireError("unknown body kind");
    }
    b.kind = static_cast<BodyKind>(kind);
    b.position = vec3();
    b.orientation = quat();
    b.linearVelocity = vec3();
    b.angularVelocity = vec3();
    b.massProperties = mass();
    b.shape = shape();
    r.parent = i32();
    b.parentRank = r.parent;
    r.holders = holders();
    return r;
  }

  Message message()
  {
    switch (static_cast<Kind>(u8()))
    {
      case Kind::ShadowCreate:
        return ShadowCreate{record()};
      case Kind::ShadowUpdate:
      {
        ShadowUpdate m;
        m.id = BodyId{u64()};
        m.position = vec3();
        m.orientation = quat();
        m.linearVelocity = vec3();
        m.angularVelocity = vec3();
        m.parent = i32();
        m.holders = holders();
        return m;
      }
      case Kind::ShadowRemove:
        return ShadowRemove{BodyId{u64()}};
      case Kind::Migrate:
        return Migrate{record()};
      case Kind::Correction:
      {
        CorrectionEntry e;
        e.body = BodyId{u64()};
        e.group.major = u64();
        e.group.minor = u64();
        e.group.shift = shift();
        e.linear = vec3();
        e.angular = vec3();
        return CorrectionContribution{e};
      }
      case Kind::Accumulator:
      {
        AccumulatorBroadcast m;
        m.id = BodyId{u64()};
        m.linear = vec3();
        m.angular = vec3();
        return m;
      }
    }
    throw WireError("unknown message kind");
  }

  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encodeEnvelope(RankId source, std::span<const Message> messages)
{
  Writer w;
  w.u32(kWireMagic);
  w.u16(kWireVersion);
  w.i32(source);
  w.u32(static_cast<std::uint32_t>(messages.size()));
  for (const auto& m : messages)
  {
    w.message(m);
  }
  return w.take();
}

DecodedEnvelope decodeEnvelope(std::span<const std::byte> bytes)
{
  Reader r(bytes);
  if (r.u32() != kWireMagic)
  {
    throw WireError("bad envelope magic");
  }
  if (const auto v = r.u16(); v != kWireVersion)
  {
    throw WireError("unsupported envelope version " + std::to_string(v));
  }
  DecodedEnvelope out;
  out.source = r.i32();
  const std::uint32_t n = r.u32();
  out.messages.reserve(std::min<std::size_t>(n, r.remaining()));
  for (std::uint32_t i = 0; i < n; ++i)
  {
    out.messages.push_back(r.message());
  }
  if (r.remaining() != 0)
  {
    throw WireError("trailing bytes after envelope");
  }
  return out;
}

}  // namespace nscd
