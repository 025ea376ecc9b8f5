#include "nscd/wire.hpp"

#include <doctest.h>

#include <cstring>

using namespace nscd;

namespace
{

BodyRecord compositeRecord()
{
  BodyRecord r;
  r.body.id = BodyId{0x0102030405060708ULL};
  r.body.kind = BodyKind::Shadow;
  r.body.position = Vector3(0.1, -2.5, 1e-300);
  r.body.orientation = Quaternion(0.5, 0.5, -0.5, 0.5);
  r.body.linearVelocity = Vector3(-0.0, 3.0, 1.0 / 3.0);
  r.body.angularVelocity = Vector3(7, 8, 9);
  const CompositeOfSpheres shape{{{Vector3(0.001, 0, 0), 0.003}, {Vector3(-0.001, 0, 0.0005), 0.004}}};
  r.body.shape = shape;
  r.body.massProperties = MassProperties::composite(shape, 2650.0);
  r.body.parentRank = 3;
  r.parent = 3;
  r.holders = {{1, {0, 0, 0}}, {4, {-1, 1, 0}}};
  return r;
}

void checkSameRecord(const BodyRecord& a, const BodyRecord& b)
{
  CHECK(a.body.id == b.body.id);
  CHECK(a.body.kind == b.body.kind);
  CHECK(a.body.position == b.body.position);
  CHECK(a.body.orientation.coeffs() == b.body.orientation.coeffs());
  CHECK(a.body.linearVelocity == b.body.linearVelocity);
  CHECK(std::signbit(a.body.linearVelocity.x()) == std::signbit(b.body.linearVelocity.x()));
  CHECK(a.body.angularVelocity == b.body.angularVelocity);
  CHECK(a.body.massProperties.isInfinite() == b.body.massProperties.isInfinite());
  if (!a.body.massProperties.isInfinite())
  {
    CHECK(a.body.massProperties.mass() == b.body.massProperties.mass());
    CHECK(a.body.massProperties.bodyFrameInertia() == b.body.massProperties.bodyFrameInertia());
  }
  CHECK(a.body.shape.index() == b.body.shape.index());
  CHECK(a.parent == b.parent);
  CHECK(a.holders == b.holders);
}

template <typename T>
const T& only(const DecodedEnvelope& e)
{
  REQUIRE(e.messages.size() == 1);
  REQUIRE(std::holds_alternative<T>(e.messages[0]));
  return std::get<T>(e.messages[0]);
}

}  // namespace

TEST_CASE("envelope header layout is little-endian")
{
  const auto bytes = encodeEnvelope(0x01020304, {});
  REQUIRE(bytes.size() == 4 + 2 + 4 + 4);
  const unsigned char expected[] = {0x4E, 0x53, 0x43, 0x44, 0x01, 0x00, 0x04, 0x03,
                                    0x02, 0x01, 0x00, 0x00, 0x00, 0x00};
  CHECK(std::memcmp(bytes.data(), expected, sizeof expected) == 0);
  const auto decoded = decodeEnvelope(bytes);
  CHECK(decoded.source == 0x01020304);
  CHECK(decoded.messages.empty());
}

TEST_CASE("message round trips")
{
  SUBCASE("shadow create with a composite")
  {
    const BodyRecord r = compositeRecord();
    const std::vector<Message> in{ShadowCreate{r}};
    const auto out = decodeEnvelope(encodeEnvelope(2, in));
    CHECK(out.source == 2);
    const auto& m = only<ShadowCreate>(out);
    checkSameRecord(m.record, r);
    const auto& s = std::get<CompositeOfSpheres>(m.record.body.shape);
    REQUIRE(s.spheres.size() == 2);
    CHECK(s.spheres[1].offset == Vector3(-0.001, 0, 0.0005));
    CHECK(s.spheres[1].radius == 0.004);
  }
  SUBCASE("migrate with a sphere")
  {
    BodyRecord r = compositeRecord();
    r.body.shape = Sphere{0.25};
    r.body.massProperties = MassProperties::solidSphere(0.25, 1.0);
    r.holders.clear();
    const std::vector<Message> in{Migrate{r}};
    const auto out = decodeEnvelope(encodeEnvelope(0, in));
    const auto& m = only<Migrate>(out);
    checkSameRecord(m.record, r);
    CHECK(std::get<Sphere>(m.record.body.shape).radius == 0.25);
  }
  SUBCASE("infinite-mass half-space")
  {
    BodyRecord r;
    r.body.id = BodyId{99};
    r.body.kind = BodyKind::Global;
    r.body.shape = HalfSpace{Vector3(0, -1, 0), 0.75};
    const std::vector<Message> in{ShadowCreate{r}};
    const auto out = decodeEnvelope(encodeEnvelope(0, in));
    const auto& m = only<ShadowCreate>(out);
    checkSameRecord(m.record, r);
    const auto& h = std::get<HalfSpace>(m.record.body.shape);
    CHECK(h.normal == Vector3(0, -1, 0));
    CHECK(h.offset == 0.75);
  }
  SUBCASE("update, remove, correction and accumulator")
  {
    ShadowUpdate u;
    u.id = BodyId{5};
    u.position = Vector3(1, 2, 3);
    u.orientation = Quaternion(0, 0, 1, 0);
    u.linearVelocity = Vector3(4, 5, 6);
    u.angularVelocity = Vector3(-1, -2, -3);
    u.parent = 8;
    u.holders = {{0, {1, 1, 1}}};
    CorrectionEntry e;
    e.body = BodyId{6};
    e.group = GroupKey{~0ULL, 12345, {-1, 0, 1}};
    e.linear = Vector3(1e-17, -1e17, 0.5);
    e.angular = Vector3(std::numeric_limits<double>::denorm_min(), 0, -0.0);
    const std::vector<Message> in{u, ShadowRemove{BodyId{7}}, CorrectionContribution{e},
                                  AccumulatorBroadcast{BodyId{9}, Vector3(1, 1, 1), Vector3(2, 2, 2)}};
    const auto out = decodeEnvelope(encodeEnvelope(1, in));
    REQUIRE(out.messages.size() == 4);
    const auto& du = std::get<ShadowUpdate>(out.messages[0]);
    CHECK(du.id == u.id);
    CHECK(du.position == u.position);
    CHECK(du.orientation.coeffs() == u.orientation.coeffs());
    CHECK(du.linearVelocity == u.linearVelocity);
    CHECK(du.angularVelocity == u.angularVelocity);
    CHECK(du.parent == 8);
    CHECK(du.holders == u.holders);
    CHECK(std::get<ShadowRemove>(out.messages[1]).id == BodyId{7});
    const auto& de = std::get<CorrectionContribution>(out.messages[2]).entry;
    CHECK(de.body == e.body);
    CHECK(de.group == e.group);
    CHECK(de.linear == e.linear);
    CHECK(de.angular == e.angular);
    CHECK(std::signbit(de.angular.z()));
    const auto& da = std::get<AccumulatorBroadcast>(out.messages[3]);
    CHECK(da.id == BodyId{9});
    CHECK(da.angular == Vector3(2, 2, 2));
  }
}

TEST_CASE("malformed envelopes are rejected")
{
  const std::vector<Message> in{ShadowCreate{compositeRecord()}, ShadowRemove{BodyId{1}}};
  const auto good = encodeEnvelope(0, in);

  SUBCASE("every truncation")
  {
    for (std::size_t n = 0; n < good.size(); ++n)
    {
      CHECK_THROWS_AS(decodeEnvelope(std::span(good).first(n)), WireError);
    }
  }
  SUBCASE("trailing bytes")
  {
    auto bad = good;
    bad.push_back(std::byte{0});
    CHECK_THROWS_AS(decodeEnvelope(bad), WireError);
  }
  SUBCASE("bad magic")
  {
    auto bad = good;
    bad[0] = std::byte{0};
    CHECK_THROWS_AS(decodeEnvelope(bad), WireError);
  }
  SUBCASE("unknown version")
  {
    auto bad = good;
    bad[4] = std::byte{2};
    CHECK_THROWS_AS(decodeEnvelope(bad), WireError);
  }
  SUBCASE("unknown kind")
  {
    auto bad = good;
    bad[14] = std::byte{42};
    CHECK_THROWS_AS(decodeEnvelope(bad), WireError);
  }
}
