#include "nscd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>

namespace nscd
{

Matrix3 contactFrameMatrix(const Contact& c)
{
  Matrix3 f;
  f.col(0) = c.normal;
  f.col(1) = c.tangent;
  f.col(2) = c.bitangent;
  return f;
}

namespace
{

// Relative shortfall of |lambda_t| below mu lambda_n still counted as on the cone.
constexpr double kConeBoundaryTolerance = 1e-6;

Matrix3 pointResponse(const BodyState& body, const Vector3& lever)
{
  const Matrix3 rx = crossMatrix(lever);
  return body.inverseMass * Matrix3::Identity() - rx * body.inverseInertia * rx;
}

Vector3 projectOntoCone(const Vector3& l, double mu)
{
  const double tn = std::hypot(l(1), l(2));
  if (tn <= mu * l(0))
  {
    return l;
  }
  if (mu * tn <= -l(0))
  {
    return Vector3::Zero();
  }
  const double n = (l(0) + mu * tn) / (1.0 + mu * mu);
  const double scale = mu * n / tn;
  return Vector3(n, l(1) * scale, l(2) * scale);
}

}  // namespace

Matrix3 delassusDiagonalBlock(const Contact& c, const BodyState& body1, const Vector3& lever1,
                              const BodyState& body2, const Vector3& lever2)
{
  if (body1.inverseMass == 0.0 && body2.inverseMass == 0.0)
  {
    throw SingularDelassusError("contact between two bodies of infinite inertia");
  }
  const Matrix3 k = pointResponse(body1, lever1) + pointResponse(body2, lever2);
  const Matrix3 f = contactFrameMatrix(c);
  Matrix3 d = f.transpose() * k * f;
  return 0.5 * (d + d.transpose());
}

ContactRow makeContactRow(const Contact& c, std::span<const BodyState> bodies, std::size_t body1,
                          const Vector3& position1, std::size_t body2, const Vector3& position2,
                          double dt, double errorReduction)
{
  ContactRow row;
  row.contact = c;
  row.body1 = body1;
  row.body2 = body2;
  row.lever1 = c.point - position1;
  row.lever2 = c.point - position2;
  row.frame = contactFrameMatrix(c);
  row.delassus = delassusDiagonalBlock(c, bodies[body1], row.lever1, bodies[body2], row.lever2);
  const double xi = c.signedDistance;
  row.normalBias = (xi < 0.0 ? errorReduction * xi : xi) / dt;
  return row;
}

Vector3 relativeContactVelocity(const ContactRow& row, std::span<const BodyState> bodies,
                                bool withCorrections)
{
  const BodyState& a = bodies[row.body1];
  const BodyState& b = bodies[row.body2];
  Vector3 va = a.accLinear, wa = a.accAngular, vb = b.accLinear, wb = b.accAngular;
  if (withCorrections)
  {
    va += a.corrLinear;
    wa += a.corrAngular;
    vb += b.corrLinear;
    wb += b.corrAngular;
  }
  const Vector3 u = (va + wa.cross(row.lever1)) - (vb + wb.cross(row.lever2));
  return row.frame.transpose() * u;
}

namespace
{

struct SlideProbe
{
  double normal = 0.0;  // lambda_n, NaN when the normal equation is not solvable
  Eigen::Vector2d direction;
  Eigen::Vector2d tangentialVelocity;

  double cross() const
  {
    return direction.x() * tangentialVelocity.y() - direction.y() * tangentialVelocity.x();
  }
  double along() const { return direction.dot(tangentialVelocity); }
};

// Sliding along direction d: lambda = lambda_n (1, -mu d) with u_n = 0.
SlideProbe probeSlide(const Matrix3& d, const Vector3& b, double mu, double theta)
{
  SlideProbe p;
  p.direction = Eigen::Vector2d(std::cos(theta), std::sin(theta));
  const Vector3 unit(1.0, -mu * p.direction.x(), -mu * p.direction.y());
  const double denom = d.row(0).dot(unit);
  if (!(denom > 0.0))
  {
    p.normal = std::numeric_limits<double>::quiet_NaN();
    return p;
  }
  p.normal = -b(0) / denom;
  const Vector3 u = d * (p.normal * unit) + b;
  p.tangentialVelocity = Eigen::Vector2d(u(1), u(2));
  return p;
}

double angularDistance(double a, double b)
{
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return std::min(d, 2.0 * std::numbers::pi - d);
}

}  // namespace

OneContactResult solveOneContact(const Matrix3& delassus, const Vector3& b, double mu)
{
  OneContactResult out;
  if (b(0) >= 0.0)
  {
    return out;
  }
  if (mu == 0.0)
  {
    out.reaction = Vector3(-b(0) / delassus(0, 0), 0.0, 0.0);
    out.regime = ContactRegime::Sliding;
    return out;
  }

  const Vector3 stick = delassus.ldlt().solve(-b);
  const double stickTangential = std::hypot(stick(1), stick(2));
  if (stick(0) >= 0.0 && stickTangential <= mu * stick(0))
  {
    out.reaction = stick;
    out.regime = ContactRegime::Sticking;
    return out;
  }

  // Sliding: find the direction d with u_to parallel to d (u_to . d >= 0)
  // by bracketing sign changes of d x u_to over the circle.
  constexpr int kSamples = 64;
  const double guess = stickTangential > 0.0 ? std::atan2(-stick(2), -stick(1))
                                             : std::atan2(b(2), b(1));
  double bestTheta = 0.0;
  double bestDistance = std::numeric_limits<double>::infinity();
  bool found = false;
  {
    const SlideProbe p = probeSlide(delassus, b, mu, guess);
    if (std::isfinite(p.normal) && p.normal >= 0.0 && p.along() >= 0.0 &&
        std::abs(p.cross()) <= 1e-14 * p.tangentialVelocity.norm())
    {
      bestTheta = guess;
      bestDistance = 0.0;
      found = true;
    }
  }
  const double step = 2.0 * std::numbers::pi / kSamples;
  // The guess sits mid-bracket so a root at the guess cannot straddle a sample.
  const double start = guess - 0.5 * step;
  SlideProbe prev = probeSlide(delassus, b, mu, start);
  for (int k = 1; k <= kSamples && bestDistance > 0.0; ++k)
  {
    const double lo = start + (k - 1) * step;
    const double hi = start + k * step;
    const SlideProbe next = probeSlide(delassus, b, mu, hi);
    const bool valid = std::isfinite(prev.normal) && std::isfinite(next.normal);
    if (valid && (prev.cross() == 0.0 || (prev.cross() < 0.0) != (next.cross() < 0.0)))
    {
      double a = lo, c = hi;
      SlideProbe pa = prev;
      if (pa.cross() != 0.0)
      {
        for (int it = 0; it < 200 && c - a > 1e-16 * std::max(1.0, std::abs(a)); ++it)
        {
          const double m = 0.5 * (a + c);
          const SlideProbe pm = probeSlide(delassus, b, mu, m);
          if (!std::isfinite(pm.normal))
          {
            break;
          }
          if ((pm.cross() < 0.0) == (pa.cross() < 0.0))
          {
            a = m;
            pa = pm;
          }
          else
          {
            c = m;
          }
        }
      }
      const double root = pa.cross() == 0.0 ? a : 0.5 * (a + c);
      const SlideProbe pr = probeSlide(delassus, b, mu, root);
      if (std::isfinite(pr.normal) && pr.normal >= 0.0 && pr.along() >= 0.0)
      {
        const double dist = angularDistance(root, guess);
        if (dist < bestDistance)
        {
          bestDistance = dist;
          bestTheta = root;
          found = true;
        }
      }
    }
    prev = next;
  }

  if (found)
  {
    const SlideProbe p = probeSlide(delassus, b, mu, bestTheta);
    out.reaction =
        Vector3(p.normal, -mu * p.normal * p.direction.x(), -mu * p.normal * p.direction.y());
    out.regime = ContactRegime::Sliding;
    return out;
  }

  out.reaction = projectOntoCone(stick, mu);
  out.regime = ContactRegime::Sliding;
  out.converged = false;
  return out;
}

ImpulseResponse impulseResponse(const ContactRow& row, std::span<const BodyState> bodies,
                                const Vector3& deltaReaction)
{
  const BodyState& a = bodies[row.body1];
  const BodyState& b = bodies[row.body2];
  const Vector3 p = row.frame * deltaReaction;
  ImpulseResponse r;
  r.linear1 = a.inverseMass * p;
  r.angular1 = a.inverseInertia * row.lever1.cross(p);
  r.linear2 = -(b.inverseMass * p);
  r.angular2 = -(b.inverseInertia * row.lever2.cross(p));
  return r;
}

void relaxContact(ContactRow& row, std::span<BodyState> bodies, const SolverConfig& cfg)
{
  const bool gaussSeidel = cfg.mode == SweepMode::SubdomainGaussSeidel;
  Vector3 b = relativeContactVelocity(row, bodies, gaussSeidel) - row.delassus * row.reaction;
  b(0) += row.normalBias;
  const double mu = row.contact.frictionCoefficient;
  const OneContactResult solved = solveOneContact(row.delassus, b, mu);
  row.converged = solved.converged;
  const double w = cfg.relaxation;
  const Vector3 next = projectOntoCone(w * solved.reaction + (1.0 - w) * row.reaction, mu);
  const Vector3 delta = next - row.reaction;
  row.reaction = next;
  if (delta.isZero(0.0))
  {
    return;
  }
  const ImpulseResponse r = impulseResponse(row, bodies, delta);
  BodyState& a = bodies[row.body1];
  BodyState& c = bodies[row.body2];
  a.corrLinear += r.linear1;
  a.corrAngular += r.angular1;
  c.corrLinear += r.linear2;
  c.corrAngular += r.angular2;
}

void sweep(SolverState& state, const SolverConfig& cfg)
{
  for (auto& row : state.contacts)
  {
    relaxContact(row, state.bodies, cfg);
  }
}

void beginSweep(SolverState& state)
{
  for (auto& b : state.bodies)
  {
    b.corrLinear.setZero();
    b.corrAngular.setZero();
  }
  for (auto& row : state.contacts)
  {
    row.reactionAtSweepStart = row.reaction;
  }
}

std::vector<CorrectionEntry> collectCorrections(const SolverState& state, const SolverConfig& cfg,
                                                RankId rank)
{
  std::vector<CorrectionEntry> out;
  if (cfg.mode == SweepMode::SubdomainGaussSeidel)
  {
    std::vector<char> touched(state.bodies.size(), 0);
    for (const auto& row : state.contacts)
    {
      touched[row.body1] = 1;
      touched[row.body2] = 1;
    }
    for (std::size_t i = 0; i < state.bodies.size(); ++i)
    {
      const BodyState& b = state.bodies[i];
      if (touched[i] && b.inverseMass != 0.0)
      {
        out.push_back({b.id, GroupKey{static_cast<std::uint64_t>(rank), 0, {0, 0, 0}},
                       b.corrLinear, b.corrAngular});
      }
    }
  }
  else
  {
    for (const auto& row : state.contacts)
    {
      const ImpulseResponse r =
          impulseResponse(row, state.bodies, row.reaction - row.reactionAtSweepStart);
      const GroupKey key{row.contact.id.first, row.contact.id.second, row.contact.id.shift};
      if (state.bodies[row.body1].inverseMass != 0.0)
      {
        out.push_back({state.bodies[row.body1].id, key, r.linear1, r.angular1});
      }
      if (state.bodies[row.body2].inverseMass != 0.0)
      {
        out.push_back({state.bodies[row.body2].id, key, r.linear2, r.angular2});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const CorrectionEntry& x, const CorrectionEntry& y) {
    return std::tie(x.body, x.group) < std::tie(y.body, y.group);
  });
  return out;
}

void applyCorrections(BodyState& body, std::span<const CorrectionEntry> entries)
{
  for (const auto& e : entries)
  {
    body.accLinear += e.linear;
    body.accAngular += e.angular;
  }
}

void reduceLocally(SolverState& state, const SolverConfig& cfg)
{
  const auto entries = collectCorrections(state, cfg, 0);
  std::size_t k = 0;
  // Body ids are unique within a rank; map them through a sorted index.
  std::vector<std::size_t> order(state.bodies.size());
  for (std::size_t i = 0; i < order.size(); ++i)
  {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return state.bodies[a].id < state.bodies[b].id;
  });
  for (std::size_t idx : order)
  {
    BodyState& body = state.bodies[idx];
    while (k < entries.size() && entries[k].body < body.id)
    {
      ++k;
    }
    std::size_t end = k;
    while (end < entries.size() && entries[end].body == body.id)
    {
      ++end;
    }
    applyCorrections(body, std::span(entries).subspan(k, end - k));
    k = end;
  }
  for (auto& b : state.bodies)
  {
    b.corrLinear.setZero();
    b.corrAngular.setZero();
  }
}

void ResidualReport::merge(const ResidualReport& other)
{
  max.negativeNormal = std::max(max.negativeNormal, other.max.negativeNormal);
  max.penetration = std::max(max.penetration, other.max.penetration);
  max.complementarity = std::max(max.complementarity, other.max.complementarity);
  max.coneViolation = std::max(max.coneViolation, other.max.coneViolation);
  max.slidingMisalignment = std::max(max.slidingMisalignment, other.max.slidingMisalignment);
  max.frictionDeficit = std::max(max.frictionDeficit, other.max.frictionDeficit);
  perContact.insert(perContact.end(), other.perContact.begin(), other.perContact.end());
}

ResidualReport residual(const SolverState& state, const SolverConfig& cfg)
{
  ResidualReport report;
  report.perContact.reserve(state.contacts.size());
  for (const auto& row : state.contacts)
  {
    Vector3 u = relativeContactVelocity(row, state.bodies, false);
    u(0) += row.normalBias;
    const Vector3& l = row.reaction;
    const double mu = row.contact.frictionCoefficient;
    const double lt = std::hypot(l(1), l(2));
    const double ut = std::hypot(u(1), u(2));
    ContactResidual r;
    r.negativeNormal = std::max(0.0, -l(0));
    r.penetration = std::max(0.0, -u(0));
    r.complementarity = std::abs(l(0) * u(0));
    r.coneViolation = std::max(0.0, lt - mu * l(0));
    if (ut > cfg.slipThreshold && l(0) > 0.0 && mu > 0.0)
    {
      // Slip inside the cone is a stick residual (deficit); direction is
      // judged only for reactions on the cone boundary.
      r.frictionDeficit = std::max(0.0, mu * l(0) - lt);
      if (lt >= (1.0 - kConeBoundaryTolerance) * mu * l(0))
      {
        const double c = -(l(1) * u(1) + l(2) * u(2)) / (lt * ut);
        const double s = (l(1) * u(2) - l(2) * u(1)) / (lt * ut);
        r.slidingMisalignment = std::abs(std::atan2(s, c));
      }
    }
    report.max.negativeNormal = std::max(report.max.negativeNormal, r.negativeNormal);
    report.max.penetration = std::max(report.max.penetration, r.penetration);
    report.max.complementarity = std::max(report.max.complementarity, r.complementarity);
    report.max.coneViolation = std::max(report.max.coneViolation, r.coneViolation);
    report.max.slidingMisalignment = std::max(report.max.slidingMisalignment, r.slidingMisalignment);
    report.max.frictionDeficit = std::max(report.max.frictionDeficit, r.frictionDeficit);
    report.perContact.push_back(r);
  }
  return report;
}

}  // namespace nscd
