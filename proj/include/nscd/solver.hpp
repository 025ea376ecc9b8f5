#pragma once

#include "nscd/collision.hpp"
#include "nscd/dynamics.hpp"

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace nscd
{

/// How a sweep reads neighbouring reactions.
enum class SweepMode : std::uint8_t
{
  /// Contacts of the same rank see each other's updates within a sweep;
  /// remote contributions are frozen until the next reduction.
  SubdomainGaussSeidel,
  /// Every contact is its own subdomain (non-linear block Jacobi).
  PerContactJacobi,
};

struct SolverConfig
{
  double relaxation = 0.75;
  int iterations = 10;
  /// Scales the xi/dt term for penetrating contacts only.
  double errorReduction = 0.8;
  /// Tangential speed (m/s) above which the residual treats a contact as sliding.
  double slipThreshold = 1e-9;
  bool warmStart = false;
  SweepMode mode = SweepMode::SubdomainGaussSeidel;
};

/// Per instantiated body: accumulated post-step velocities v'(lambda^k) and
/// the rank-local corrections collected during the current sweep.
struct BodyState
{
  BodyId id{};
  double inverseMass = 0.0;
  Matrix3 inverseInertia = Matrix3::Zero();  // world frame
  Vector3 accLinear = Vector3::Zero();
  Vector3 accAngular = Vector3::Zero();
  Vector3 corrLinear = Vector3::Zero();
  Vector3 corrAngular = Vector3::Zero();
};

struct ContactRow
{
  Contact contact;
  std::size_t body1 = 0;  // indices into the BodyState table
  std::size_t body2 = 0;
  Vector3 lever1 = Vector3::Zero();  // contact point minus body1 instance position
  Vector3 lever2 = Vector3::Zero();
  Matrix3 frame = Matrix3::Identity();  // columns n, t, o
  Matrix3 delassus = Matrix3::Zero();
  double normalBias = 0.0;              // (beta) xi / dt
  Vector3 reaction = Vector3::Zero();   // impulse (N s) in the contact frame
  Vector3 reactionAtSweepStart = Vector3::Zero();
  bool converged = true;
};

struct SolverState
{
  std::vector<BodyState> bodies;
  std::vector<ContactRow> contacts;
};

class SingularDelassusError : public std::domain_error
{
 public:
  using std::domain_error::domain_error;
};

Matrix3 contactFrameMatrix(const Contact& c);

/// Contact-frame response of the relative contact velocity to the contact's
/// own impulse. Throws SingularDelassusError when both bodies are fixtures.
Matrix3 delassusDiagonalBlock(const Contact& c, const BodyState& body1, const Vector3& lever1,
                              const BodyState& body2, const Vector3& lever2);

/// Builds a row with frame, Delassus block and bias for the given instances.
ContactRow makeContactRow(const Contact& c, std::span<const BodyState> bodies, std::size_t body1,
                          const Vector3& position1, std::size_t body2, const Vector3& position2,
                          double dt, double errorReduction);

/// Relative contact velocity (contact frame) of body1 with respect to body2,
/// from the accumulators, optionally with this rank's corrections folded in.
Vector3 relativeContactVelocity(const ContactRow& row, std::span<const BodyState> bodies,
                                bool withCorrections = false);

enum class ContactRegime : std::uint8_t
{
  Open,
  Sticking,
  Sliding,
};

struct OneContactResult
{
  Vector3 reaction = Vector3::Zero();
  ContactRegime regime = ContactRegime::Open;
  bool converged = true;
};

/// Solves lambda in K_mu with u = D lambda + b satisfying Signorini and Coulomb
/// conditions for one contact. b already carries the normal bias.
OneContactResult solveOneContact(const Matrix3& delassus, const Vector3& b, double mu);

/// Linear and angular velocity changes of both bodies for a contact-frame
/// impulse change (body1 gets +, body2 gets -).
struct ImpulseResponse
{
  Vector3 linear1, angular1, linear2, angular2;
};
ImpulseResponse impulseResponse(const ContactRow& row, std::span<const BodyState> bodies,
                                const Vector3& deltaReaction);

/// One relaxation: solve, blend with the relaxation factor, store in place and
/// add the velocity change into the corrections of both bodies.
void relaxContact(ContactRow& row, std::span<BodyState> bodies, const SolverConfig& cfg);

/// Relaxes every row once in the given order.
void sweep(SolverState& state, const SolverConfig& cfg);

/// Reduction group of a correction contribution: the sweeping rank, or the
/// contact itself in per-contact Jacobi mode.
struct GroupKey
{
  std::uint64_t major = 0;
  std::uint64_t minor = 0;
  ImageShift shift{0, 0, 0};

  auto operator<=>(const GroupKey&) const = default;
  bool operator==(const GroupKey&) const = default;
};

struct CorrectionEntry
{
  BodyId body{};
  GroupKey group;
  Vector3 linear = Vector3::Zero();
  Vector3 angular = Vector3::Zero();
};

/// Correction contributions of the last sweep. Gauss-Seidel mode yields one
/// entry per touched body keyed by `rank`; Jacobi mode one entry per contact
/// and body keyed by the contact id. Entries are ordered by (body, group).
std::vector<CorrectionEntry> collectCorrections(const SolverState& state, const SolverConfig& cfg,
                                                RankId rank);

/// Adds entries (sorted by group) onto the accumulator of one body.
void applyCorrections(BodyState& body, std::span<const CorrectionEntry> entries);

/// Resets corrections and records the reactions at the start of a sweep.
void beginSweep(SolverState& state);

/// Single-rank reduction: folds corrections into accumulators in group order.
void reduceLocally(SolverState& state, const SolverConfig& cfg);

struct ContactResidual
{
  double negativeNormal = 0.0;    // max(0, -lambda_n)
  double penetration = 0.0;       // max(0, -u_n)
  double complementarity = 0.0;   // |lambda_n u_n|
  double coneViolation = 0.0;     // max(0, |lambda_to| - mu lambda_n)
  double slidingMisalignment = 0.0;  // angle(lambda_to, -u_to) on the cone boundary (rad)
  double frictionDeficit = 0.0;   // mu lambda_n - |lambda_to| while slipping
};

struct ResidualReport
{
  ContactResidual max;
  std::vector<ContactResidual> perContact;

  void merge(const ResidualReport& other);
};

/// Evaluated with the accumulators only; call after a reduction.
ResidualReport residual(const SolverState& state, const SolverConfig& cfg);

}  // namespace nscd
