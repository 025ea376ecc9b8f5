#pragma once

#include "nscd/dynamics.hpp"

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace nscd
{

struct Envelope
{
  RankId source = 0;
  RankId destination = 0;
  std::vector<std::byte> payload;
};

struct TrafficStats
{
  std::uint64_t envelopes = 0;
  std::uint64_t bytes = 0;
  std::uint64_t exchanges = 0;
  std::uint64_t allReduces = 0;
};

/// Bulk-synchronous rank transport. `run` executes one callable per rank; inside
/// it, `exchange` and `allReduceSum` are collectives every rank must enter the
/// same number of times in the same order.
class Transport
{
 public:
  using Topology = std::function<bool(RankId from, RankId to)>;

  virtual ~Transport() = default;

  virtual int size() const noexcept = 0;
  virtual std::string_view name() const noexcept = 0;

  /// Runs `body(rank)` for every rank and returns when all have finished. The
  /// first exception raised by any rank aborts the others and is rethrown.
  virtual void run(const std::function<void(RankId)>& body) = 0;

  /// Buffers an envelope for the next exchange. Throws ProtocolViolation if the
  /// destination is not permitted by the topology.
  void send(RankId self, Envelope envelope);

  /// Delivers all buffered envelopes. Returns those addressed to `self`,
  /// ordered by source with per-sender order preserved.
  std::vector<Envelope> exchange(RankId self);

  /// Element-wise sum over ranks, accumulated in ascending rank order.
  std::vector<double> allReduceSum(RankId self, std::span<const double> values);

  /// Restricts traffic, e.g. to nearest neighbours. Unset means unrestricted.
  void setTopology(Topology topology) { topology_ = std::move(topology); }

  TrafficStats stats() const;
  void resetStats();

 protected:
  explicit Transport(int ranks);

  /// Collective rendezvous. The last rank to arrive runs `complete` under the
  /// lock; every rank then resumes.
  virtual void collective(RankId self, const std::function<void()>& complete) = 0;

  /// Shared rank-launch helper for the threaded backends.
  void launch(const std::function<void(RankId)>& body,
              const std::function<void(RankId)>& onStart,
              const std::function<void(RankId)>& onFinish);

  /// Records the first error and wakes every waiting rank. Caller holds the lock.
  void abortLocked(std::exception_ptr error);

  int ranks_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  bool aborted_ = false;

 private:
  Topology topology_;
  std::vector<std::vector<Envelope>> outbox_;   // per source
  std::vector<std::vector<Envelope>> inbox_;    // per destination
  std::vector<std::vector<double>> reduceIn_;   // per source
  std::vector<double> reduceOut_;
  TrafficStats stats_;
  std::exception_ptr error_;
};

/// Thrown out of collectives on ranks that did not cause an abort.
class TransportAborted : public std::runtime_error
{
 public:
  TransportAborted() : std::runtime_error("transport aborted by another rank") {}
};

/// Ranks run one at a time in a fixed round-robin order, passing a baton at
/// every collective. Deterministic scheduling; used as the reference backend.
class SequentialTransport final : public Transport
{
 public:
  explicit SequentialTransport(int ranks);

  int size() const noexcept override { return ranks_; }
  std::string_view name() const noexcept override { return "sequential"; }
  void run(const std::function<void(RankId)>& body) override;

 protected:
  void collective(RankId self, const std::function<void()>& complete) override;

 private:
  void waitForBaton(std::unique_lock<std::mutex>& lock, RankId self);
  void passBaton();

  int baton_ = 0;
  std::vector<bool> done_;
  int arrived_ = 0;
};

/// One thread per rank, all running concurrently between collectives.
class ConcurrentTransport final : public Transport
{
 public:
  explicit ConcurrentTransport(int ranks);

  int size() const noexcept override { return ranks_; }
  std::string_view name() const noexcept override { return "concurrent"; }
  void run(const std::function<void(RankId)>& body) override;

 protected:
  void collective(RankId self, const std::function<void()>& complete) override;

 private:
  int arrived_ = 0;
  int finished_ = 0;
  std::uint64_t generation_ = 0;
};

enum class TransportKind : std::uint8_t
{
  Sequential,
  Concurrent,
};

std::unique_ptr<Transport> makeTransport(TransportKind kind, int ranks);

}  // namespace nscd
