#include "nscd/transport.hpp"

#include "nscd/registry.hpp"

#include <string>
#include <thread>
#include <utility>

namespace nscd
{

Transport::Transport(int ranks)
    : ranks_(ranks), outbox_(ranks), inbox_(ranks), reduceIn_(ranks)
{
  if (ranks < 1)
  {
    throw std::invalid_argument("transport needs at least one rank");
  }
}

void Transport::send(RankId self, Envelope envelope)
{
  if (envelope.destination < 0 || envelope.destination >= ranks_ ||
      envelope.destination == self || (topology_ && !topology_(self, envelope.destination)))
  {
    throw ProtocolViolation("rank " + std::to_string(self) + " may not send to rank " +
                            std::to_string(envelope.destination));
  }
  envelope.source = self;
  // Each rank only touches its own outbox between collectives.
  outbox_[self].push_back(std::move(envelope));
}

std::vector<Envelope> Transport::exchange(RankId self)
{
  collective(self, [this] {
    for (int src = 0; src < ranks_; ++src)
    {
      for (auto& e : outbox_[src])
      {
        ++stats_.envelopes;
        stats_.bytes += e.payload.size();
        inbox_[e.destination].push_back(std::move(e));
      }
      outbox_[src].clear();
    }
    ++stats_.exchanges;
  });
  return std::exchange(inbox_[self], {});
}

std::vector<double> Transport::allReduceSum(RankId self, std::span<const double> values)
{
  reduceIn_[self].assign(values.begin(), values.end());
  collective(self, [this] {
    const std::size_t n = reduceIn_[0].size();
    reduceOut_.assign(n, 0.0);
    for (int r = 0; r < ranks_; ++r)
    {
      if (reduceIn_[r].size() != n)
      {
        throw ProtocolViolation("all-reduce called with mismatched vector sizes");
      }
      for (std::size_t k = 0; k < n; ++k)
      {
        reduceOut_[k] += reduceIn_[r][k];
      }
    }
    ++stats_.allReduces;
  });
  return reduceOut_;
}

TrafficStats Transport::stats() const
{
  std::lock_guard lock(mutex_);
  return stats_;
}

void Transport::resetStats()
{
  std::lock_guard lock(mutex_);
  stats_ = {};
}

void Transport::abortLocked(std::exception_ptr error)
{
  if (!error_)
  {
    error_ = std::move(error);
  }
  aborted_ = true;
  cv_.notify_all();
}

void Transport::launch(const std::function<void(RankId)>& body,
                       const std::function<void(RankId)>& onStart,
                       const std::function<void(RankId)>& onFinish)
{
  {
    std::lock_guard lock(mutex_);
    aborted_ = false;
    error_ = nullptr;
    for (auto& o : outbox_)
    {
      o.clear();
    }
    for (auto& i : inbox_)
    {
      i.clear();
    }
  }
  {
    std::vector<std::jthread> threads;
    threads.reserve(ranks_);
    for (RankId r = 0; r < ranks_; ++r)
    {
      threads.emplace_back([&, r] {
        try
        {
          onStart(r);
          body(r);
          onFinish(r);
        }
        catch (const TransportAborted&)
        {
        }
        catch (...)
        {
          std::lock_guard lock(mutex_);
          abortLocked(std::current_exception());
        }
      });
    }
  }
  if (error_)
  {
    std::rethrow_exception(error_);
  }
}

SequentialTransport::SequentialTransport(int ranks) : Transport(ranks), done_(ranks, false) {}

void SequentialTransport::waitForBaton(std::unique_lock<std::mutex>& lock, RankId self)
{
  cv_.wait(lock, [&] { return baton_ == self || aborted_; });
  if (aborted_)
  {
    throw TransportAborted();
  }
}

void SequentialTransport::passBaton()
{
  int next = -1;
  for (int k = 1; k <= ranks_; ++k)
  {
    const int r = (baton_ + k) % ranks_;
    if (!done_[r])
    {
      next = r;
      break;
    }
  }
  baton_ = next;
  cv_.notify_all();
}

void SequentialTransport::run(const std::function<void(RankId)>& body)
{
  baton_ = 0;
  arrived_ = 0;
  done_.assign(ranks_, false);
  launch(
      body,
      [this](RankId self) {
        std::unique_lock lock(mutex_);
        waitForBaton(lock, self);
      },
      [this](RankId self) {
        std::unique_lock lock(mutex_);
        if (arrived_ != 0)
        {
          throw ProtocolViolation("rank " + std::to_string(self) +
                                  " finished while a collective was pending");
        }
        done_[self] = true;
        passBaton();
      });
}

void SequentialTransport::collective(RankId self, const std::function<void()>& complete)
{
  std::unique_lock lock(mutex_);
  if (aborted_)
  {
    throw TransportAborted();
  }
  for (int r = 0; r < ranks_; ++r)
  {
    if (done_[r])
    {
      abortLocked(std::make_exception_ptr(
          ProtocolViolation("collective entered after rank " + std::to_string(r) + " finished")));
      throw TransportAborted();
    }
  }
  if (++arrived_ == ranks_)
  {
    arrived_ = 0;
    try
    {
      complete();
    }
    catch (...)
    {
      abortLocked(std::current_exception());
      throw TransportAborted();
    }
  }
  passBaton();
  waitForBaton(lock, self);
}

ConcurrentTransport::ConcurrentTransport(int ranks) : Transport(ranks) {}

void ConcurrentTransport::run(const std::function<void(RankId)>& body)
{
  arrived_ = 0;
  finished_ = 0;
  launch(body, [](RankId) {},
         [this](RankId self) {
           std::lock_guard lock(mutex_);
           ++finished_;
           if (arrived_ != 0)
           {
             abortLocked(std::make_exception_ptr(ProtocolViolation(
                 "rank " + std::to_string(self) + " finished while a collective was pending")));
           }
         });
}

void ConcurrentTransport::collective(RankId, const std::function<void()>& complete)
{
  std::unique_lock lock(mutex_);
  if (aborted_)
  {
    throw TransportAborted();
  }
  if (finished_ != 0)
  {
    abortLocked(std::make_exception_ptr(
        ProtocolViolation("collective entered after a rank finished")));
    throw TransportAborted();
  }
  const std::uint64_t generation = generation_;
  if (++arrived_ == ranks_)
  {
    arrived_ = 0;
    try
    {
      complete();
    }
    catch (...)
    {
      abortLocked(std::current_exception());
      throw TransportAborted();
    }
    ++generation_;
    cv_.notify_all();
  }
  else
  {
    cv_.wait(lock, [&] { return generation_ != generation || aborted_; });
  }
  if (aborted_)
  {
    throw TransportAborted();
  }
}

std::unique_ptr<Transport> makeTransport(TransportKind kind, int ranks)
{
  if (kind == TransportKind::Sequential)
  {
    return std::make_unique<SequentialTransport>(ranks);
  }
  return std::make_unique<ConcurrentTransport>(ranks);
}

}  // namespace nscd
