// Job-assignment strategies behind a single interface consumed by the
// engine.  A strategy decides the initial assignment set, reacts to every
// receipt with zero or more new assignments, and reports the per-update
// stepsize scale (1/b for the waiting/mini-batch variants, which apply a
// buffered round as b sub-updates of size gamma/b).
//
// Spec-string grammar:
//   pure | pure-wait:b=B | random | random-wait:b=B |
//   shuffled:mode=cycle|once | minibatch:b=B | rr:mode=epoch|once
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "asgrad/errors.hpp"
#include "asgrad/rng.hpp"

namespace asgrad {

struct Job {
  int worker = 0;
  std::int64_t model_index = 0;
  std::uint64_t job_id = 0;
};

struct Assignment {
  int worker = 0;
  std::int64_t model_index = 0;
};

enum class StrategyKind {
  kPure,
  kPureWaiting,
  kRandom,
  kRandomWaiting,
  kShuffled,
  kMinibatch,
  kReshuffling,
};

enum class ShuffleMode { kEveryCycle, kOnce };
enum class ReshuffleMode { kEveryEpoch, kOnce };

struct StrategySpec {
  StrategyKind kind = StrategyKind::kPure;
  int b = 1;
  ShuffleMode shuffle_mode = ShuffleMode::kEveryCycle;
  ReshuffleMode reshuffle_mode = ReshuffleMode::kEveryEpoch;

  bool has_waiting_param() const {
    return kind == StrategyKind::kPureWaiting || kind == StrategyKind::kRandomWaiting ||
           kind == StrategyKind::kMinibatch;
  }
  // The single-node reductions treat each data point as a client and run one
  // round sequentially.
  bool is_reduction() const {
    return kind == StrategyKind::kMinibatch || kind == StrategyKind::kReshuffling;
  }
};

inline StrategySpec parse_strategy_spec(const std::string& text) {
  StrategySpec spec;
  std::string head = text, args;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    head = text.substr(0, colon);
    args = text.substr(colon + 1);
  }
  auto want_b = [&](StrategyKind kind) {
    spec.kind = kind;
    if (args.rfind("b=", 0) != 0) throw ConfigError("strategy '" + text + "': expected b=<int>");
    try {
      spec.b = std::stoi(args.substr(2));
    } catch (const std::exception&) {
      throw ConfigError("strategy '" + text + "': bad b");
    }
    if (spec.b < 1) throw ConfigError("strategy '" + text + "': b must be >= 1");
  };
  if (head == "pure" && args.empty()) {
    spec.kind = StrategyKind::kPure;
  } else if (head == "pure-wait") {
    want_b(StrategyKind::kPureWaiting);
  } else if (head == "random" && args.empty()) {
    spec.kind = StrategyKind::kRandom;
  } else if (head == "random-wait") {
    want_b(StrategyKind::kRandomWaiting);
  } else if (head == "shuffled") {
    spec.kind = StrategyKind::kShuffled;
    if (args == "mode=cycle" || args.empty()) {
      spec.shuffle_mode = ShuffleMode::kEveryCycle;
    } else if (args == "mode=once") {
      spec.shuffle_mode = ShuffleMode::kOnce;
    } else {
      throw ConfigError("strategy '" + text + "': expected mode=cycle|once");
    }
  } else if (head == "minibatch") {
    want_b(StrategyKind::kMinibatch);
  } else if (head == "rr") {
    spec.kind = StrategyKind::kReshuffling;
    if (args == "mode=epoch" || args.empty()) {
      spec.reshuffle_mode = ReshuffleMode::kEveryEpoch;
    } else if (args == "mode=once") {
      spec.reshuffle_mode = ReshuffleMode::kOnce;
    } else {
      throw ConfigError("strategy '" + text + "': expected mode=epoch|once");
    }
  } else {
    throw ConfigError("unknown strategy '" + text + "'");
  }
  return spec;
}

inline std::string to_string(const StrategySpec& spec) {
  switch (spec.kind) {
    case StrategyKind::kPure: return "pure";
    case StrategyKind::kPureWaiting: return "pure-wait:b=" + std::to_string(spec.b);
    case StrategyKind::kRandom: return "random";
    case StrategyKind::kRandomWaiting: return "random-wait:b=" + std::to_string(spec.b);
    case StrategyKind::kShuffled:
      return spec.shuffle_mode == ShuffleMode::kEveryCycle ? "shuffled:mode=cycle"
                                                           : "shuffled:mode=once";
    case StrategyKind::kMinibatch: return "minibatch:b=" + std::to_string(spec.b);
    case StrategyKind::kReshuffling:
      return spec.reshuffle_mode == ReshuffleMode::kEveryEpoch ? "rr:mode=epoch" : "rr:mode=once";
  }
  return "?";
}

class Strategy {
 public:
  virtual ~Strategy() = default;

  // Called once before the run; model index of every initial job must be 0.
  virtual std::vector<Assignment> initial_assignments(RandomStream& rng) = 0;

  // Called exactly once per receipt, in receipt order; t is the iteration of
  // the receipt and every returned model index must be <= t + 1.
  virtual std::vector<Assignment> on_receive(const Job& completed, std::int64_t t,
                                             RandomStream& rng) = 0;

  // gamma_eff = gamma * update_scale().
  virtual double update_scale() const { return 1.0; }
};

namespace detail {

inline std::vector<Assignment> all_workers_at_zero(int n) {
  std::vector<Assignment> init(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) init[static_cast<std::size_t>(i)] = {i, 0};
  return init;
}

class PureStrategy final : public Strategy {
 public:
  explicit PureStrategy(int n) : n_(n) {}
  std::vector<Assignment> initial_assignments(RandomStream&) override {
    return all_workers_at_zero(n_);
  }
  std::vector<Assignment> on_receive(const Job& completed, std::int64_t t,
                                     RandomStream&) override {
    return {{completed.worker, t + 1}};
  }

 private:
  int n_;
};

class RandomStrategy final : public Strategy {
 public:
  explicit RandomStrategy(int n) : n_(n) {}
  std::vector<Assignment> initial_assignments(RandomStream&) override {
    return all_workers_at_zero(n_);
  }
  std::vector<Assignment> on_receive(const Job&, std::int64_t t, RandomStream& rng) override {
    return {{static_cast<int>(rng.below(static_cast<std::uint64_t>(n_))), t + 1}};
  }

 private:
  int n_;
};

// Buffers b receipts, then reassigns the whole round at one shared model
// index floor((t+1)/b)*b (== t+1 at a round boundary).
class WaitingStrategy final : public Strategy {
 public:
  WaitingStrategy(int n, int b, bool random_draw) : n_(n), b_(b), random_draw_(random_draw) {}
  std::vector<Assignment> initial_assignments(RandomStream&) override {
    return all_workers_at_zero(n_);
  }
  std::vector<Assignment> on_receive(const Job& completed, std::int64_t t,
                                     RandomStream& rng) override {
    if (static_cast<int>(buffer_.size()) >= b_)
      throw ContractViolationError("waiting buffer overflow");
    buffer_.push_back(completed.worker);
    if (static_cast<int>(buffer_.size()) < b_) return {};
    const std::int64_t shared = ((t + 1) / b_) * b_;
    std::vector<Assignment> out;
    out.reserve(static_cast<std::size_t>(b_));
    for (int w : buffer_) {
      const int target =
          random_draw_ ? static_cast<int>(rng.below(static_cast<std::uint64_t>(n_))) : w;
      out.push_back({target, shared});
    }
    buffer_.clear();
    return out;
  }
  double update_scale() const override { return 1.0 / static_cast<double>(b_); }

 private:
  int n_;
  int b_;
  bool random_draw_;  // false: reassign the finishing workers themselves
  std::vector<int> buffer_;
};

class ShuffledStrategy final : public Strategy {
 public:
  ShuffledStrategy(int n, ShuffleMode mode, RandomStream& rng)
      : n_(n), mode_(mode), perm_(rng.permutation(n)) {}
  std::vector<Assignment> initial_assignments(RandomStream&) override {
    return all_workers_at_zero(n_);
  }
  std::vector<Assignment> on_receive(const Job&, std::int64_t t, RandomStream& rng) override {
    const int target = perm_[static_cast<std::size_t>(cursor_)];
    if (++cursor_ == n_) {
      cursor_ = 0;
      if (mode_ == ShuffleMode::kEveryCycle) perm_ = rng.permutation(n_);
    }
    return {{target, t + 1}};
  }

 private:
  int n_;
  ShuffleMode mode_;
  std::vector<int> perm_;
  int cursor_ = 0;
};

// Mini-batch SGD as buffered assignment over clients-as-points: a fresh
// without-replacement batch goes out only after all b receipts of the
// previous one, all at the same model index.
class MinibatchStrategy final : public Strategy {
 public:
  MinibatchStrategy(int n, int b) : n_(n), b_(b) {
    if (b_ > n_) throw ConfigError("minibatch: b exceeds the number of clients");
  }
  std::vector<Assignment> initial_assignments(RandomStream& rng) override {
    return draw_batch(0, rng);
  }
  std::vector<Assignment> on_receive(const Job&, std::int64_t t, RandomStream& rng) override {
    if (++received_in_round_ < b_) return {};
    received_in_round_ = 0;
    return draw_batch(((t + 1) / b_) * b_, rng);
  }
  double update_scale() const override { return 1.0 / static_cast<double>(b_); }

 private:
  std::vector<Assignment> draw_batch(std::int64_t model_index, RandomStream& rng) {
    auto idx = rng.sample_without_replacement(n_, b_);
    std::vector<Assignment> out;
    out.reserve(idx.size());
    for (int w : idx) out.push_back({w, model_index});
    return out;
  }
  int n_;
  int b_;
  int received_in_round_ = 0;
};

// Random-reshuffling / shuffle-once over clients-as-points: exactly one job
// in flight, order given by the epoch permutation.
class ReshufflingStrategy final : public Strategy {
 public:
  ReshufflingStrategy(int n, ReshuffleMode mode, RandomStream& rng)
      : n_(n), mode_(mode), perm_(rng.permutation(n)) {}
  std::vector<Assignment> initial_assignments(RandomStream&) override {
    cursor_ = 1;
    return {{perm_[0], 0}};
  }
  std::vector<Assignment> on_receive(const Job&, std::int64_t t, RandomStream& rng) override {
    if (cursor_ == n_) {
      cursor_ = 0;
      if (mode_ == ReshuffleMode::kEveryEpoch) perm_ = rng.permutation(n_);
    }
    const int target = perm_[static_cast<std::size_t>(cursor_++)];
    return {{target, t + 1}};
  }

 private:
  int n_;
  ReshuffleMode mode_;
  std::vector<int> perm_;
  int cursor_ = 0;
};

}  // namespace detail

// n_clients is the worker count, or the point count for the reductions.
// Construction may draw from the strategy stream (initial permutations and
// the first mini-batch); per-receipt draws follow in receipt order.
inline std::unique_ptr<Strategy> make_strategy(const StrategySpec& spec, int n_clients,
                                               RandomStream& rng) {
  if (n_clients < 1) throw ConfigError("strategy needs at least one client");
  if (spec.has_waiting_param() && spec.b > n_clients &&
      spec.kind != StrategyKind::kMinibatch) {
    throw ConfigError("waiting parameter b exceeds the worker count");
  }
  switch (spec.kind) {
    case StrategyKind::kPure:
      return std::make_unique<detail::PureStrategy>(n_clients);
    case StrategyKind::kPureWaiting:
      return std::make_unique<detail::WaitingStrategy>(n_clients, spec.b, false);
    case StrategyKind::kRandom:
      return std::make_unique<detail::RandomStrategy>(n_clients);
    case StrategyKind::kRandomWaiting:
      return std::make_unique<detail::WaitingStrategy>(n_clients, spec.b, true);
    case StrategyKind::kShuffled:
      return std::make_unique<detail::ShuffledStrategy>(n_clients, spec.shuffle_mode, rng);
    case StrategyKind::kMinibatch:
      return std::make_unique<detail::MinibatchStrategy>(n_clients, spec.b);
    case StrategyKind::kReshuffling:
      return std::make_unique<detail::ReshufflingStrategy>(n_clients, spec.reshuffle_mode, rng);
  }
  throw ConfigError("unknown strategy kind");
}

}  // namespace asgrad
