// SPDX-License-Identifier: Apache-2.0
//
// The three chainable mutation engines: Random, Coverage-based (grey or
// black feedback), and the TLV Inserter, plus the probability table the
// coverage engines evolve from per-iteration coverage feedback.

#ifndef MESHFUZZ_ENGINES_HPP_
#define MESHFUZZ_ENGINES_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "meshfuzz/coverage.hpp"
#include "meshfuzz/dissect.hpp"
#include "meshfuzz/mle.hpp"
#include "meshfuzz/util.hpp"

namespace meshfuzz {

inline constexpr double kMinFieldProbability = 0.001;
inline constexpr double kMaxFieldProbability = 1.0;

double clamp_probability(double p);

// p_f = k / |F_P| for every field of a dissected packet, clamped.
std::vector<std::pair<std::string, double>> init_probabilities(const DissectedPacket& packet,
                                                               double k);

// gamma(i) = min(i / warm_i, 1). Throws std::invalid_argument if warm_i == 0.
double gamma_warmup(std::uint64_t iteration, std::uint64_t warm_i);

// G(c_i, i) = h(c_i) * g(i) / n_i with h = +1 when c_i > 0 else -1 and
// g = beta*gamma(i) when c_i > 0 else 1/(beta*gamma(i)). The penalty branch
// at gamma(i) == 0 is guarded as g = 1/beta. Requires n_i >= 1.
double feedback_gain(std::size_t new_coverage, std::uint64_t iteration, double beta,
                     std::uint64_t warm_i, std::size_t mutated_fields);

// One mutated field inside one packet of an iteration.
struct FieldMutation {
  std::uint8_t message_type;
  std::string path;
  std::uint64_t old_value;
  std::uint64_t new_value;
  std::uint32_t bit_width;
};

struct TlvInsertion {
  mle::TlvPath path;          // where the TLV landed
  std::uint8_t tlv_type;
  bool lengths_recomputed;    // whether the gamma branch fixed parent lengths
};

struct MutationLog {
  std::uint64_t iteration = 0;
  std::vector<FieldMutation> fields;
  std::vector<TlvInsertion> insertions;

  // n_i of the update formulas: mutated fields only, insertions excluded.
  std::size_t mutated_field_count() const { return fields.size(); }

  void merge(MutationLog other);
};

// Per (message type, field path) mutation probabilities with the update
// hyperparameters. Entries initialize exactly once, on first sight of a
// field, to k/|F_P| of the dissection that introduced it.
class ProbabilityTable {
 public:
  ProbabilityTable(double k, double beta, std::uint64_t warm_i)
      : k_(k), beta_(beta), warm_i_(warm_i) {}

  void ensure_initialized(const DissectedPacket& packet);
  double probability(std::uint8_t message_type, const std::string& path) const;

  // Eq. driven update: for every mutated field of the log,
  // p_f <- clamp(p_f + G / log2(|V_f| + 1)). No-op when the log mutated
  // nothing. Unknown fields (never dissected) are ignored.
  void update(const MutationLog& log, std::size_t new_coverage, std::uint64_t iteration);

  double k() const { return k_; }
  double beta() const { return beta_; }
  std::uint64_t warm_i() const { return warm_i_; }

  const std::map<std::pair<std::uint8_t, std::string>, double>& entries() const {
    return probabilities_;
  }

 private:
  double k_;
  double beta_;
  std::uint64_t warm_i_;
  std::map<std::pair<std::uint8_t, std::string>, double> probabilities_;
};

// Mutates each field independently with its probability: half the draws are
// uniform over the field domain, half come from the boundary set
// {0, 1, max, max-1} (deduplicated within the domain). The new value may
// equal the old one. Probabilities are positional over packet.fields.
mle::MlePacket random_fuzz(const mle::MlePacket& packet, const DissectedPacket& dissected,
                           std::span<const double> probabilities, Rng& rng, MutationLog& log);

// Pool of previously extracted TLVs, FIFO-evicted at capacity.
class TlvPool {
 public:
  explicit TlvPool(std::size_t capacity = 1024) : capacity_(capacity) {}

  struct Entry {
    mle::Tlv tlv;
    std::uint8_t source_message;
  };

  // Appends every top-level and nested TLV of the packet, pre-order.
  void harvest(const mle::MlePacket& packet);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Entry& at(std::size_t i) const { return entries_[i]; }

 private:
  void push(Entry entry);

  std::size_t capacity_;
  std::deque<Entry> entries_;
};

// With probability q, inserts one uniformly drawn pooled TLV at one
// uniformly drawn legal insertion point, then recomputes affected parent
// lengths with probability gamma. Identity on an empty pool.
mle::MlePacket tlv_insert(const mle::MlePacket& packet, const TlvPool& pool, double gamma,
                          double insert_probability, Rng& rng, MutationLog& log);

enum class EngineKind : std::uint8_t {
  Random,
  CoverageGrey,
  CoverageBlack,
  TlvInserter,
  Directed,  // deterministic single-field writer, used for seeded campaigns
};

struct EngineConfig {
  EngineKind kind = EngineKind::Random;
  double k = 2.0;
  double beta = 3.0;
  std::uint64_t warm_i = 2000;
  double gamma = 1.0;           // TLV inserter: length-fix probability
  double q = 0.8;               // TLV inserter: per-packet insertion probability
  bool adapt = true;            // coverage engines: apply probability updates

  // Directed engine: force `path` of packets with `message_type` to `value`,
  // on every iteration or only on those listed in `iterations`.
  std::uint8_t directed_message = 0;
  std::string directed_path;
  std::uint64_t directed_value = 0;
  std::vector<std::uint64_t> directed_iterations;
};

struct FuzzerChain {
  std::vector<EngineConfig> engines;

  // Throws std::invalid_argument if more than one coverage engine is present
  // or a hyperparameter is out of range.
  void validate() const;
  bool has_coverage_engine() const;
  std::optional<CoverageSource> feedback_source() const;
};

// Campaign-owned chain state: the probability table of the (single) coverage
// engine and the TLV pool of the inserter(s).
class ChainRunner {
 public:
  explicit ChainRunner(FuzzerChain chain);

  // Applies the engines in order, refreshing dissection after structural
  // changes. Harvests the pre-mutation packet into the pool first when the
  // chain contains an inserter. Appends to `log`.
  mle::MlePacket apply(const mle::MlePacket& packet, std::uint64_t iteration, Rng& rng,
                       MutationLog& log);

  // Feeds the iteration's coverage result to the coverage engine, if any.
  void end_iteration(const MutationLog& log, std::size_t new_coverage,
                     std::uint64_t iteration);

  const FuzzerChain& chain() const { return chain_; }
  const ProbabilityTable* table() const { return table_ ? &*table_ : nullptr; }
  const TlvPool& pool() const { return pool_; }

 private:
  FuzzerChain chain_;
  std::optional<ProbabilityTable> table_;
  TlvPool pool_;
};

}  // namespace meshfuzz

#endif  // MESHFUZZ_ENGINES_HPP_
