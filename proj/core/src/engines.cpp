// SPDX-License-Identifier: Apache-2.0
#include "meshfuzz/engines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace meshfuzz {

using mle::MlePacket;
using mle::Tlv;

double clamp_probability(double p) {
  return std::clamp(p, kMinFieldProbability, kMaxFieldProbability);
}

std::vector<std::pair<std::string, double>> init_probabilities(const DissectedPacket& packet,
                                                               double k) {
  if (packet.field_count() == 0) {
    return {};
  }
  double p = clamp_probability(k / static_cast<double>(packet.field_count()));
  std::vector<std::pair<std::string, double>> out;
  out.reserve(packet.fields.size());
  for (const FieldDescriptor& f : packet.fields) {
    out.emplace_back(f.path, p);
  }
  return out;
}

double gamma_warmup(std::uint64_t iteration, std::uint64_t warm_i) {
  if (warm_i == 0) {
    throw std::invalid_argument("gamma_warmup: warm_i must be positive");
  }
  return std::min(static_cast<double>(iteration) / static_cast<double>(warm_i), 1.0);
}

double feedback_gain(std::size_t new_coverage, std::uint64_t iteration, double beta,
                     std::uint64_t warm_i, std::size_t mutated_fields) {
  if (mutated_fields == 0) {
    throw std::invalid_argument("feedback_gain: requires at least one mutated field");
  }
  if (beta <= 0.0) {
    throw std::invalid_argument("feedback_gain: beta must be positive");
  }
  double gamma = gamma_warmup(iteration, warm_i);
  double h = new_coverage > 0 ? 1.0 : -1.0;
  double g;
  if (new_coverage > 0) {
    g = beta * gamma;
  } else {
    // gamma(0) = 0 leaves the penalty branch undefined; the mildest penalty
    // consistent with the branch is used.
    g = gamma > 0.0 ? 1.0 / (beta * gamma) : 1.0 / beta;
  }
  return h * g / static_cast<double>(mutated_fields);
}

void MutationLog::merge(MutationLog other) {
  fields.insert(fields.end(), std::make_move_iterator(other.fields.begin()),
                std::make_move_iterator(other.fields.end()));
  insertions.insert(insertions.end(), std::make_move_iterator(other.insertions.begin()),
                    std::make_move_iterator(other.insertions.end()));
}

void ProbabilityTable::ensure_initialized(const DissectedPacket& packet) {
  if (packet.field_count() == 0) return;
  double p = clamp_probability(k_ / static_cast<double>(packet.field_count()));
  for (const FieldDescriptor& f : packet.fields) {
    probabilities_.try_emplace({packet.message_type, f.path}, p);
  }
}

double ProbabilityTable::probability(std::uint8_t message_type, const std::string& path) const {
  auto it = probabilities_.find({message_type, path});
  if (it == probabilities_.end()) {
    throw std::out_of_range("ProbabilityTable: field not initialized");
  }
  return it->second;
}

void ProbabilityTable::update(const MutationLog& log, std::size_t new_coverage,
                              std::uint64_t iteration) {
  std::size_t n = log.mutated_field_count();
  if (n == 0) return;
  double gain = feedback_gain(new_coverage, iteration, beta_, warm_i_, n);
  for (const FieldMutation& m : log.fields) {
    auto it = probabilities_.find({m.message_type, m.path});
    if (it == probabilities_.end()) continue;
    double scale = std::log2(std::ldexp(1.0, static_cast<int>(m.bit_width)) + 1.0);
    it->second = clamp_probability(it->second + gain / scale);
  }
}

namespace {

// Boundary candidates {0, 1, max, max-1} deduplicated within the domain.
std::vector<std::uint64_t> special_values(const FieldDescriptor& field) {
  std::uint64_t max = field.max_value();
  std::vector<std::uint64_t> vals{0, 1, max, max - 1};
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  return vals;
}

}  // namespace

MlePacket random_fuzz(const MlePacket& packet, const DissectedPacket& dissected,
                      std::span<const double> probabilities, Rng& rng, MutationLog& log) {
  if (probabilities.size() != dissected.fields.size()) {
    throw std::invalid_argument("random_fuzz: probabilities do not cover the dissection");
  }
  Bytes bytes = mle::encode_packet(packet);
  bool changed = false;
  for (std::size_t i = 0; i < dissected.fields.size(); ++i) {
    const FieldDescriptor& field = dissected.fields[i];
    if (!rng.chance(probabilities[i])) {
      continue;
    }
    std::size_t first = field.bit_offset / 8;
    std::size_t nbytes = field.bit_width / 8;
    std::uint64_t old_value = 0;
    for (std::size_t b = 0; b < nbytes; ++b) {
      old_value = old_value << 8 | bytes[first + b];
    }
    std::uint64_t new_value;
    if (rng.chance(0.5)) {
      new_value = rng.next_bits(field.bit_width);
    } else {
      std::vector<std::uint64_t> specials = special_values(field);
      new_value = specials[rng.next_below(specials.size())];
    }
    for (std::size_t b = 0; b < nbytes; ++b) {
      bytes[first + nbytes - 1 - b] = static_cast<std::uint8_t>(new_value >> (8 * b));
    }
    log.fields.push_back(
        {dissected.message_type, field.path, old_value, new_value, field.bit_width});
    changed = true;
  }
  if (!changed) {
    return packet;
  }
  return mle::decode_packet_lenient(bytes);
}

void TlvPool::push(Entry entry) {
  if (capacity_ == 0) return;
  if (entries_.size() == capacity_) {
    entries_.pop_front();
  }
  entries_.push_back(std::move(entry));
}

void TlvPool::harvest(const MlePacket& packet) {
  // Pre-order: each TLV subtree is pooled as a whole, then its children
  // individually.
  std::vector<const Tlv*> stack;
  for (auto it = packet.tlvs.rbegin(); it != packet.tlvs.rend(); ++it) {
    stack.push_back(&*it);
  }
  while (!stack.empty()) {
    const Tlv* tlv = stack.back();
    stack.pop_back();
    push({*tlv, packet.message_type});
    if (tlv->has_children()) {
      const mle::TlvList& children = tlv->children();
      for (auto it = children.rbegin(); it != children.rend(); ++it) {
        stack.push_back(&*it);
      }
    }
  }
}

MlePacket tlv_insert(const MlePacket& packet, const TlvPool& pool, double gamma,
                     double insert_probability, Rng& rng, MutationLog& log) {
  if (pool.empty()) {
    return packet;
  }
  if (!rng.chance(insert_probability)) {
    return packet;
  }
  const TlvPool::Entry& entry = pool.at(rng.next_below(pool.size()));
  int height = entry.tlv.height();

  std::vector<InsertionPoint> points = insertion_points(packet);
  std::vector<InsertionPoint> legal;
  for (InsertionPoint& p : points) {
    if (p.depth + height - 1 <= mle::kMaxNestingDepth) {
      legal.push_back(std::move(p));
    }
  }
  // Top-level gaps are always legal for a decodable pooled TLV.
  const InsertionPoint& point = legal[rng.next_below(legal.size())];

  auto [mutated, path] = insert_at(packet, point, entry.tlv);
  bool fix_lengths = rng.chance(gamma);
  if (fix_lengths) {
    mutated = mle::recompute_parent_lengths(std::move(mutated), path);
  }
  log.insertions.push_back({path, entry.tlv.type, fix_lengths});
  return mutated;
}

void FuzzerChain::validate() const {
  int coverage_engines = 0;
  for (const EngineConfig& e : engines) {
    if (e.kind == EngineKind::CoverageGrey || e.kind == EngineKind::CoverageBlack) {
      ++coverage_engines;
    }
    if (e.k <= 0.0) throw std::invalid_argument("fuzzer chain: k must be positive");
    if (e.beta <= 0.0) throw std::invalid_argument("fuzzer chain: beta must be positive");
    if (e.warm_i == 0) throw std::invalid_argument("fuzzer chain: warm_i must be positive");
    if (e.gamma < 0.0 || e.gamma > 1.0) {
      throw std::invalid_argument("fuzzer chain: gamma must be within [0, 1]");
    }
    if (e.q < 0.0 || e.q > 1.0) {
      throw std::invalid_argument("fuzzer chain: q must be within [0, 1]");
    }
  }
  if (coverage_engines > 1) {
    throw std::invalid_argument("fuzzer chain: at most one coverage-based engine");
  }
}

bool FuzzerChain::has_coverage_engine() const {
  return feedback_source().has_value();
}

std::optional<CoverageSource> FuzzerChain::feedback_source() const {
  for (const EngineConfig& e : engines) {
    if (e.kind == EngineKind::CoverageGrey) return CoverageSource::DutGrey;
    if (e.kind == EngineKind::CoverageBlack) return CoverageSource::GeneratorBlack;
  }
  return std::nullopt;
}

ChainRunner::ChainRunner(FuzzerChain chain) : chain_(std::move(chain)) {
  chain_.validate();
  for (const EngineConfig& e : chain_.engines) {
    if (e.kind == EngineKind::CoverageGrey || e.kind == EngineKind::CoverageBlack) {
      table_.emplace(e.k, e.beta, e.warm_i);
    }
  }
}

MlePacket ChainRunner::apply(const MlePacket& packet, std::uint64_t iteration, Rng& rng,
                             MutationLog& log) {
  bool has_inserter = false;
  for (const EngineConfig& e : chain_.engines) {
    if (e.kind == EngineKind::TlvInserter) has_inserter = true;
  }
  if (has_inserter) {
    pool_.harvest(packet);
  }

  MlePacket current = packet;
  DissectedPacket dissected = dissect(current);
  for (const EngineConfig& engine : chain_.engines) {
    switch (engine.kind) {
      case EngineKind::Random: {
        double p = dissected.field_count() == 0
                       ? 0.0
                       : clamp_probability(engine.k /
                                           static_cast<double>(dissected.field_count()));
        std::vector<double> probs(dissected.fields.size(), p);
        current = random_fuzz(current, dissected, probs, rng, log);
        break;
      }
      case EngineKind::CoverageGrey:
      case EngineKind::CoverageBlack: {
        table_->ensure_initialized(dissected);
        std::vector<double> probs;
        probs.reserve(dissected.fields.size());
        for (const FieldDescriptor& f : dissected.fields) {
          probs.push_back(table_->probability(dissected.message_type, f.path));
        }
        current = random_fuzz(current, dissected, probs, rng, log);
        break;
      }
      case EngineKind::TlvInserter: {
        std::size_t before = log.insertions.size();
        current = tlv_insert(current, pool_, engine.gamma, engine.q, rng, log);
        if (log.insertions.size() != before) {
          dissected = dissect(current);  // refresh for downstream engines
        }
        break;
      }
      case EngineKind::Directed: {
        if (!engine.directed_iterations.empty() &&
            std::find(engine.directed_iterations.begin(), engine.directed_iterations.end(),
                      iteration) == engine.directed_iterations.end()) {
          break;
        }
        if (current.message_type != engine.directed_message) {
          break;
        }
        for (const FieldDescriptor& f : dissected.fields) {
          if (f.path == engine.directed_path) {
            std::uint64_t old_value = read_field(current, f);
            current = write_field(std::move(current), f, engine.directed_value);
            log.fields.push_back({dissected.message_type, f.path, old_value,
                                  engine.directed_value, f.bit_width});
            break;
          }
        }
        break;
      }
    }
  }
  return current;
}

void ChainRunner::end_iteration(const MutationLog& log, std::size_t new_coverage,
                                std::uint64_t iteration) {
  if (!table_) return;
  for (const EngineConfig& e : chain_.engines) {
    if ((e.kind == EngineKind::CoverageGrey || e.kind == EngineKind::CoverageBlack) &&
        !e.adapt) {
      return;  // update path disabled; behavior stays identical to Random
    }
  }
  table_->update(log, new_coverage, iteration);
}

}  // namespace meshfuzz
