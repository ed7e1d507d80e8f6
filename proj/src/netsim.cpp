// SPDX-License-Identifier: Apache-2.0
#include "daps/netsim.hpp"

#include "daps/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <exception>
#include <fstream>
#include <thread>

namespace daps {

std::string_view to_string(Schedule s) noexcept {
  return s == Schedule::kButterfly ? "butterfly" : "linear";
}

Schedule schedule_from_string(std::string_view s) {
  if (s == "butterfly") return Schedule::kButterfly;
  if (s == "linear") return Schedule::kLinear;
  throw Error(ErrorCode::kInvalidConfig, "unknown schedule '" + std::string(s) + "'");
}

CollectivePlan plan_all_reduce(Schedule schedule, int d) {
  if (d <= 0) throw Error(ErrorCode::kInvalidConfig, "fabric needs at least one node");
  CollectivePlan plan;
  if (d == 1) return plan;
  if (schedule == Schedule::kButterfly) {
    int padded = 1;
    while (padded < d) {
      padded <<= 1;
      ++plan.rounds;
    }
    // Receiver i takes the partial sum of its partner's block. A padded
    // (nonexistent) partner is stood in for by the lowest real node of that
    // block, so every node still ends with the full sum after the rounds.
    for (int r = 0; r < plan.rounds; ++r) {
      for (int i = 0; i < d; ++i) {
        const int partner = i ^ (1 << r);
        const int block = (partner >> r) << r;
        if (block >= d) continue;
        PlannedMessage msg{r, partner < d ? partner : block, i, {}};
        for (int j = block; j < std::min(d, block + (1 << r)); ++j) msg.group.push_back(j);
        plan.messages.push_back(std::move(msg));
      }
    }
  } else {
    plan.rounds = 2 * (d - 1);
    std::vector<int> prefix;
    for (int r = 0; r < d - 1; ++r) {
      prefix.push_back(r);
      plan.messages.push_back({r, r, r + 1, prefix});
    }
    std::vector<int> all(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) all[static_cast<std::size_t>(j)] = j;
    for (int s = 0; s < d - 1; ++s) {
      plan.messages.push_back({d - 1 + s, d - 1 - s, d - 2 - s, all});
    }
  }
  return plan;
}

Fabric::Fabric(int nodes, Options options)
    : nodes_(nodes), options_(options), plan_(plan_all_reduce(options.schedule, nodes)) {
  slots_.assign(static_cast<std::size_t>(nodes_), nullptr);
  slot_tags_.assign(static_cast<std::size_t>(nodes_), {});
  stats_.bytes_sent_per_node.assign(static_cast<std::size_t>(nodes_), 0);
}

void Fabric::wait_locked(std::unique_lock<std::mutex>& lock, std::uint64_t generation) {
  cv_.wait(lock, [&] { return generation_ != generation || abort_reason_.has_value(); });
  if (generation_ == generation) {
    throw Error(ErrorCode::kAborted, *abort_reason_);
  }
}

void Fabric::complete_locked(Kind kind, const std::string& tag) {
  failure_.reset();
  const auto reset = [&] {
    std::fill(slots_.begin(), slots_.end(), nullptr);
    arrived_ = 0;
    ++generation_;
    cv_.notify_all();
  };
  for (int i = 0; i < nodes_; ++i) {
    const bool is_barrier = slots_[static_cast<std::size_t>(i)] == nullptr;
    if (is_barrier != (kind == Kind::kBarrier) || slot_tags_[static_cast<std::size_t>(i)] != tag) {
      failure_ = "nodes disagree on the collective at tag '" + tag + "'";
      reset();
      return;
    }
  }
  if (kind == Kind::kBarrier) {
    reset();
    return;
  }

  const Matrix& first = *slots_[0];
  for (int i = 1; i < nodes_; ++i) {
    const Matrix& m = *slots_[static_cast<std::size_t>(i)];
    if (m.rows() != first.rows() || m.cols() != first.cols()) {
      failure_ = "node " + std::to_string(i) + " contributed " + std::to_string(m.rows()) + "x" +
                 std::to_string(m.cols()) + ", node 0 contributed " +
                 std::to_string(first.rows()) + "x" + std::to_string(first.cols());
      reset();
      return;
    }
  }
  result_ = first;
  for (int i = 1; i < nodes_; ++i) result_ += *slots_[static_cast<std::size_t>(i)];

  const std::uint64_t bytes = static_cast<std::uint64_t>(first.size()) * kBytesPerScalar;
  const std::uint64_t sequence = stats_.collectives++;
  auto& tag_stats = stats_.by_tag[tag];
  ++tag_stats.calls;
  tag_stats.rounds += static_cast<std::uint64_t>(plan_.rounds);
  stats_.rounds += static_cast<std::uint64_t>(plan_.rounds);
  if (!plan_.messages.empty()) stats_.path_bytes += bytes * static_cast<std::uint64_t>(plan_.rounds);
  for (const auto& msg : plan_.messages) {
    stats_.total_bytes += bytes;
    tag_stats.bytes += bytes;
    stats_.bytes_sent_per_node[static_cast<std::size_t>(msg.src)] += bytes;
    if (!options_.record_trace) continue;
    MessageRecord rec{sequence, msg.round, msg.src, msg.dst, bytes, tag, std::nullopt};
    if (options_.record_payloads) {
      Matrix partial = *slots_[static_cast<std::size_t>(msg.group.front())];
      for (std::size_t g = 1; g < msg.group.size(); ++g) {
        partial += *slots_[static_cast<std::size_t>(msg.group[g])];
      }
      rec.payload = std::move(partial);
    }
    trace_.push_back(std::move(rec));
  }
  reset();
}

Matrix Fabric::all_reduce_sum(int node, const Matrix& local, std::string_view tag) {
  if (node < 0 || node >= nodes_) throw Error(ErrorCode::kInvalidConfig, "bad node id");
  std::unique_lock lock(mutex_);
  if (abort_reason_) throw Error(ErrorCode::kAborted, *abort_reason_);
  slots_[static_cast<std::size_t>(node)] = &local;
  slot_tags_[static_cast<std::size_t>(node)] = std::string(tag);
  const std::uint64_t generation = generation_;
  if (++arrived_ == nodes_) {
    complete_locked(Kind::kMatrix, std::string(tag));
  } else {
    wait_locked(lock, generation);
  }
  if (failure_) throw Error(ErrorCode::kShapeMismatch, *failure_);
  return result_;
}

double Fabric::all_reduce_sum(int node, double local, std::string_view tag) {
  Matrix m(1, 1);
  m(0, 0) = local;
  return all_reduce_sum(node, m, tag)(0, 0);
}

void Fabric::synchronize(int node, const std::function<void()>& on_all_arrived) {
  if (node < 0 || node >= nodes_) throw Error(ErrorCode::kInvalidConfig, "bad node id");
  std::unique_lock lock(mutex_);
  if (abort_reason_) throw Error(ErrorCode::kAborted, *abort_reason_);
  slots_[static_cast<std::size_t>(node)] = nullptr;
  slot_tags_[static_cast<std::size_t>(node)] = "<barrier>";
  const std::uint64_t generation = generation_;
  if (++arrived_ == nodes_) {
    // Peers stay parked until the generation advances, so the action may
    // read their state and call back into the fabric (stats, note_public).
    std::optional<std::string> action_failure;
    if (on_all_arrived) {
      lock.unlock();
      try {
        on_all_arrived();
      } catch (const std::exception& e) {
        action_failure = std::string("barrier action failed: ") + e.what();
      }
      lock.lock();
    }
    complete_locked(Kind::kBarrier, "<barrier>");
    if (action_failure) failure_ = action_failure;
  } else {
    wait_locked(lock, generation);
  }
  if (failure_) throw Error(ErrorCode::kAborted, *failure_);
}

void Fabric::note_public(std::string_view tag, const Matrix& value) {
  std::lock_guard lock(mutex_);
  if (!options_.record_trace) return;
  MessageRecord rec{stats_.collectives, 0, kPublicSource, kPublicSource, 0, std::string(tag),
                    std::nullopt};
  if (options_.record_payloads) rec.payload = value;
  trace_.push_back(std::move(rec));
}

void Fabric::abort(const std::string& reason) {
  std::lock_guard lock(mutex_);
  if (!abort_reason_) abort_reason_ = reason;
  cv_.notify_all();
}

bool Fabric::aborted() const {
  std::lock_guard lock(mutex_);
  return abort_reason_.has_value();
}

CommStats Fabric::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::vector<MessageRecord> Fabric::trace() const {
  std::lock_guard lock(mutex_);
  return trace_;
}

std::size_t Fabric::trace_size() const {
  std::lock_guard lock(mutex_);
  return trace_.size();
}

std::vector<MessageRecord> Fabric::trace_since(std::size_t first) const {
  std::lock_guard lock(mutex_);
  if (first >= trace_.size()) return {};
  return {trace_.begin() + static_cast<std::ptrdiff_t>(first), trace_.end()};
}

void Fabric::dump_trace(const std::filesystem::path& path) const {
  write_trace_jsonl(path, trace());
}

void write_trace_jsonl(const std::filesystem::path& path, const std::vector<MessageRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& rec : records) {
    nlohmann::json j;
    j["collective"] = rec.collective;
    j["round"] = rec.round;
    j["src"] = rec.src;
    j["dst"] = rec.dst;
    j["bytes"] = rec.bytes;
    j["tag"] = rec.tag;
    if (rec.payload) {
      const Matrix& m = *rec.payload;
      j["payload"] = {{"rows", m.rows()},
                      {"cols", m.cols()},
                      {"data", std::vector<double>(m.data(), m.data() + m.size())}};
    }
    out << j.dump() << '\n';
  }
}

void run_on_nodes(Fabric& fabric, const std::function<void(int)>& body) {
  const int d = fabric.size();
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(d));
  std::vector<char> aborted(static_cast<std::size_t>(d), 0);
  {
    std::vector<std::jthread> workers;
    workers.reserve(static_cast<std::size_t>(d));
    for (int node = 0; node < d; ++node) {
      workers.emplace_back([&, node] {
        try {
          body(node);
        } catch (const Error& e) {
          errors[static_cast<std::size_t>(node)] = std::current_exception();
          aborted[static_cast<std::size_t>(node)] = e.code() == ErrorCode::kAborted;
          fabric.abort("node " + std::to_string(node) + " failed: " + e.what());
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(node)] = std::current_exception();
          fabric.abort("node " + std::to_string(node) + " failed: " + e.what());
        }
      });
    }
  }
  std::exception_ptr first;
  for (int node = 0; node < d; ++node) {
    const auto& err = errors[static_cast<std::size_t>(node)];
    if (!err) continue;
    if (!aborted[static_cast<std::size_t>(node)]) std::rethrow_exception(err);
    if (!first) first = err;
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace daps
