// SPDX-License-Identifier: Apache-2.0
//
// In-process message fabric for d logical nodes. Each node runs on its own
// worker thread and meets the others at collective calls, which act as
// rendezvous barriers. Results are summed in canonical node order so that
// every node receives a bit-identical matrix no matter how the routing is
// modeled; byte and round accounting follows the chosen schedule.
#pragma once

#include "daps/linalg.hpp"

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace daps {

enum class Schedule { kButterfly, kLinear };

std::string_view to_string(Schedule s) noexcept;
Schedule schedule_from_string(std::string_view s);

inline constexpr std::uint64_t kBytesPerScalar = 8;

/// Node id used for public (replicated, not transmitted) records in the trace.
inline constexpr int kPublicSource = -1;

struct MessageRecord {
  std::uint64_t collective = 0;  ///< sequence number of the collective call
  int round = 0;
  int src = 0;
  int dst = 0;
  std::uint64_t bytes = 0;
  std::string tag;
  std::optional<Matrix> payload;  ///< kept only when payload recording is on
};

/// One planned point-to-point transfer inside an all-reduce. `group` lists
/// the node indices whose contributions the payload sums.
struct PlannedMessage {
  int round = 0;
  int src = 0;
  int dst = 0;
  std::vector<int> group;
};

struct CollectivePlan {
  int rounds = 0;
  std::vector<PlannedMessage> messages;
};

/// Message schedule of one all-reduce among d nodes. Butterfly (recursive
/// doubling) pads d to the next power of two for round counting; a padded
/// partner's block is sent by its lowest real member, or skipped if empty.
/// Linear reduces along the chain 0 -> d-1 and
/// broadcasts back, taking 2(d - 1) rounds.
CollectivePlan plan_all_reduce(Schedule schedule, int d);

struct TagStats {
  std::uint64_t calls = 0;
  std::uint64_t bytes = 0;
  std::uint64_t rounds = 0;
};

struct CommStats {
  std::uint64_t total_bytes = 0;  ///< all messages, all nodes
  std::uint64_t rounds = 0;       ///< sum of rounds over collectives
  std::uint64_t collectives = 0;
  std::uint64_t path_bytes = 0;   ///< sum over rounds of the largest message
  std::vector<std::uint64_t> bytes_sent_per_node;
  std::map<std::string, TagStats> by_tag;
};

class Fabric {
 public:
  struct Options {
    Schedule schedule = Schedule::kButterfly;
    bool record_trace = false;
    bool record_payloads = false;
  };

  Fabric(int nodes, Options options);
  explicit Fabric(int nodes) : Fabric(nodes, Options{}) {}

  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  int size() const noexcept { return nodes_; }
  const Options& options() const noexcept { return options_; }

  /// Blocks until every node has contributed; returns the canonical sum.
  /// Throws ShapeMismatch at all nodes if contributions disagree in shape,
  /// and Aborted if the fabric was aborted.
  Matrix all_reduce_sum(int node, const Matrix& local, std::string_view tag);
  double all_reduce_sum(int node, double local, std::string_view tag);

  /// Barrier without payload. The last node to arrive runs `on_all_arrived`
  /// while the others are parked, so it may read every node's state.
  void synchronize(int node, const std::function<void()>& on_all_arrived);

  /// Logs a replicated value every node already holds (no bytes counted).
  void note_public(std::string_view tag, const Matrix& value);

  /// Wakes all waiting nodes with an Aborted error.
  void abort(const std::string& reason);
  bool aborted() const;

  CommStats stats() const;
  std::vector<MessageRecord> trace() const;
  std::size_t trace_size() const;
  /// Copies trace records [first, end).
  std::vector<MessageRecord> trace_since(std::size_t first) const;

  /// Writes the trace as JSON lines: round, src, dst, bytes, tag (and the
  /// payload as {rows, cols, data} when recorded).
  void dump_trace(const std::filesystem::path& path) const;

 private:
  enum class Kind { kMatrix, kBarrier };

  void complete_locked(Kind kind, const std::string& tag);
  void wait_locked(std::unique_lock<std::mutex>& lock, std::uint64_t generation);

  const int nodes_;
  const Options options_;
  const CollectivePlan plan_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t generation_ = 0;
  int arrived_ = 0;
  std::vector<const Matrix*> slots_;
  std::vector<std::string> slot_tags_;
  Matrix result_;
  std::optional<std::string> failure_;  ///< failure of the last completed collective
  std::optional<std::string> abort_reason_;

  CommStats stats_;
  std::vector<MessageRecord> trace_;
};

/// JSON-lines dump of trace records, one object per message.
void write_trace_jsonl(const std::filesystem::path& path, const std::vector<MessageRecord>& records);

/// Runs `body(node)` on one worker thread per node and joins. If any node
/// throws, the fabric is aborted so peers blocked in collectives wake up, and
/// the first non-Aborted exception is rethrown.
void run_on_nodes(Fabric& fabric, const std::function<void(int)>& body);

}  // namespace daps
