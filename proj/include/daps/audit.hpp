// SPDX-License-Identifier: Apache-2.0
//
// Exact-match scan of recorded wire payloads against node-private data.
#pragma once

#include "daps/linalg.hpp"
#include "daps/netsim.hpp"

#include <span>
#include <string>
#include <vector>

namespace daps {

/// Borrowed view of what node `node` must keep to itself.
struct PrivateView {
  int node = 0;
  const Matrix* a = nullptr;
  const Matrix* x = nullptr;
  const Matrix* w = nullptr;
  double beta = 0.0;
};

struct AuditFinding {
  std::uint64_t collective = 0;
  int src = 0;
  std::string tag;
  std::string what;  ///< e.g. "column 3 of A_2"
};

struct WireAudit {
  std::size_t messages_scanned = 0;
  std::size_t payloads_scanned = 0;
  std::vector<AuditFinding> findings;

  bool clean() const noexcept { return findings.empty(); }
};

/// Flags any payload column equal (bit for bit) to a column of some A_i, X_i
/// or W_i, and any payload entry equal to some beta_i. Zero columns never
/// count as a match. Public records are skipped.
void audit_messages(std::span<const MessageRecord> messages, std::span<const PrivateView> views,
                    WireAudit& into);

}  // namespace daps
