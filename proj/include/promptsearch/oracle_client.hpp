#pragma once

#include <memory>
#include <string>

#include "promptsearch/oracle.hpp"

namespace promptsearch {

// Client side of the oracle wire protocol. Connection-level failures are
// retried with exponential backoff; after the retries are spent a
// TransportError is thrown. The server-side counter is authoritative.
class RemoteOracle : public Oracle {
 public:
  explicit RemoteOracle(const std::string& base_url, int retries = 3,
                        int backoff_ms = 100);
  ~RemoteOracle() override;

  RemoteOracle(const RemoteOracle&) = delete;
  RemoteOracle& operator=(const RemoteOracle&) = delete;

  QueryResult generate(const Prompt& p,
                       std::optional<std::uint64_t> reuse_seed =
                           std::nullopt) override;
  // GET /v1/stats
  std::uint64_t query_count() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace promptsearch
