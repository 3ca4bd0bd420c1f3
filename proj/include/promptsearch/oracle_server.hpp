#pragma once

#include <memory>
#include <string>

#include "promptsearch/oracle.hpp"

namespace promptsearch {

// HTTP front end over one OracleSession. All connections share the session,
// so the query counter is authoritative and requests are serialized through
// it.
//
//   POST /v1/generate  {"prompt": string, "seed": u64 | null}
//     -> 200 {"blocked": bool, "embedding": [float...] | null, "query_id": u64}
//     -> 400 on malformed input
//   GET  /v1/stats     -> {"queries": u64}
class OracleServer {
 public:
  OracleServer(const Dictionary& dict, OracleConfig config, FilterPtr filter);
  ~OracleServer();

  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  // Binds and serves on a background thread; returns the bound port
  // (pass port 0 for an ephemeral one). Throws ConfigError on bind failure.
  int start(const std::string& host, int port);
  // Blocking variant for the CLI.
  void serve(const std::string& host, int port);
  void stop();

  std::uint64_t query_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace promptsearch
