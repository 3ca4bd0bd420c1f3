#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>

#include "promptsearch/embedding.hpp"
#include "promptsearch/filters.hpp"

namespace promptsearch {

// What the adversary observes per query: the filter decision and, when not
// blocked, the generated image embedding.
struct QueryResult {
  bool blocked = false;
  std::optional<SemanticVector> image_embedding;
  std::uint64_t query_id = 0;
};

struct OracleConfig {
  EncoderConfig encoder;
  double noise_sigma = 0.1;
  std::uint64_t generator_seed = 0;
};

// Closed-box query boundary. Every generate call is metered.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual QueryResult generate(const Prompt& p,
                               std::optional<std::uint64_t> reuse_seed =
                                   std::nullopt) = 0;
  virtual std::uint64_t query_count() const = 0;
};

// Local simulated text-to-image target. The image for prompt p is
// normalize(E(p) + sigma * g) with g standard normal, drawn from reuse_seed
// when given, else from the session's own seed stream. The filter runs at
// its stage; blocked queries still count.
class OracleSession : public Oracle {
 public:
  OracleSession(const Dictionary& dict, OracleConfig config, FilterPtr filter);

  QueryResult generate(const Prompt& p,
                       std::optional<std::uint64_t> reuse_seed =
                           std::nullopt) override;
  std::uint64_t query_count() const override;

  void close();
  const OracleConfig& config() const { return config_; }
  const SafetyFilter& filter() const { return *filter_; }

 private:
  const Dictionary* dict_;
  OracleConfig config_;
  FilterPtr filter_;
  std::uint64_t seed_stream_state_;
  std::uint64_t count_ = 0;
  bool open_ = true;
  mutable std::mutex mutex_;
};

}  // namespace promptsearch
