#include "promptsearch/oracle.hpp"

#include <stdexcept>

#include "promptsearch/rng.hpp"

namespace promptsearch {

OracleSession::OracleSession(const Dictionary& dict, OracleConfig config,
                             FilterPtr filter)
    : dict_(&dict),
      config_(std::move(config)),
      filter_(std::move(filter)),
      seed_stream_state_(config_.generator_seed) {
  if (!filter_) throw std::invalid_argument("oracle session needs a filter");
  if (config_.noise_sigma < 0.0)
    throw std::invalid_argument("noise sigma must be >= 0");
}

QueryResult OracleSession::generate(const Prompt& p,
                                    std::optional<std::uint64_t> reuse_seed) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!open_) throw std::logic_error("generate on closed oracle session");

  QueryResult result;
  result.query_id = ++count_;

  if (filter_->stage() == FilterStage::text && filter_->blocks_text(p)) {
    result.blocked = true;
    return result;
  }

  SemanticVector image =
      encode_prompt(p, *dict_, config_.encoder.dim, config_.encoder.encoder_seed);
  if (config_.noise_sigma > 0.0) {
    std::uint64_t noise_seed;
    if (reuse_seed) {
      noise_seed = *reuse_seed;
    } else {
      // Per-query draw from the session stream; uncontrollable by the caller.
      seed_stream_state_ += kGolden;
      noise_seed = mix64(seed_stream_state_);
    }
    GaussianStream gauss(noise_seed);
    for (int i = 0; i < image.size(); ++i)
      image[i] += config_.noise_sigma * gauss.next();
    image = normalize(image);
  }

  if (filter_->stage() == FilterStage::image && filter_->blocks_image(image)) {
    result.blocked = true;
    return result;
  }
  result.image_embedding = std::move(image);
  return result;
}

std::uint64_t OracleSession::query_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return count_;
}

void OracleSession::close() {
  std::lock_guard<std::mutex> lock(mutex_);
  open_ = false;
}

}  // namespace promptsearch
