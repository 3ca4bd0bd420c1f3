#include "promptsearch/oracle_client.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "promptsearch/errors.hpp"

namespace promptsearch {

using nlohmann::json;

struct RemoteOracle::Impl {
  Impl(const std::string& base_url, int retries, int backoff_ms)
      : client(base_url), retries(retries), backoff_ms(backoff_ms) {
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);
  }

  // Issues the request, retrying connection-level failures. A non-200 reply
  // is deterministic and fails immediately.
  httplib::Result with_retries(
      const std::function<httplib::Result()>& request) {
    int backoff = backoff_ms;
    for (int attempt = 0;; ++attempt) {
      httplib::Result result = request();
      if (result) return result;
      if (attempt >= retries)
        throw TransportError("oracle unreachable after " +
                             std::to_string(retries) + " retries: " +
                             httplib::to_string(result.error()));
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }

  httplib::Client client;
  int retries;
  int backoff_ms;
};

RemoteOracle::RemoteOracle(const std::string& base_url, int retries,
                           int backoff_ms)
    : impl_(std::make_unique<Impl>(base_url, retries, backoff_ms)) {}

RemoteOracle::~RemoteOracle() = default;

QueryResult RemoteOracle::generate(const Prompt& p,
                                   std::optional<std::uint64_t> reuse_seed) {
  json request;
  request["prompt"] = p.raw;
  if (reuse_seed)
    request["seed"] = *reuse_seed;
  else
    request["seed"] = nullptr;

  auto result = impl_->with_retries([&] {
    return impl_->client.Post("/v1/generate", request.dump(),
                              "application/json");
  });
  if (result->status != 200)
    throw TransportError("oracle replied HTTP " +
                         std::to_string(result->status) + ": " + result->body);

  json body = json::parse(result->body, nullptr, false);
  if (body.is_discarded() || !body.is_object())
    throw TransportError("oracle replied with malformed JSON");
  QueryResult out;
  out.blocked = body.at("blocked").get<bool>();
  out.query_id = body.at("query_id").get<std::uint64_t>();
  if (!body.at("embedding").is_null()) {
    const auto& values = body.at("embedding");
    SemanticVector v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
    out.image_embedding = std::move(v);
  }
  return out;
}

std::uint64_t RemoteOracle::query_count() const {
  auto result =
      impl_->with_retries([&] { return impl_->client.Get("/v1/stats"); });
  if (result->status != 200)
    throw TransportError("stats replied HTTP " +
                         std::to_string(result->status));
  json body = json::parse(result->body, nullptr, false);
  if (body.is_discarded() || !body.is_object())
    throw TransportError("stats replied with malformed JSON");
  return body.at("queries").get<std::uint64_t>();
}

}  // namespace promptsearch
