#include "promptsearch/oracle_server.hpp"

#include <atomic>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "promptsearch/errors.hpp"

namespace promptsearch {

using nlohmann::json;

struct OracleServer::Impl {
  Impl(const Dictionary& dict, OracleConfig config, FilterPtr filter)
      : session(dict, std::move(config), std::move(filter)) {
    server.Post("/v1/generate", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      handle_generate(req, res);
    });
    server.Get("/v1/stats",
               [this](const httplib::Request&, httplib::Response& res) {
                 json body;
                 body["queries"] = session.query_count();
                 res.set_content(body.dump(), "application/json");
               });
  }

  void handle_generate(const httplib::Request& req, httplib::Response& res) {
    json request = json::parse(req.body, nullptr, false);
    if (request.is_discarded() || !request.is_object() ||
        !request.contains("prompt") || !request["prompt"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":"malformed request"})", "application/json");
      return;
    }
    std::optional<std::uint64_t> seed;
    if (request.contains("seed") && !request["seed"].is_null()) {
      if (!request["seed"].is_number_unsigned()) {
        res.status = 400;
        res.set_content(R"({"error":"seed must be unsigned or null"})",
                        "application/json");
        return;
      }
      seed = request["seed"].get<std::uint64_t>();
    }
    Prompt prompt;
    try {
      prompt = Prompt::parse(request["prompt"].get<std::string>());
    } catch (const std::invalid_argument&) {
      res.status = 400;
      res.set_content(R"({"error":"empty prompt"})", "application/json");
      return;
    }
    QueryResult result = session.generate(prompt, seed);
    json body;
    body["blocked"] = result.blocked;
    if (result.image_embedding) {
      json values = json::array();
      for (Eigen::Index i = 0; i < result.image_embedding->size(); ++i)
        values.push_back((*result.image_embedding)[i]);
      body["embedding"] = std::move(values);
    } else {
      body["embedding"] = nullptr;
    }
    body["query_id"] = result.query_id;
    res.set_content(body.dump(), "application/json");
  }

  OracleSession session;
  httplib::Server server;
  std::thread thread;
};

OracleServer::OracleServer(const Dictionary& dict, OracleConfig config,
                           FilterPtr filter)
    : impl_(std::make_unique<Impl>(dict, std::move(config), std::move(filter))) {}

OracleServer::~OracleServer() { stop(); }

int OracleServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw ConfigError("oracle server failed to bind " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw ConfigError("oracle server failed to bind " + host + ":" +
                        std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void OracleServer::serve(const std::string& host, int port) {
  if (!impl_->server.bind_to_port(host, port))
    throw ConfigError("oracle server failed to bind " + host + ":" +
                      std::to_string(port));
  impl_->server.listen_after_bind();
}

void OracleServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::uint64_t OracleServer::query_count() const {
  return impl_->session.query_count();
}

}  // namespace promptsearch
