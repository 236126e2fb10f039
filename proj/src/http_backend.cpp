#include "counterprobe/http_backend.hpp"

#include "httplib.h"

#include "counterprobe/errors.hpp"

namespace counterprobe {

namespace {

httplib::Client make_client(const std::string& base_url, const HttpBackendOptions& options) {
  httplib::Client client(base_url);
  client.set_connection_timeout(options.connect_timeout);
  client.set_read_timeout(options.read_timeout);
  client.set_keep_alive(false);
  return client;
}

std::string check_response(const httplib::Result& res, const std::string& what, const std::string& model_id) {
  if (!res) {
    throw TransportError(what + ": " + httplib::to_string(res.error()), true);
  }
  const int status = res->status;
  if (status == 200) return res->body;
  if (status == 404) throw ConfigError(what + ": unknown model '" + model_id + "' (" + res->body + ")");
  if (status >= 500) {
    throw TransportError(what + ": HTTP " + std::to_string(status) + " " + res->body, true);
  }
  throw ProtocolError(what + ": HTTP " + std::to_string(status), res->body);
}

}  // namespace

HttpBackend::HttpBackend(std::string base_url, HttpBackendOptions options)
    : base_url_(std::move(base_url)), options_(options) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (base_url_.rfind("http://", 0) != 0) {
    throw ConfigError("backend URL '" + base_url_ + "' must start with http://");
  }
}

HttpBackend::~HttpBackend() = default;

std::vector<ModelInfo> HttpBackend::list_models() {
  auto client = make_client(base_url_, options_);
  const auto body = check_response(client.Get("/v1/models"), "GET /v1/models", "");
  return parse_models_response(body);
}

std::string HttpBackend::score_raw(const ScoreRequest& request) {
  // One client per call: httplib::Client is not safe to share across threads.
  auto client = make_client(base_url_, options_);
  const auto body = request_to_wire(request).dump();
  return check_response(client.Post("/v1/score", body, "application/json"), "POST /v1/score", request.model_id);
}

}  // namespace counterprobe
