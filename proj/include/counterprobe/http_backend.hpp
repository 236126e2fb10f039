#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "counterprobe/scoring_client.hpp"

namespace counterprobe {

inline constexpr const char* kBackendUrlEnv = "COUNTERPROBE_BACKEND_URL";

struct HttpBackendOptions {
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{120000};
};

// Client for the /v1 scoring protocol:
//   GET  /v1/models -> {"models":[{"id","mode","mask_token"}]}
//   POST /v1/score  -> {"scores":[{"token","p"}]}
// Connection failures and 5xx replies are transient TransportErrors, 404 is
// a ConfigError, any other non-200 reply is a ProtocolError.
class HttpBackend final : public ScoringBackend {
 public:
  explicit HttpBackend(std::string base_url, HttpBackendOptions options = {});
  ~HttpBackend() override;

  std::string identity() const override { return base_url_; }
  std::vector<ModelInfo> list_models() override;
  std::string score_raw(const ScoreRequest& request) override;

 private:
  std::string base_url_;
  HttpBackendOptions options_;
};

}  // namespace counterprobe
