#include <chrono>
#include <regex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "anvil/agents.hpp"

namespace anvil::agents {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw BackendError("invalid endpoint URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

RemoteChatBackend::RemoteChatBackend(RemoteChatConfig config) : config_(std::move(config)) {
  split_endpoint(config_.endpoint);
  if (config_.model.empty()) throw BackendError("remote backend needs a model name");
}

AgentTurn RemoteChatBackend::respond(AgentRole role, std::span<const ContextBlock> context,
                                     const Transcript& /*transcript*/) {
  if (context.empty()) throw std::invalid_argument("agent context must not be empty");
  auto ep = split_endpoint(config_.endpoint);
  nlohmann::json body = {{"model", config_.model},
                         {"messages",
                          {{{"role", "system"}, {"content", system_prompt(role)}},
                           {{"role", "user"}, {"content", render_context(context)}}}}};
  std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto started = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.retry.delay_for(attempt - 1));
    httplib::Client client(ep.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto res = client.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (retryable(res->status)) continue;
      throw BackendError("chat endpoint answered " + last_error);
    }
    try {
      auto doc = nlohmann::json::parse(res->body);
      AgentTurn turn;
      turn.role = role;
      turn.response = doc.at("choices").at(0).at("message").at("content").get<std::string>();
      const auto& usage = doc.contains("usage") ? doc["usage"] : nlohmann::json::object();
      std::string request = render_context(context);
      turn.request_excerpt = request.substr(0, 200);
      turn.prompt_tokens = usage.contains("prompt_tokens") ? usage["prompt_tokens"].get<long long>()
                                                           : estimate_tokens(request);
      turn.completion_tokens = usage.contains("completion_tokens") ? usage["completion_tokens"].get<long long>()
                                                                   : estimate_tokens(turn.response);
      turn.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      return turn;
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unexpected chat response: ") + e.what());
    }
  }
  throw BackendError("chat endpoint failed after " + std::to_string(config_.retry.max_retries) +
                     " retries: " + last_error);
}

}  // namespace anvil::agents
