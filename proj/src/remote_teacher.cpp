#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lmtx/error.hpp"
#include "lmtx/teacher.hpp"

namespace lmtx {
namespace {

using json = nlohmann::json;

struct ParsedEndpoint {
  std::string host_port;
  std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  if (endpoint.rfind("https://", 0) == 0) {
    fail(ErrorCode::TypeMismatch,
         "teacher endpoint must use http, TLS is not built in: " + endpoint);
  }
  if (endpoint.rfind("http://", 0) != 0) {
    fail(ErrorCode::TypeMismatch, "teacher endpoint must start with http://: " + endpoint);
  }
  const std::size_t slash = endpoint.find('/', 7);
  ParsedEndpoint parsed;
  if (slash == std::string::npos) {
    parsed.host_port = endpoint;
    parsed.path = "/";
  } else {
    parsed.host_port = endpoint.substr(0, slash);
    parsed.path = endpoint.substr(slash);
  }
  return parsed;
}

std::string extract_reply(const std::string& body) {
  try {
    const json reply = json::parse(body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& ex) {
    fail(ErrorCode::RemoteMalformedResponse,
         std::string("cannot extract choices[0].message.content: ") + ex.what());
  }
}

}  // namespace

RemoteTeacher::RemoteTeacher(RemoteTeacherConfig config) : config_(std::move(config)) {
  const ParsedEndpoint parsed = parse_endpoint(config_.endpoint);
  host_port_ = parsed.host_port;
  path_ = parsed.path;
}

Verdict RemoteTeacher::judge_pair(std::uint32_t doc_id, std::uint32_t label_id,
                                  const std::string& prompt, std::string_view doc_text,
                                  std::string_view label_text) {
  ++calls_;

  const json request{{"model", config_.model},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                     {"temperature", 0},
                     {"max_tokens", 8}};
  const std::string body = request.dump();

  httplib::Headers headers;
  if (const char* token = std::getenv("LMTX_TEACHER_TOKEN")) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100) * (1 << (attempt - 1)));
    }
    httplib::Client client(host_port_);
    client.set_connection_timeout(config_.timeout_ms / 1000,
                                  (config_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_write_timeout(config_.timeout_ms / 1000,
                             (config_.timeout_ms % 1000) * 1000);

    const auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
      last_failure = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status != 200) {
      last_failure = "http status " + std::to_string(result->status);
      continue;
    }
    return parse_verdict(extract_reply(result->body));
  }
  fail(ErrorCode::RemoteUnavailable,
       "teacher endpoint " + config_.endpoint + " failed after " +
           std::to_string(config_.max_retries + 1) + " attempts; last: " + last_failure);
}

}  // namespace lmtx
