// SPDX-License-Identifier: Apache-2.0
#pragma once

// Text-completion backends that report per-token log-probabilities.
//
// Two adapters share one interface: RemoteBackend speaks an HTTP JSON
// completion protocol (see docs/remote_completion_protocol.md) and
// ScriptedBackend answers from an ordered rule list, for tests and dry runs.

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace acrag {

struct BackendDescriptor {
  std::string name;
  std::string endpoint;  // http(s) URL, or the literal "scripted"
  std::string model_id;
  std::chrono::milliseconds request_timeout{60'000};
  int max_tokens = 64;
  double temperature = 0.0;
  int top_logprobs = 5;
  std::string api_key;  // sent as a bearer token when non-empty

  bool is_scripted() const { return endpoint == "scripted"; }
  bool operator==(const BackendDescriptor&) const = default;
};

// Throws ConfigurationError when top_logprobs < 1, temperature < 0, etc.
void validate_descriptor(const BackendDescriptor& descriptor);

// token -> natural-log probability at one generated position.
using TokenLogprobs = std::map<std::string, double>;

enum class FinishReason { stop, length, error };

std::string_view to_string(FinishReason reason);

struct CompletionResult {
  std::string text;
  std::vector<TokenLogprobs> token_logprobs;  // one map per generated position
  FinishReason finish_reason = FinishReason::stop;

  bool operator==(const CompletionResult&) const = default;
};

// Tolerance on the per-position probability mass check.
inline constexpr double kProbabilityMassEpsilon = 1e-6;

// Throws ProtocolError if any log-probability is positive or NaN, or if a
// position's probability mass exceeds 1 + kProbabilityMassEpsilon.
void validate_completion(const CompletionResult& result);

// Keeps the k most likely tokens (ties broken by token text).
TokenLogprobs truncate_top(const TokenLogprobs& logprobs, int k);

// Position 0, unmodified. Throws EmptyCompletionError when there is none.
TokenLogprobs first_position_logprobs(const CompletionResult& result);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;

  // Throws InvalidArgument on an empty prompt.
  virtual CompletionResult complete(std::string_view prompt) const = 0;
};

struct ScriptedRule {
  // Every substring must occur in the prompt; pattern (ECMAScript regex,
  // searched) must also match when present. No conditions = catch-all.
  std::vector<std::string> contains;
  std::optional<std::string> pattern;
  std::string response_text;
  TokenLogprobs first_position_logprobs;

  bool is_catch_all() const { return contains.empty() && !pattern; }
  bool matches(std::string_view prompt) const;
};

struct ScriptedBehavior {
  std::vector<ScriptedRule> rules;

  // Throws ConfigurationError unless the last rule is a catch-all.
  void validate() const;

  // {"rules": [{"contains": [...], "pattern": "...", "response": "...",
  //             "logprobs": {"yes": -0.5}}]}; validated on load.
  static ScriptedBehavior from_json_text(std::string_view text);
  static ScriptedBehavior from_file(const std::string& path);
};

// Deterministic: the result depends only on (behavior, prompt). The first
// matching rule wins. A rule with logprobs yields one position, truncated to
// the descriptor's top_logprobs; a rule without yields none.
class ScriptedBackend final : public CompletionBackend {
 public:
  ScriptedBackend(BackendDescriptor descriptor, ScriptedBehavior behavior);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  CompletionResult complete(std::string_view prompt) const override;

  // Prompts received so far, in call order.
  std::vector<std::string> prompts() const;
  std::size_t call_count() const;

 private:
  BackendDescriptor descriptor_;
  ScriptedBehavior behavior_;
  mutable std::mutex log_mutex_;
  mutable std::vector<std::string> prompts_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;

  // Throws TransportError when the request cannot be completed.
  virtual HttpResponse post(const std::string& url, const std::string& body, const std::string& bearer_token,
                            std::chrono::milliseconds timeout) = 0;
};

// cpp-httplib backed transport; a fresh client per request, so it is safe to
// share across sessions.
class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const std::string& bearer_token,
                    std::chrono::milliseconds timeout) override;
};

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{250};  // doubled per retry
};

class RemoteBackend final : public CompletionBackend {
 public:
  explicit RemoteBackend(BackendDescriptor descriptor, std::shared_ptr<HttpTransport> transport = nullptr,
                         RetryPolicy retry = {});

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  CompletionResult complete(std::string_view prompt) const override;

  // Wire mapping, exposed for record/replay fixtures.
  static std::string build_request_body(const BackendDescriptor& descriptor, std::string_view prompt);
  static CompletionResult parse_response_body(std::string_view body, int top_logprobs);

 private:
  BackendDescriptor descriptor_;
  std::shared_ptr<HttpTransport> transport_;
  RetryPolicy retry_;
};

}  // namespace acrag
