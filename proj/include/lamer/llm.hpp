#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamer {

struct GenerationConfig {
  std::size_t num_answers = 5;
  std::size_t max_answer_tokens = 128;
  double temperature = 0.7;
  std::string model_name = "gpt-3.5-turbo";
  std::chrono::seconds timeout{60};
  std::size_t max_retries = 3;
  std::chrono::milliseconds retry_backoff{250};  // doubles per attempt
  std::size_t concurrency = 4;                   // batch-level in-flight bound
};

// Transport or protocol failure from a backend; generate() retries these.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  // One sampled completion. sample_index distinguishes repeated draws for
  // backends that vary by position; network backends ignore it.
  virtual std::string complete(const std::string& prompt, const GenerationConfig& cfg,
                               std::size_t sample_index) = 0;
  virtual std::string name() const = 0;
};

enum class StubMode { echo_top_candidate, fixed_lexicon, keyed_hash };

// Deterministic offline backends:
//   echo_top_candidate – text of the first "1." candidate line; the
//                        prompt's first line when no candidate is enumerated.
//   fixed_lexicon      – canned strings, cycled by sample_index.
//   keyed_hash         – string derived from a hash of the prompt's first
//                        line (the query line), so it ignores candidates.
std::unique_ptr<GenerationBackend> make_stub_backend(
    StubMode mode, std::vector<std::string> canned = {});

// Always throws GenerationError; exercises retry and fallback paths.
std::unique_ptr<GenerationBackend> make_failing_backend();

// OpenAI-compatible chat-completions client. base_url up to the API root,
// e.g. "https://api.openai.com/v1" or "http://127.0.0.1:8080/v1".
std::unique_ptr<GenerationBackend> make_http_backend(std::string base_url,
                                                     std::string api_key);

// On-disk cache keyed by (model, temperature, max tokens, sample index,
// prompt); hits skip the wrapped backend so reruns are free and
// deterministic.
std::unique_ptr<GenerationBackend> make_caching_backend(
    std::unique_ptr<GenerationBackend> inner, std::string cache_dir);

struct AnswerSet {
  std::vector<std::string> answers;  // non-empty after whitespace trim
};

struct GenerationOutcome {
  AnswerSet answers;                  // successful samples, in draw order
  std::vector<std::string> failures;  // one message per failed sample
  std::size_t requested = 0;
  std::size_t backend_calls = 0;
};

// Draws cfg.num_answers samples. Whitespace-only completions and transport
// failures are retried up to cfg.max_retries with exponential backoff; a
// sample that still fails is reported in failures, never silently dropped.
GenerationOutcome generate(GenerationBackend& backend, const std::string& prompt,
                           const GenerationConfig& cfg);

}  // namespace lamer
