#include "lamer/llm.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lamer/detail/fnv.hpp"

namespace lamer {

namespace {

std::string trim(std::string_view s) {
  std::size_t start = 0, end = s.size();
  while (start < end && std::isspace(static_cast<unsigned char>(s[start]))) ++start;
  while (end > start && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(start, end - start));
}

std::string first_line(const std::string& text) {
  const auto nl = text.find('\n');
  return nl == std::string::npos ? text : text.substr(0, nl);
}

class StubBackend : public GenerationBackend {
 public:
  StubBackend(StubMode mode, std::vector<std::string> canned)
      : mode_(mode), canned_(std::move(canned)) {
    if (mode_ == StubMode::fixed_lexicon && canned_.empty())
      canned_ = {"a canned answer passage"};
  }

  std::string complete(const std::string& prompt, const GenerationConfig&,
                       std::size_t sample_index) override {
    switch (mode_) {
      case StubMode::echo_top_candidate: {
        std::istringstream lines(prompt);
        std::string line;
        while (std::getline(lines, line))
          if (line.rfind("1.", 0) == 0) return line.substr(2);
        return first_line(prompt);
      }
      case StubMode::fixed_lexicon:
        return canned_[sample_index % canned_.size()];
      case StubMode::keyed_hash:
        return "generated answer " + detail::fnv1a_hex(first_line(prompt));
    }
    return {};
  }

  std::string name() const override {
    switch (mode_) {
      case StubMode::echo_top_candidate: return "stub:echo_top_candidate";
      case StubMode::fixed_lexicon: return "stub:fixed_lexicon";
      case StubMode::keyed_hash: return "stub:keyed_hash";
    }
    return "stub";
  }

 private:
  StubMode mode_;
  std::vector<std::string> canned_;
};

class FailingBackend : public GenerationBackend {
 public:
  std::string complete(const std::string&, const GenerationConfig&,
                       std::size_t) override {
    throw GenerationError("backend configured to fail");
  }
  std::string name() const override { return "failing"; }
};

class HttpBackend : public GenerationBackend {
 public:
  HttpBackend(std::string base_url, std::string api_key) : api_key_(std::move(api_key)) {
    // Split "scheme://host[:port]/prefix" into client root and path prefix.
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
      throw std::invalid_argument("base url must start with http:// or https://: " +
                                  base_url);
    auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      root_ = base_url;
    } else {
      root_ = base_url.substr(0, path_start);
      path_prefix_ = base_url.substr(path_start);
      while (!path_prefix_.empty() && path_prefix_.back() == '/')
        path_prefix_.pop_back();
    }
  }

  std::string complete(const std::string& prompt, const GenerationConfig& cfg,
                       std::size_t) override {
    nlohmann::json body;
    body["model"] = cfg.model_name;
    body["messages"] = nlohmann::json::array(
        {nlohmann::json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = cfg.temperature;
    body["max_tokens"] = cfg.max_answer_tokens;
    body["n"] = 1;

    httplib::Client client(root_);
    client.set_connection_timeout(static_cast<time_t>(cfg.timeout.count()), 0);
    client.set_read_timeout(static_cast<time_t>(cfg.timeout.count()), 0);
    httplib::Headers headers;
    if (!api_key_.empty())
      headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res)
      throw GenerationError("http request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw GenerationError("http status " + std::to_string(res->status) + ": " +
                            res->body.substr(0, 200));
    try {
      nlohmann::json reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw GenerationError(std::string("malformed completion response: ") + e.what());
    }
  }

  std::string name() const override { return "http:" + root_; }

 private:
  std::string root_;
  std::string path_prefix_;
  std::string api_key_;
};

class CachingBackend : public GenerationBackend {
 public:
  CachingBackend(std::unique_ptr<GenerationBackend> inner, std::string cache_dir)
      : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::string complete(const std::string& prompt, const GenerationConfig& cfg,
                       std::size_t sample_index) override {
    const std::string key = cache_key(prompt, cfg, sample_index);
    const std::filesystem::path path = std::filesystem::path(dir_) / (key + ".json");
    if (std::filesystem::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      try {
        nlohmann::json entry = nlohmann::json::parse(in);
        if (entry.at("prompt").get<std::string>() == prompt)
          return entry.at("answer").get<std::string>();
      } catch (const nlohmann::json::exception&) {
        // unreadable entry: fall through and regenerate
      }
    }
    const std::string answer = inner_->complete(prompt, cfg, sample_index);
    nlohmann::json entry;
    entry["model"] = cfg.model_name;
    entry["temperature"] = cfg.temperature;
    entry["max_answer_tokens"] = cfg.max_answer_tokens;
    entry["sample_index"] = sample_index;
    entry["prompt"] = prompt;
    entry["answer"] = answer;
    // Unique temp name per write: concurrent workers may race on one key.
    static std::atomic<std::uint64_t> write_counter{0};
    const std::filesystem::path tmp =
        path.string() + ".tmp" + std::to_string(write_counter.fetch_add(1));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << entry.dump();
    }
    std::filesystem::rename(tmp, path);
    return answer;
  }

  std::string name() const override { return "cache(" + inner_->name() + ")"; }

 private:
  std::string cache_key(const std::string& prompt, const GenerationConfig& cfg,
                        std::size_t sample_index) const {
    std::ostringstream material;
    material << cfg.model_name << "|" << cfg.temperature << "|"
             << cfg.max_answer_tokens << "|" << sample_index << "|" << prompt;
    return detail::fnv1a_hex(material.str());
  }

  std::unique_ptr<GenerationBackend> inner_;
  std::string dir_;
};

}  // namespace

std::unique_ptr<GenerationBackend> make_stub_backend(StubMode mode,
                                                     std::vector<std::string> canned) {
  return std::make_unique<StubBackend>(mode, std::move(canned));
}

std::unique_ptr<GenerationBackend> make_failing_backend() {
  return std::make_unique<FailingBackend>();
}

std::unique_ptr<GenerationBackend> make_http_backend(std::string base_url,
                                                     std::string api_key) {
  return std::make_unique<HttpBackend>(std::move(base_url), std::move(api_key));
}

std::unique_ptr<GenerationBackend> make_caching_backend(
    std::unique_ptr<GenerationBackend> inner, std::string cache_dir) {
  return std::make_unique<CachingBackend>(std::move(inner), std::move(cache_dir));
}

GenerationOutcome generate(GenerationBackend& backend, const std::string& prompt,
                           const GenerationConfig& cfg) {
  if (prompt.empty()) throw std::invalid_argument("empty prompt");
  GenerationOutcome outcome;
  outcome.requested = cfg.num_answers;
  for (std::size_t sample = 0; sample < cfg.num_answers; ++sample) {
    std::string last_error;
    bool ok = false;
    for (std::size_t attempt = 0; attempt <= cfg.max_retries && !ok; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(cfg.retry_backoff * (1u << (attempt - 1)));
      try {
        ++outcome.backend_calls;
        const std::string answer = trim(backend.complete(prompt, cfg, sample));
        if (answer.empty()) {
          last_error = "whitespace-only completion";
          continue;
        }
        outcome.answers.answers.push_back(answer);
        ok = true;
      } catch (const GenerationError& e) {
        last_error = e.what();
      }
    }
    if (!ok)
      outcome.failures.push_back("sample " + std::to_string(sample) + ": " +
                                 last_error);
  }
  return outcome;
}

}  // namespace lamer
