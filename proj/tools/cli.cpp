#include "cli.hpp"

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "commands.hpp"
#include "mmsi/errors.hpp"

namespace mmsi::cli {

void note(std::string_view message) {
  static std::mutex mu;
  const std::lock_guard lock(mu);
  std::cerr << message << '\n';
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find(sep, start);
    std::string_view part = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (!part.empty()) out.emplace_back(part);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::vector<std::string> parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs < 1) throw UsageError(fmt::format("--jobs must be at least 1, got {}", jobs));
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const UsageError&) {
        throw;
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown failure";
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  if (threads <= 1) {
    worker();
  } else {
    std::exception_ptr usage;
    std::mutex mu;
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          const std::lock_guard lock(mu);
          if (!usage) usage = std::current_exception();
        }
      });
    }
    pool.clear();
    if (usage) std::rethrow_exception(usage);
  }
  std::vector<std::string> failed;
  for (std::string& e : errors) {
    if (!e.empty()) failed.push_back(std::move(e));
  }
  return failed;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Multimodal cheapfake detection: corpus building, media preprocessing, feature "
               "extraction, fusion-model training and ablation.",
               "mmsi"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  add_corpus_command(app);
  add_media_command(app);
  add_features_command(app);
  add_synth_command(app);
  add_model_commands(app);

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  } catch (...) {
    std::cerr << "internal error: unknown exception\n";
    return 3;
  }
}

}  // namespace mmsi::cli
