#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"

namespace mmsi::cli {

void add_corpus_command(CLI::App& app);
void add_media_command(CLI::App& app);
void add_features_command(CLI::App& app);
void add_synth_command(CLI::App& app);
void add_model_commands(CLI::App& app);  // train, eval, ablate, report

// Calls fn(i) for every i in [0, n) on up to `jobs` threads. Returns one
// message per failed item, in index order.
std::vector<std::string> parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Progress line on stderr.
void note(std::string_view message);

std::vector<std::string> split_list(std::string_view text, char sep = ',');

}  // namespace mmsi::cli
