#pragma once

#include <map>
#include <string>

namespace mmsi::media::detail {

struct CommandResult {
  int exit_code = 0;
  std::string output;
};

std::string shell_quote(const std::string& text);
std::string substitute(std::string tmpl, const std::map<std::string, std::string>& values);
CommandResult run_command(const std::string& command);

}  // namespace mmsi::media::detail
