// Copyright 2026 The evosquish Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVOSQUISH_TESTS_SUBPROCESS_HPP_
#define EVOSQUISH_TESTS_SUBPROCESS_HPP_

// Runs the CLI through the shell and captures stdout plus the exit status.

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace evosquish::testing {

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

inline CommandResult RunCommand(const std::string& command, bool with_stderr = false) {
  CommandResult result;
  FILE* pipe = ::popen((command + (with_stderr ? " 2>&1" : " 2>/dev/null")).c_str(), "r");
  if (!pipe) return result;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) result.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

inline CommandResult RunCli(const std::string& args, bool with_stderr = false) {
  return RunCommand(std::string("'") + EVOSQUISH_CLI_PATH + "' " + args, with_stderr);
}

inline std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void Spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// Value after "key: " on its own line, or empty.
inline std::string Field(const std::string& out, const std::string& key) {
  const std::string tag = key + ": ";
  std::size_t at = out.rfind("\n" + tag);
  at = at == std::string::npos ? (out.rfind(tag, 0) == 0 ? 0 : std::string::npos) : at + 1;
  if (at == std::string::npos) return {};
  const std::size_t begin = at + tag.size();
  const std::size_t end = out.find_first_of(" \n", begin);
  return out.substr(begin, end - begin);
}

}  // namespace evosquish::testing

#endif  // EVOSQUISH_TESTS_SUBPROCESS_HPP_
