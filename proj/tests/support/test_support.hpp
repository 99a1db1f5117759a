#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "vmtco2/io.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(VMTCO2_SOURCE_DIR); }
inline fs::path data_dir() { return source_dir() / "tests" / "data"; }
inline fs::path golden_dir() { return source_dir() / "tests" / "golden"; }

/// Fresh, empty scratch directory under the system temp dir.
inline fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("vmtco2_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct RunResult {
  int code = 0;
  std::string err;
};

/// Runs the CLI with `args`, capturing stderr.
inline RunResult run_cli(const std::string& args, const fs::path& workdir = {}) {
  const auto err_file = fs::temp_directory_path() / ("vmtco2_stderr_" + std::to_string(::getpid()) + ".txt");
  std::string cmd;
  if (!workdir.empty()) cmd += "cd '" + workdir.string() + "' && ";
  cmd += std::string("'") + VMTCO2_CLI + "' " + args + " >/dev/null 2>'" + err_file.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = vmtco2::io::read_text(err_file);
  return r;
}

/// File name -> contents for every regular file directly under `dir`.
inline std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out[e.path().filename().string()] = vmtco2::io::read_text(e.path());
  return out;
}

inline void write_file(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace testing
