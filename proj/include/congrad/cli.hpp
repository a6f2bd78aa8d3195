#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace congrad {

// Exit codes: 0 success, 1 runtime failure (diverged run, I/O error,
// failing verify suite), 2 usage or config error.
int cmd_train(const std::string& config_path,
              std::optional<std::uint64_t> seed_override,
              const std::string& out_dir);

// suite may be any name from verify_suite_names() or "all"
int cmd_verify(const std::string& suite, int cases, std::uint64_t seed);

}  // namespace congrad
