#include "hetree/error.hpp"

namespace hetree {

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string msg = "ensemble failed validation";
  for (const auto& v : violations) msg += "\n  - " + v;
  return msg;
}

}  // namespace

CompileError::CompileError(std::vector<std::string> violations)
    : InvalidInput(join_violations(violations)), violations_(std::move(violations)) {}

}  // namespace hetree
