#pragma once

// Named pass/fail verdicts and a registry of runnable checks for the CLI.

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ghe {

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
  // extra machine-readable fields (key, value), e.g. per-cell traces
  std::vector<std::pair<std::string, std::string>> data;
};

using CheckFn = std::function<Verdict()>;

void register_check(const std::string& name, CheckFn fn);
bool have_check(const std::string& name);
std::vector<std::string> registered_checks();
Verdict run_check(const std::string& name);  // throws on unknown name

// idempotent: pulls in the registrations of every module
void register_all_checks();

std::string verdict_json(const Verdict& v);

}  // namespace ghe
