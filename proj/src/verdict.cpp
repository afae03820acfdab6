#include "ghe/verdict.hpp"

#include <map>
#include <stdexcept>

#include <json.hpp>

namespace ghe {

namespace {

std::map<std::string, CheckFn>& registry() {
  static std::map<std::string, CheckFn> r;
  return r;
}

}  // namespace

void register_check(const std::string& name, CheckFn fn) { registry()[name] = std::move(fn); }

bool have_check(const std::string& name) { return registry().count(name) != 0; }

std::vector<std::string> registered_checks() {
  std::vector<std::string> out;
  for (auto& [k, v] : registry()) out.push_back(k);
  return out;
}

Verdict run_check(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) throw std::runtime_error("unknown check: " + name);
  return it->second();
}

void register_model_checks();
void register_hamiltonian_checks();
void register_recursion_checks();
void register_olver_checks();
namespace sim {
void register_sim_checks();
}

void register_all_checks() {
  static bool done = false;
  if (done) return;
  done = true;
  register_model_checks();
  register_hamiltonian_checks();
  register_recursion_checks();
  register_olver_checks();
  sim::register_sim_checks();
}

std::string verdict_json(const Verdict& v) {
  nlohmann::json j;
  j["name"] = v.name;
  j["pass"] = v.pass;
  j["detail"] = v.detail;
  if (!v.data.empty()) {
    nlohmann::json d = nlohmann::json::object();
    for (auto& [k, val] : v.data) d[k] = val;
    j["data"] = d;
  }
  return j.dump();
}

}  // namespace ghe
