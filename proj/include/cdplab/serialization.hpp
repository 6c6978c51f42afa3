#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "cdplab/environments.hpp"
#include "cdplab/function_class.hpp"
#include "cdplab/olive.hpp"
#include "cdplab/oracle.hpp"

namespace cdplab {

using json = nlohmann::json;

// Versioned environment documents ("cdplab-env", version 1); schema documented
// in docs/formats.md.
json env_to_json(const Env& env);
Env env_from_json(const json& j);

json class_to_json(const FunctionClass& cls);
FunctionClass class_from_json(const json& j);

json factorization_to_json(const BellmanFactorization& fact);
BellmanFactorization factorization_from_json(const json& j);

json result_to_json(const OliveResult& result);
OliveResult result_from_json(const json& j);

// Iteration log, one CSV row per record:
// t,f_t,Vhat,sum_self_err,h_t,survivors_before,survivors_after,episodes_cum
std::string iteration_csv(const OliveResult& result);

// FNV-1a over the canonical serialized form; stable across runs and builds.
std::uint64_t fingerprint(const json& j);
std::string fingerprint_hex(const json& j);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace cdplab
