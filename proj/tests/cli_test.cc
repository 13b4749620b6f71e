// Copyright 2026 The qopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qopt/cli.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"

using namespace qopt;
using namespace qopt::cli;
namespace fs = std::filesystem;

namespace {

const Json kEuropean = Json::parse(R"({
  "model": {"spot": 2.0, "volatility": 0.1, "rate": 0.04, "maturity_days": 300},
  "qubits": 3,
  "option": {"type": "european_call", "strike": 2.0},
  "ae": {"method": "qpe_analytic", "m": 5, "runs": 50}
})");

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("qopt_cli_test_" + std::to_string(::getpid()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        fs::remove_all(path_);
    }
    const fs::path &path() const {
        return path_;
    }

private:
    fs::path path_;
};

std::string slurp(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

void spit(const fs::path &p, const std::string &text) {
    std::ofstream(p, std::ios::binary) << text;
}

int run_cli(const std::string &args, const std::string &env = "") {
    const std::string cmd = env + " " + QOPT_CLI_PATH + " " + args + " --quiet 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Provenance prov(uint64_t seed = 1) {
    return {"hash", seed};
}

}  // namespace

TEST(config, unknown_keys_rejected_at_every_level) {
    auto c = kEuropean;
    c["extra"] = 1;
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    c = kEuropean;
    c["model"]["drift"] = 0.1;
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    c = kEuropean;
    c["option"]["barrier"] = 2.0;
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    c = kEuropean;
    c["ae"]["schedule"] = 1;
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    c = kEuropean;
    c["convergence"] = Json::object();
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
}

TEST(config, type_and_value_errors) {
    auto c = kEuropean;
    c["qubits"] = "three";
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    c = kEuropean;
    c["model"]["maturity"] = 0.8;
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    c = kEuropean;
    c["model"]["volatility"] = -0.1;
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    c = kEuropean;
    c["ae"]["method"] = "iterative";
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    c = kEuropean;
    c.erase("option");
    EXPECT_THROW(run_command("price", c, prov()), ConfigError);
    EXPECT_THROW(run_command("mitigate", Json::object(), prov()), ConfigError);
    EXPECT_THROW(run_command("plot", kEuropean, prov()), ConfigError);
}

TEST(config, seed_precedence) {
    auto c = kEuropean;
    EXPECT_EQ(resolve_seed(c, {}), 0u);
    c["seed"] = 17;
    EXPECT_EQ(resolve_seed(c, {}), 17u);
    EXPECT_EQ(resolve_seed(c, 5u), 5u);
    c["seed"] = -1;
    EXPECT_THROW(resolve_seed(c, {}), ConfigError);
}

TEST(config, hash_ignores_key_order_and_whitespace) {
    const auto a = Json::parse(R"({"b": 1, "a": [1, 2]})");
    const auto b = Json::parse("{\"a\":[1,2],\n \"b\":1}");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 64u);
    EXPECT_NE(config_hash(a), config_hash(Json::parse(R"({"b": 2, "a": [1, 2]})")));
}

TEST(price, records_carry_provenance) {
    auto out = run_command("price", kEuropean, {"abc", 42});
    ASSERT_EQ(out.rows.size(), 50u);
    ASSERT_EQ(out.records.size(), 51u);
    for (const auto &r : out.records) {
        EXPECT_EQ(r["config_hash"], "abc");
        EXPECT_EQ(r["seed"], 42);
        EXPECT_EQ(r["version"], kVersion);
    }
    const auto &s = out.records.back();
    EXPECT_EQ(s["record"], "summary");
    EXPECT_GE(s["within_amplitude_bound_frequency"].get<double>(), kAeConfidence - 0.1);
}

TEST(price, circuit_over_budget_is_resource_error) {
    auto c = kEuropean;
    c["ae"] = Json::parse(R"({"method": "qpe_circuit", "m": 5, "max_qubits": 10})");
    EXPECT_THROW(run_command("price", c, prov()), ResourceError);
}

TEST(convergence, two_rows_per_m) {
    auto c = kEuropean;
    c.erase("ae");
    c["convergence"] = Json::parse(R"({"m_min": 3, "m_max": 6, "trials": 200})");
    auto out = run_command("convergence", c, prov());
    EXPECT_EQ(out.rows.size(), 8u);
    EXPECT_EQ(out.records.back()["record"], "summary");
}

TEST(mitigate, default_sweep_emits_eight_rows) {
    auto c = Json::parse(R"({"noise": {"p2": 0.01}, "mitigation": {"shots": 1000, "calibration_shots": 1000}})");
    auto out = run_command("mitigate", c, prov());
    EXPECT_EQ(out.rows.size(), 8u);
    EXPECT_EQ(out.rows.front()["spot"], 1.8);
    EXPECT_THROW(run_command("mitigate", Json::parse(R"({"mitigation": {}})"), prov()), ConfigError);
    c["noise"]["device_like"] = true;
    EXPECT_THROW(run_command("mitigate", c, prov()), ConfigError);
}

TEST(circuit_stats, empty_is_zero_and_qpe_grows) {
    auto c = kEuropean;
    c.erase("ae");
    c["stats"] = Json::parse(R"({"circuits": ["empty", "qpe"], "m": [1, 2, 3]})");
    auto out = run_command("circuit-stats", c, prov());
    ASSERT_EQ(out.rows.size(), 4u);
    EXPECT_EQ(out.rows[0]["total"], 0);
    EXPECT_EQ(out.rows[0]["depth"], 0);
    EXPECT_LT(out.rows[1]["total"].get<uint64_t>(), out.rows[2]["total"].get<uint64_t>());
    EXPECT_LT(out.rows[2]["total"].get<uint64_t>(), out.rows[3]["total"].get<uint64_t>());
}

TEST(csv, header_and_quoting) {
    std::vector<Record> rows(2);
    rows[0]["a"] = 1;
    rows[0]["b"] = "x,y";
    rows[1]["a"] = 0.5;
    rows[1]["b"] = nullptr;
    EXPECT_EQ(to_csv(rows), "a,b\n1,\"x,y\"\n0.5,\n");
    EXPECT_EQ(csv_path_for("out/r.jsonl"), fs::path("out/r.csv"));
    EXPECT_EQ(csv_path_for("r.txt"), fs::path("r.txt.csv"));
}

TEST(binary, malformed_config_exits_two_without_output) {
    TempDir dir;
    const auto cfg = dir.path() / "bad.json";
    const auto out = dir.path() / "out.jsonl";
    spit(cfg, "{\"model\": ");
    EXPECT_EQ(run_cli("price --config " + cfg.string() + " --out " + out.string()), 2);
    auto c = kEuropean;
    c["unknown"] = true;
    spit(cfg, c.dump());
    EXPECT_EQ(run_cli("price --config " + cfg.string() + " --out " + out.string()), 2);
    EXPECT_EQ(run_cli("price --config " + (dir.path() / "missing.json").string() + " --out " + out.string()), 2);
    EXPECT_EQ(run_cli("price --out " + out.string()), 2);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_FALSE(fs::exists(csv_path_for(out)));
    EXPECT_EQ(std::distance(fs::directory_iterator(dir.path()), fs::directory_iterator()), 1);
}

TEST(binary, budget_exceeded_exits_three) {
    TempDir dir;
    auto c = kEuropean;
    c["ae"] = Json::parse(R"({"method": "qpe_circuit", "m": 24})");
    spit(dir.path() / "c.json", c.dump());
    const auto out = dir.path() / "out.jsonl";
    EXPECT_EQ(run_cli("price --config " + (dir.path() / "c.json").string() + " --out " + out.string()), 3);
    EXPECT_FALSE(fs::exists(out));
}

TEST(binary, rerun_is_byte_identical_and_seed_changes_output) {
    TempDir dir;
    spit(dir.path() / "c.json", kEuropean.dump(2));
    const std::string base = "price --config " + (dir.path() / "c.json").string() + " --seed 3 --out ";
    ASSERT_EQ(run_cli(base + (dir.path() / "a.jsonl").string()), 0);
    ASSERT_EQ(run_cli(base + (dir.path() / "b.jsonl").string()), 0);
    EXPECT_EQ(slurp(dir.path() / "a.jsonl"), slurp(dir.path() / "b.jsonl"));
    EXPECT_EQ(slurp(dir.path() / "a.csv"), slurp(dir.path() / "b.csv"));
    const std::string other = "price --config " + (dir.path() / "c.json").string() + " --seed 4 --out ";
    ASSERT_EQ(run_cli(other + (dir.path() / "c.jsonl").string()), 0);
    EXPECT_NE(slurp(dir.path() / "a.jsonl"), slurp(dir.path() / "c.jsonl"));
}

TEST(binary, worker_count_does_not_change_output) {
    TempDir dir;
    auto c = kEuropean;
    c.erase("ae");
    c["convergence"] = Json::parse(R"({"m_min": 3, "m_max": 6, "trials": 300})");
    spit(dir.path() / "c.json", c.dump());
    const std::string base = "convergence --config " + (dir.path() / "c.json").string() + " --seed 8 --out ";
    ASSERT_EQ(run_cli(base + (dir.path() / "a.jsonl").string()), 0);
    ASSERT_EQ(run_cli(base + (dir.path() / "b.jsonl").string(), "QOPT_NUM_WORKERS=3"), 0);
    EXPECT_EQ(slurp(dir.path() / "a.jsonl"), slurp(dir.path() / "b.jsonl"));
}
