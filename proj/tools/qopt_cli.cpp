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

// qopt: price, convergence, mitigate, circuit-stats from a JSON config.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qopt/cli.hpp"

namespace {

using namespace qopt::cli;

struct Options {
    std::string config;
    std::optional<uint64_t> seed;
    std::string out;
    bool quiet = false;
};

int run(const std::string &command, const Options &opt) {
    const Json config = load_config(opt.config);
    const uint64_t seed = resolve_seed(config, opt.seed);
    std::filesystem::path out = opt.out;
    if (out.empty()) {
        out = detail::string(config, "", "output", command + ".jsonl");
    }
    const Provenance prov{config_hash(config), seed};
    const CommandOutput result = run_command(command, config, prov);
    write_atomic(out, to_jsonl(result.records));
    write_atomic(csv_path_for(out), to_csv(result.rows));
    if (!opt.quiet) {
        std::cout << command << ": " << result.summary << "\n"
                  << "wrote " << out.string() << " and " << csv_path_for(out).string() << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Amplitude-estimation option pricing runs driven by a JSON config"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Options opt;
    for (const auto &name : command_names()) {
        auto *sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config, "JSON run config")->required();
        sub->add_option("--seed", opt.seed, "master seed, overrides the config");
        sub->add_option("--out", opt.out, "result .jsonl path; the CSV goes next to it");
        sub->add_flag("--quiet", opt.quiet, "no terminal summary");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, opt);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const qopt::ResourceError &e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return kExitResource;
    } catch (const std::exception &e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
