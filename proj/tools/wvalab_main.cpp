// Copyright 2026 The wvalab Authors
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

#include <iostream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"
#include "wvalab/cli.hpp"

int main(int argc, char **argv) {
    CLI::App app{"wvalab: weak-value amplification laboratory"};
    app.require_subcommand(1);
    wvalab::cli::RunOptions opts;
    std::string out, format;
    std::uint64_t seed = 0;
    const std::pair<const char *, const char *> commands[] = {
        {"shift", "weak-to-strong pointer shift curves"},
        {"budget", "information budget and max-FI curves"},
        {"noise", "correlated-noise information table"},
        {"scheme", "run one amplification scheme"},
        {"estimate", "Monte Carlo estimation against the Cramer-Rao bound"},
    };
    for (const auto &[name, help] : commands) {
        CLI::App *sub = app.add_subcommand(name, help);
        sub->add_option("--config", opts.config_path, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "seed, overrides the config");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        nlohmann::json j = {{"error", {{"code", "UsageError"}, {"message", e.what()}}}};
        std::cerr << j.dump() << "\n";
        return 2;
    }
    CLI::App *sub = app.get_subcommands().front();
    opts.command = sub->get_name();
    if (sub->count("--out")) {
        opts.out = out;
    }
    if (sub->count("--seed")) {
        opts.seed = seed;
    }
    if (sub->count("--format")) {
        opts.format = format;
    }
    return wvalab::cli::run(opts, std::cout, std::cerr);
}
