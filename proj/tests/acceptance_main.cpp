// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
//
//   spde_acceptance [--quick] [A1 A5 ...]

#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "spde/acceptance.hpp"

int main(int argc, char** argv) {
    spde::acceptance::Options opts;
    std::vector<std::string> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--quick") == 0)
            opts.quick = true;
        else
            only.emplace_back(argv[i]);
    }
    spde::acceptance::CsvTables tables;
    const auto results = spde::acceptance::run_all(opts, tables, only, [](const auto& c) {
        std::cout << c.summary() << std::endl;
        for (const auto& check : c.checks)
            if (!check.passed || !check.detail.empty())
                std::cout << "    " << check.name << ": " << check.detail << (check.asserted ? "" : " (monitored)") << "\n";
    });
    int failed = 0;
    for (const auto& c : results)
        if (!c.passed()) ++failed;
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
