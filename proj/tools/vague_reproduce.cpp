// Runs the self-checking desk-scale experiments and prints one JSON report
// per target. Exits nonzero when any target fails its expectation.
#include <iostream>
#include <string>
#include <vector>

#include "vague/errors.hpp"
#include "vague/harness.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> targets(argv + 1, argv + argc);
    if (!targets.empty() && (targets[0] == "--help" || targets[0] == "-h")) {
        std::cout << "usage: vague-reproduce [target...]\n\nruns every target when none "
                     "are named; known targets:\n";
        for (const std::string& t : vague::harness::reproduce_targets())
            std::cout << "  " << t << "\n";
        return 0;
    }
    if (targets.empty()) targets = vague::harness::reproduce_targets();

    int failures = 0;
    for (const std::string& target : targets) {
        try {
            vague::harness::ReproduceReport report = vague::harness::reproduce(target);
            std::cout << report.to_json().dump() << "\n";
            if (!report.pass) ++failures;
        } catch (const vague::UsageError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        } catch (const vague::DataError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }
    return failures == 0 ? 0 : 4;
}
