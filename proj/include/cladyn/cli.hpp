#pragma once

#include <map>
#include <string>
#include <vector>

namespace cladyn {

/// Summary of one CLI invocation, serialized next to the CSV artifacts.
struct RunReport {
    std::string scenario_name;
    std::string mode;
    double wall_time_seconds = 0.0;
    unsigned long long seed = 0;
    std::map<std::string, std::string> diagnostics;
    std::vector<std::string> artifact_paths;
};

/// Entry point of the command-line harness. argv excludes the program name.
/// Exit codes: 0 success, 1 validation error, 2 integration error, 3 usage.
int dispatch(const std::vector<std::string>& argv);

}  // namespace cladyn
