#ifndef RELACTRL_CLI_HPP
#define RELACTRL_CLI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "relactrl/backbone.hpp"
#include "relactrl/costmodel.hpp"

namespace relactrl {

// Resolved run configuration loaded from config JSON.
struct RunConfig {
    ArchSpec arch;
    int64_t grid_h = 32;
    int64_t grid_w = 32;
    uint64_t model_seed = 1;
    uint64_t input_seed = 1;
};

RunConfig load_config_json(const std::string& path);
PlacementPlan load_plan_json(const std::string& path);

// Exit codes: 0 success, 2 invalid input, 3 verification failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace relactrl

#endif
