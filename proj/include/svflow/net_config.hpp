#pragma once

#include <string>

#include "svflow/svf_algebra.hpp"

namespace svf {

enum class Variant { unet, flowunet };
enum class Placement { none, pre, post };
enum class Parameterization { displacement, svf };
enum class Propagation { addition, composition, svf_sum, svf_bchd };

struct NetConfig {
    int levels = 3;
    int base_channels = 8;
    Variant variant = Variant::flowunet;
    Placement deformation_placement = Placement::pre;
    Parameterization parameterization = Parameterization::svf;
    Propagation propagation = Propagation::svf_bchd;
    BchdConfig bchd{};
    int exp_steps = 0;  // 0 = adaptive

    void validate() const;
};

std::string to_string(Variant v);
std::string to_string(Placement p);
std::string to_string(Parameterization p);
std::string to_string(Propagation p);

// Named presets: unet; flowunet-{none,pre,post}[-addition|-composition];
// svf-sum; svf-bchd. '-' and '_' are interchangeable.
NetConfig model_preset(const std::string& name, int levels = 3, int base_channels = 8);

}  // namespace svf
