#include "svflow/config.hpp"

#include <algorithm>
#include <sstream>

#include "svflow/rng.hpp"

namespace svf {

void NetConfig::validate() const {
    if (levels < 1) throw DataError("levels must be >= 1");
    if (base_channels < 1) throw DataError("base_channels must be >= 1");
    bchd.validate();
    if (exp_steps < 0 || exp_steps > 12) throw DataError("exp_steps must be in [0,12]");
    if (variant == Variant::unet) return;  // pyramid fields ignored
    if (parameterization == Parameterization::svf) {
        if (propagation != Propagation::svf_sum && propagation != Propagation::svf_bchd)
            throw DataError("svf parameterization requires svf_sum or svf_bchd propagation");
    } else {
        if (propagation != Propagation::addition && propagation != Propagation::composition)
            throw DataError("displacement parameterization requires addition or composition");
    }
}

std::string to_string(Variant v) { return v == Variant::unet ? "unet" : "flowunet"; }

std::string to_string(Placement p) {
    switch (p) {
        case Placement::none: return "none";
        case Placement::pre: return "pre";
        default: return "post";
    }
}

std::string to_string(Parameterization p) {
    return p == Parameterization::displacement ? "displacement" : "svf";
}

std::string to_string(Propagation p) {
    switch (p) {
        case Propagation::addition: return "addition";
        case Propagation::composition: return "composition";
        case Propagation::svf_sum: return "svf_sum";
        default: return "svf_bchd";
    }
}

namespace {

Variant variant_from(const std::string& s) {
    if (s == "unet") return Variant::unet;
    if (s == "flowunet") return Variant::flowunet;
    throw DataError("unknown variant: " + s);
}

Placement placement_from(const std::string& s) {
    if (s == "none") return Placement::none;
    if (s == "pre") return Placement::pre;
    if (s == "post") return Placement::post;
    throw DataError("unknown deformation_placement: " + s);
}

Parameterization parameterization_from(const std::string& s) {
    if (s == "displacement") return Parameterization::displacement;
    if (s == "svf") return Parameterization::svf;
    throw DataError("unknown parameterization: " + s);
}

Propagation propagation_from(const std::string& s) {
    if (s == "addition") return Propagation::addition;
    if (s == "composition") return Propagation::composition;
    if (s == "svf_sum") return Propagation::svf_sum;
    if (s == "svf_bchd") return Propagation::svf_bchd;
    throw DataError("unknown propagation: " + s);
}

TrainMode mode_from(const std::string& s) {
    if (s == "supervised") return TrainMode::supervised;
    if (s == "unsupervised") return TrainMode::unsupervised;
    throw DataError("unknown mode: " + s);
}

double to_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("config: bad numeric value for " + key + ": " + s);
    }
}

int to_int(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("config: bad integer value for " + key + ": " + s);
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

KeyValues parse_key_values(std::istream& is) {
    KeyValues kv;
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("config: expected key=value, got: " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto kend = key.find_last_not_of(" \t");
        key = key.substr(0, kend == std::string::npos ? 0 : kend + 1);
        const auto vbegin = value.find_first_not_of(" \t");
        value = vbegin == std::string::npos ? "" : value.substr(vbegin);
        if (key.empty()) throw DataError("config: empty key in line: " + line);
        kv.emplace_back(std::move(key), std::move(value));
    }
    return kv;
}

void apply_config(const KeyValues& kv, NetConfig& net, TrainConfig& train) {
    for (const auto& [key, value] : kv) {
        if (key == "levels") net.levels = to_int(value, key);
        else if (key == "base_channels") net.base_channels = to_int(value, key);
        else if (key == "variant") net.variant = variant_from(value);
        else if (key == "deformation_placement") net.deformation_placement = placement_from(value);
        else if (key == "parameterization") net.parameterization = parameterization_from(value);
        else if (key == "propagation") net.propagation = propagation_from(value);
        else if (key == "bchd_truncation_order") net.bchd.truncation_order = to_int(value, key);
        else if (key == "exp_steps") net.exp_steps = to_int(value, key);
        else if (key == "mode") train.mode = mode_from(value);
        else if (key == "lambda") train.lambda = to_double(value, key);
        else if (key == "smooth_order") train.smooth_order = to_int(value, key);
        else if (key == "lr0") train.lr0 = to_double(value, key);
        else if (key == "momentum") train.momentum = to_double(value, key);
        else if (key == "plateau_factor") train.plateau_factor = to_double(value, key);
        else if (key == "plateau_patience") train.plateau_patience = to_int(value, key);
        else if (key == "plateau_rel_threshold") train.plateau_rel_threshold = to_double(value, key);
        else if (key == "lr_stop") train.lr_stop = to_double(value, key);
        else if (key == "batch_size") train.batch_size = to_int(value, key);
        else if (key == "seed") train.seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "max_epochs") train.max_epochs = to_int(value, key);
        else if (key == "deterministic") train.deterministic = (value == "1" || value == "true");
        else throw DataError("config: unknown key: " + key);
    }
    net.validate();
    train.validate();
}

KeyValues net_config_entries(const NetConfig& net) {
    return {
        {"levels", std::to_string(net.levels)},
        {"base_channels", std::to_string(net.base_channels)},
        {"variant", to_string(net.variant)},
        {"deformation_placement", to_string(net.deformation_placement)},
        {"parameterization", to_string(net.parameterization)},
        {"propagation", to_string(net.propagation)},
        {"bchd_truncation_order", std::to_string(net.bchd.truncation_order)},
        {"exp_steps", std::to_string(net.exp_steps)},
    };
}

KeyValues train_config_entries(const TrainConfig& t) {
    return {
        {"mode", t.mode == TrainMode::supervised ? "supervised" : "unsupervised"},
        {"lambda", fmt(t.lambda)},
        {"smooth_order", std::to_string(t.smooth_order)},
        {"lr0", fmt(t.lr0)},
        {"momentum", fmt(t.momentum)},
        {"plateau_factor", fmt(t.plateau_factor)},
        {"plateau_patience", std::to_string(t.plateau_patience)},
        {"plateau_rel_threshold", fmt(t.plateau_rel_threshold)},
        {"lr_stop", fmt(t.lr_stop)},
        {"batch_size", std::to_string(t.batch_size)},
        {"seed", std::to_string(t.seed)},
        {"max_epochs", std::to_string(t.max_epochs)},
        {"deterministic", t.deterministic ? "1" : "0"},
    };
}

std::string config_text(const NetConfig& net, const TrainConfig& train) {
    std::ostringstream os;
    for (const auto& [k, v] : net_config_entries(net)) os << k << "=" << v << "\n";
    for (const auto& [k, v] : train_config_entries(train)) os << k << "=" << v << "\n";
    return os.str();
}

std::uint64_t config_hash(const NetConfig& net, const TrainConfig& train) {
    const std::string text = config_text(net, train);
    return fnv1a64(text.data(), text.size());
}

NetConfig net_config_from_entries(const KeyValues& kv) {
    NetConfig net;
    TrainConfig scratch;
    KeyValues net_only;
    for (const auto& e : kv) {
        static const char* keys[] = {"levels",           "base_channels",
                                     "variant",          "deformation_placement",
                                     "parameterization", "propagation",
                                     "bchd_truncation_order", "exp_steps"};
        for (const char* k : keys)
            if (e.first == k) {
                net_only.push_back(e);
                break;
            }
    }
    apply_config(net_only, net, scratch);
    return net;
}

NetConfig model_preset(const std::string& raw, int levels, int base_channels) {
    std::string name = raw;
    std::replace(name.begin(), name.end(), '_', '-');

    NetConfig cfg;
    cfg.levels = levels;
    cfg.base_channels = base_channels;

    if (name == "unet") {
        cfg.variant = Variant::unet;
        cfg.parameterization = Parameterization::displacement;
        cfg.propagation = Propagation::addition;
        cfg.deformation_placement = Placement::none;
        return cfg;
    }
    if (name == "svf-sum" || name == "svf-bchd") {
        cfg.variant = Variant::flowunet;
        cfg.parameterization = Parameterization::svf;
        cfg.deformation_placement = Placement::pre;
        cfg.propagation = name == "svf-sum" ? Propagation::svf_sum : Propagation::svf_bchd;
        return cfg;
    }
    if (name.rfind("flowunet-", 0) == 0) {
        std::string rest = name.substr(9);
        Propagation prop = Propagation::addition;
        if (rest.size() > 12 && rest.rfind("-composition") == rest.size() - 12) {
            prop = Propagation::composition;
            rest = rest.substr(0, rest.size() - 12);
        } else if (rest.size() > 9 && rest.rfind("-addition") == rest.size() - 9) {
            rest = rest.substr(0, rest.size() - 9);
        }
        cfg.variant = Variant::flowunet;
        cfg.parameterization = Parameterization::displacement;
        cfg.propagation = prop;
        cfg.deformation_placement = placement_from(rest);
        return cfg;
    }
    throw DataError("unknown model preset: " + raw);
}

}  // namespace svf
