#include "ghoststat/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ghoststat/errors.hpp"
#include "ghoststat/pgm.hpp"

using nlohmann::json;

namespace ghoststat {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

double parse_real(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse number for " + what + ": '" + s + "'");
    }
}

std::vector<double> parse_real_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(s, ','))
        out.push_back(parse_real(part, what));
    return out;
}

} // namespace

DistributionSpec parse_distribution(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts[0] == "uniform") {
        if (parts.size() != 3)
            throw ConfigError("uniform distribution needs uniform:<lo>:<hi>");
        return DistributionSpec::uniform(parse_real(parts[1], "uniform lo"),
                                         parse_real(parts[2], "uniform hi"));
    }
    if (parts[0] == "bernoulli") {
        if (parts.size() != 4)
            throw ConfigError("bernoulli distribution needs bernoulli:<p>:<v0>:<v1>");
        return DistributionSpec::bernoulli(parse_real(parts[1], "bernoulli p"),
                                           parse_real(parts[2], "bernoulli value0"),
                                           parse_real(parts[3], "bernoulli value1"));
    }
    if (parts[0] == "discrete") {
        if (parts.size() != 3)
            throw ConfigError("discrete distribution needs discrete:<v1,v2,..>:<p1,p2,..>");
        return DistributionSpec::discrete(parse_real_list(parts[1], "discrete values"),
                                          parse_real_list(parts[2], "discrete probs"));
    }
    throw ConfigError("unknown distribution: " + text);
}

NoiseModel parse_noise(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts[0] == "none") {
        if (parts.size() != 1) throw ConfigError("noise 'none' takes no parameters");
        return NoiseModel::none();
    }
    if (parts[0] == "gaussian") {
        if (parts.size() != 3)
            throw ConfigError("gaussian noise needs gaussian:<mean>:<variance>");
        return NoiseModel::gaussian(parse_real(parts[1], "noise mean"),
                                    parse_real(parts[2], "noise variance"));
    }
    throw ConfigError("unknown noise model: " + text);
}

std::vector<TransformSpec> parse_transform_list(const std::string& text) {
    std::vector<TransformSpec> out;
    for (const auto& name : split(text, ','))
        out.push_back(transform_from_string(name));
    if (out.empty()) throw ConfigError("transform list is empty");
    return out;
}

std::vector<Estimator> parse_estimator_list(const std::string& text) {
    std::vector<Estimator> out;
    for (const auto& name : split(text, ','))
        out.push_back(estimator_from_string(name));
    if (out.empty()) throw ConfigError("estimator list is empty");
    return out;
}

void parse_image_source(const std::string& text, RunConfig& config) {
    if (text.rfind("card:", 0) == 0) {
        // card:<W>x<H>:<layout>:<level,level,...>
        const auto parts = split(text, ':');
        if (parts.size() != 4)
            throw ConfigError("card image needs card:<WxH>:<layout>:<levels>");
        const auto dims = split(parts[1], 'x');
        if (dims.size() != 2)
            throw ConfigError("card dimensions need <width>x<height>");
        config.use_card = true;
        config.card_width = static_cast<std::size_t>(parse_real(dims[0], "card width"));
        config.card_height = static_cast<std::size_t>(parse_real(dims[1], "card height"));
        config.card_layout = card_layout_from_string(parts[2]);
        config.card_levels = parse_real_list(parts[3], "card levels");
        config.image_path.clear();
        return;
    }
    config.use_card = false;
    config.image_path = text;
}

GrayImage RunConfig::make_image() const {
    if (use_card)
        return make_test_card(card_width, card_height, card_levels, card_layout);
    return read_pgm(image_path);
}

void RunConfig::validate() const {
    dist.validate();
    for (const auto& t : transforms) validate_pairing(dist, t);
    if (transforms.empty()) throw ConfigError("config needs at least one transform");
    if (estimators.empty()) throw ConfigError("config needs at least one estimator");
    if (T < 2) throw ConfigError("config needs T >= 2");
    if (gamma <= 0.0) throw ConfigError("config needs gamma > 0");
    noise.validate();
    if (threads < 0) throw ConfigError("threads must be >= 0");
    make_image().validate();
}

namespace {

void apply_key(RunConfig& config, const std::string& key, const std::string& value,
               const std::string& where) {
    try {
        if (key == "image") {
            parse_image_source(value, config);
        } else if (key == "distribution") {
            config.dist = parse_distribution(value);
        } else if (key == "transforms") {
            config.transforms = parse_transform_list(value);
        } else if (key == "estimators") {
            config.estimators = parse_estimator_list(value);
        } else if (key == "T") {
            const double v = parse_real(value, "T");
            if (v < 2 || v != std::floor(v)) throw ConfigError("T must be an integer >= 2");
            config.T = static_cast<std::size_t>(v);
        } else if (key == "gamma") {
            config.gamma = parse_real(value, "gamma");
        } else if (key == "noise") {
            config.noise = parse_noise(value);
        } else if (key == "seed") {
            try {
                config.seed = std::stoull(value);
            } catch (const std::exception&) {
                throw ConfigError("cannot parse seed: '" + value + "'");
            }
        } else if (key == "out") {
            config.out_dir = value;
        } else if (key == "threads") {
            config.threads = static_cast<int>(parse_real(value, "threads"));
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

RunConfig parse_flat(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        std::ostringstream where;
        where << origin << ":" << lineno;
        if (eq == std::string::npos)
            throw ConfigError(where.str() + ": expected key = value");
        apply_key(config, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)),
                  where.str());
    }
    return config;
}

std::string json_scalar_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) {
        std::ostringstream s;
        s.precision(17);
        s << v.get<double>();
        return s.str();
    }
    throw ConfigError("config values must be strings or numbers");
}

RunConfig parse_json_config(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": config must be a JSON object");
    RunConfig config;
    for (const auto& [key, value] : j.items())
        apply_key(config, key, json_scalar_to_string(value), origin + ": key '" + key + "'");
    return config;
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) continue;
        if (ch == '{') return parse_json_config(text, origin);
        break;
    }
    return parse_flat(text, origin);
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string preset_text(const std::string& name) {
    if (name == "paper-sim") {
        return "# Four-level object, uniform speckle, noiseless bucket.\n"
               "image = card:64x64:nested-rects:0,0.4,0.7,1.0\n"
               "distribution = uniform:0.1:1\n"
               "transforms = identity,power3,exp,log\n"
               "estimators = delta-g2\n"
               "T = 100000\n"
               "gamma = 1\n"
               "noise = none\n"
               "seed = 20260827\n";
    }
    if (name == "paper-exp") {
        return "# Binary object, on/off speckle, additive gaussian detector noise.\n"
               "# The log transform is excluded: half the speckle values are 0.\n"
               "image = card:64x64:nested-rects:0,1\n"
               "distribution = bernoulli:0.5:0:1\n"
               "transforms = identity,power3,exp\n"
               "estimators = delta-g2\n"
               "T = 11940\n"
               "gamma = 10000\n"
               "noise = gaussian:2.0985e6:1.2260e10\n"
               "seed = 118\n";
    }
    throw ConfigError("unknown preset: " + name + " (available: paper-sim, paper-exp)");
}

RunConfig preset_config(const std::string& name) {
    return parse_config_text(preset_text(name), "preset:" + name);
}

} // namespace ghoststat
