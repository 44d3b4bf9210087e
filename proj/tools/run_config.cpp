#include "run_config.hpp"

#include "loadgen/error.hpp"
#include "loadgen/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>

namespace loadgen::cli {

namespace {

std::string normalize_key(std::string_view key)
{
    std::string out(key);
    std::replace(out.begin(), out.end(), '_', '-');
    return out;
}

const nlohmann::json* find_key(const nlohmann::json& object, std::string_view key)
{
    for (auto it = object.begin(); it != object.end(); ++it) {
        if (normalize_key(it.key()) == key) {
            return &it.value();
        }
    }
    return nullptr;
}

} // namespace

RunConfig RunConfig::load(const std::string& path)
{
    RunConfig config;
    try {
        config.doc_ = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
    if (!config.doc_.is_object()) {
        throw InputError(path + ": configuration must be a JSON object");
    }
    return config;
}

std::optional<std::string> RunConfig::scan(int argc, const char* const* argv)
{
    constexpr std::string_view flag = "--config";
    for (int i = 1; i < argc; ++i) {
        const std::string_view arg = argv[i];
        if (arg == flag && i + 1 < argc) {
            return std::string(argv[i + 1]);
        }
        if (arg.starts_with("--config=")) {
            return std::string(arg.substr(flag.size() + 1));
        }
    }
    return std::nullopt;
}

const nlohmann::json* RunConfig::lookup(std::string_view command, std::string_view key) const
{
    if (const auto* section = find_key(doc_, command); section != nullptr && section->is_object()) {
        if (const auto* value = find_key(*section, key)) {
            return value;
        }
    }
    const auto* value = find_key(doc_, key);
    if (value != nullptr && value->is_object()) {
        return nullptr;
    }
    return value;
}

std::vector<std::string> RunConfig::unknown_keys(std::string_view command,
                                                 const std::vector<std::string>& known) const
{
    std::vector<std::string> unknown;
    const auto* section = find_key(doc_, command);
    if (section == nullptr || !section->is_object()) {
        return unknown;
    }
    for (auto it = section->begin(); it != section->end(); ++it) {
        if (std::find(known.begin(), known.end(), normalize_key(it.key())) == known.end()) {
            unknown.push_back(it.key());
        }
    }
    return unknown;
}

Command::Command(CLI::App& parent, std::string name, std::string description)
    : app_(parent.add_subcommand(name, std::move(description))), name_(std::move(name))
{
    app_->add_option("--config", config_path_, "JSON run configuration (flags take precedence)");
}

CLI::Option* Command::flag(const std::string& key, const std::string& negation, bool& variable,
                           const std::string& description)
{
    CLI::Option* opt = app_->add_flag("--" + key + ",!--" + negation, variable, description);
    bind(key, variable, Role::value);
    return opt;
}

void Command::apply(const RunConfig& config)
{
    std::vector<std::string> known;
    for (const Binding& b : bindings_) {
        known.push_back(b.key);
        if (const auto* value = config.lookup(name_, b.key)) {
            try {
                b.set(*value);
            } catch (const nlohmann::json::exception& e) {
                throw InputError("config value for '" + b.key + "' has the wrong type: " + e.what());
            }
        }
    }
    const auto unknown = config.unknown_keys(name_, known);
    if (!unknown.empty()) {
        throw InputError("unknown key '" + unknown.front() + "' in config section '" + name_ + "'");
    }
}

nlohmann::json Command::effective() const
{
    nlohmann::json j = nlohmann::json::object();
    j["command"] = name_;
    for (const Binding& b : bindings_) {
        if (b.role == Role::value) {
            j[b.key] = b.get();
        }
    }
    return j;
}

std::string Command::config_hash() const
{
    return sha256_hex(effective().dump());
}

std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw NumericError("SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        char buf[3];
        std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string provenance_comment(const Command& command, std::uint64_t seed)
{
    return "# loadgen " + command.name() + " seed=" + std::to_string(seed) +
           " config_sha256=" + command.config_hash();
}

nlohmann::json provenance(const Command& command, std::uint64_t seed)
{
    return {{"command", command.name()}, {"seed", seed}, {"config_sha256", command.config_hash()},
            {"config", command.effective()}};
}

} // namespace loadgen::cli
