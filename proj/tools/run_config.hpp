#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loadgen::cli {

// Run configuration file: top-level scalars apply to every subcommand that
// has an option of that name, objects keyed by subcommand apply to that
// subcommand only and take precedence. Keys are option long names; '_' and
// '-' are interchangeable. Flags given on the command line override both.
class RunConfig {
public:
    static RunConfig load(const std::string& path);
    // Finds --config <path> or --config=<path> before CLI11 sees argv.
    static std::optional<std::string> scan(int argc, const char* const* argv);

    const nlohmann::json* lookup(std::string_view command, std::string_view key) const;
    // Keys in a subcommand section that no option consumed.
    std::vector<std::string> unknown_keys(std::string_view command, const std::vector<std::string>& known) const;

private:
    nlohmann::json doc_ = nlohmann::json::object();
};

enum class Role { value, path, runtime };

// Options of one subcommand bound to variables, so the effective
// configuration can be reconstructed after parsing.
class Command {
public:
    Command(CLI::App& parent, std::string name, std::string description);

    CLI::App& app() { return *app_; }
    const std::string& name() const { return name_; }

    template <typename T>
    CLI::Option* option(const std::string& key, T& variable, const std::string& description, Role role = Role::value)
    {
        CLI::Option* opt = app_->add_option("--" + key, variable, description)->capture_default_str();
        bind(key, variable, role);
        return opt;
    }

    CLI::Option* flag(const std::string& key, const std::string& negation, bool& variable,
                      const std::string& description);

    void apply(const RunConfig& config);
    // Non-path options and their final values.
    nlohmann::json effective() const;
    std::string config_hash() const;
    bool parsed() const { return app_->parsed(); }

private:
    struct Binding {
        std::string key;
        Role role;
        std::function<void(const nlohmann::json&)> set;
        std::function<nlohmann::json()> get;
    };

    template <typename T>
    void bind(const std::string& key, T& variable, Role role)
    {
        bindings_.push_back({key, role, [&variable](const nlohmann::json& j) { variable = j.get<T>(); },
                             [&variable] { return nlohmann::json(variable); }});
    }

    CLI::App* app_;
    std::string name_;
    std::string config_path_;
    std::vector<Binding> bindings_;
};

std::string sha256_hex(std::string_view data);

// "# loadgen <command> seed=<seed> config_sha256=<hash>"
std::string provenance_comment(const Command& command, std::uint64_t seed);
nlohmann::json provenance(const Command& command, std::uint64_t seed);

} // namespace loadgen::cli
