#include "est/cli/experiment.hpp"

#include "est/errors.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace est::cli {

namespace {

stream::TaskConfig parse_task_entry(const nlohmann::json& j, const std::string& where) {
    if (j.is_string()) {
        return stream::default_task_config(stream::parse_task(j.get<std::string>()));
    }
    if (!j.is_object()) {
        throw ConfigError(fmt::format("{}: expected a task name or a task config object", where));
    }
    try {
        auto c = j.get<stream::TaskConfig>();
        c.validate();
        return c;
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
}

template <class T>
std::vector<T> one_or_many(const nlohmann::json& j, const char* singular, const char* plural,
                           const auto& parse_item) {
    std::vector<T> out;
    if (j.contains(singular) && j.contains(plural)) {
        throw ConfigError(fmt::format("'{}' and '{}' are mutually exclusive", singular, plural));
    }
    if (j.contains(singular)) {
        out.push_back(parse_item(j.at(singular), std::string(singular)));
    } else if (j.contains(plural)) {
        const auto& list = j.at(plural);
        if (!list.is_array()) {
            throw ConfigError(fmt::format("{}: expected an array", plural));
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            out.push_back(parse_item(list[i], fmt::format("{}[{}]", plural, i)));
        }
    }
    return out;
}

template <class T>
T scalar_as(const nlohmann::json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(fmt::format("{}: wrong type ({})", where, j.dump()));
    }
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key)) {
        return out;
    }
    if (!j.at(key).is_array()) {
        throw ConfigError(fmt::format("{}: expected an array of strings", key));
    }
    for (std::size_t i = 0; i < j.at(key).size(); ++i) {
        out.push_back(scalar_as<std::string>(j.at(key)[i], fmt::format("{}[{}]", key, i)));
    }
    return out;
}

} // namespace

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("experiment file must hold a JSON object");
    }
    static const std::set<std::string> known{"task",  "tasks", "model",          "models", "families",
                                             "sizes", "learning_rate", "learning_rates", "seed",   "seeds",
                                             "train"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError(fmt::format("{}: unknown key", key));
        }
    }
    ExperimentSpec s;
    s.tasks = one_or_many<stream::TaskConfig>(j, "task", "tasks", parse_task_entry);
    s.models = one_or_many<std::string>(j, "model", "models", [](const nlohmann::json& v, const std::string& where) {
        auto name = scalar_as<std::string>(v, where);
        try {
            (void)find_model(name);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}: {}", where, e.what()));
        }
        return name;
    });
    const auto families = string_list(j, "families");
    const auto sizes = string_list(j, "sizes");
    if (families.empty() != sizes.empty()) {
        throw ConfigError("'families' and 'sizes' must be given together");
    }
    if (!families.empty()) {
        const auto selected = select_models(families, sizes);
        if (selected.empty()) {
            throw ConfigError("families x sizes matches no configuration");
        }
        for (const auto& m : selected) {
            if (std::find(s.models.begin(), s.models.end(), m) == s.models.end()) {
                s.models.push_back(m);
            }
        }
    }
    s.learning_rates = one_or_many<double>(j, "learning_rate", "learning_rates",
                                           [](const nlohmann::json& v, const std::string& where) {
                                               const auto lr = scalar_as<double>(v, where);
                                               if (!(lr > 0.0)) {
                                                   throw ConfigError(
                                                       fmt::format("{}: learning rate must be positive", where));
                                               }
                                               return lr;
                                           });
    s.seeds = one_or_many<std::uint64_t>(j, "seed", "seeds", scalar_as<std::uint64_t>);
    if (j.contains("train")) {
        s.train = j.at("train").get<TrainOverrides>();
    }
    return s;
}

nlohmann::json ExperimentSpec::to_json() const {
    nlohmann::json j{{"tasks", tasks}, {"models", models}, {"learning_rates", learning_rates}, {"seeds", seeds}};
    j["train"] = train;
    return j;
}

namespace {

template <class T>
const T& single(const std::vector<T>& v, const char* singular, const char* plural) {
    if (v.size() != 1) {
        throw ConfigError(fmt::format("this command needs exactly one {} (got {} in '{}')", singular, v.size(), plural));
    }
    return v.front();
}

} // namespace

const stream::TaskConfig& ExperimentSpec::single_task() const { return single(tasks, "task", "tasks"); }
const std::string& ExperimentSpec::single_model() const { return single(models, "model", "models"); }
double ExperimentSpec::single_learning_rate() const {
    return single(learning_rates, "learning_rate", "learning_rates");
}
std::uint64_t ExperimentSpec::single_seed() const { return single(seeds, "seed", "seeds"); }

SweepSpec ExperimentSpec::sweep_spec() const {
    SweepSpec s{tasks, models, learning_rates, seeds, train};
    s.validate();
    return s;
}

ExperimentSpec load_experiment(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config file {}", file.string()));
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", file.string(), e.what()));
    }
    try {
        return ExperimentSpec::from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", file.string(), e.what()));
    }
}

} // namespace est::cli
