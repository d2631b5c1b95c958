#pragma once

// Exhaustive reference for the BWA/BOA summaries: every group, every
// (config, lr) cell and every seed is looked up by linear scan.

#include "est/rng.hpp"
#include "est/training/trainer.hpp"

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace est::testing {

struct OracleSummary {
    bool has_bwa = false;
    double bwa = 0.0;
    double boa = 0.0;
};

using GroupId = std::tuple<std::string, std::string, std::string>;

template <class T>
void push_unique(std::vector<T>& v, const T& x) {
    for (const auto& y : v) {
        if (y == x) {
            return;
        }
    }
    v.push_back(x);
}

inline std::map<GroupId, OracleSummary> brute_force_aggregate(const std::vector<RunRecord>& all) {
    std::vector<RunRecord> rs;
    std::vector<std::string> keys;
    for (const auto& r : all) {
        bool dup = false;
        for (const auto& k : keys) {
            dup = dup || k == r.key();
        }
        if (r.ok() && !dup) {
            rs.push_back(r);
            keys.push_back(r.key());
        }
    }
    std::vector<GroupId> groups;
    for (const auto& r : rs) {
        push_unique(groups, GroupId{r.task, r.family, r.size});
    }
    std::map<GroupId, OracleSummary> out;
    for (const auto& g : groups) {
        std::vector<const RunRecord*> members;
        for (const auto& r : rs) {
            if (GroupId{r.task, r.family, r.size} == g) {
                members.push_back(&r);
            }
        }
        std::vector<std::uint64_t> seeds;
        std::vector<std::string> configs;
        std::vector<double> lrs;
        OracleSummary s;
        s.boa = members.front()->test_error;
        for (const auto* r : members) {
            push_unique(seeds, r->seed);
            push_unique(configs, r->config_id);
            push_unique(lrs, r->learning_rate);
            s.boa = std::min(s.boa, r->test_error);
        }
        for (const auto& c : configs) {
            for (double lr : lrs) {
                double total = 0.0;
                std::size_t found = 0;
                for (auto seed : seeds) {
                    for (const auto* r : members) {
                        if (r->config_id == c && r->learning_rate == lr && r->seed == seed) {
                            total += r->test_error;
                            ++found;
                        }
                    }
                }
                if (found == seeds.size()) {
                    const double mean = total / static_cast<double>(found);
                    if (!s.has_bwa || mean < s.bwa) {
                        s.bwa = mean;
                        s.has_bwa = true;
                    }
                }
            }
        }
        out[g] = s;
    }
    return out;
}

/// Random sweep-shaped record table: two tasks, two families, two sizes, two
/// configs per group, two learning rates, three seeds; about 20% of runs are
/// missing and 5% failed. Errors are multiples of 1/8 so ties occur.
inline std::vector<RunRecord> random_record_table(std::uint64_t seed) {
    Rng rng = make_rng(seed, "aggregate.table");
    std::vector<RunRecord> rs;
    for (const char* task : {"adding_problem", "sorting_problem"}) {
        for (const char* fam : {"est", "gru"}) {
            for (const char* size : {"1k", "10k"}) {
                for (const char* c : {"a", "b"}) {
                    for (double lr : {0.01, 0.001}) {
                        for (std::uint64_t s = 0; s < 3; ++s) {
                            if (uniform(rng, 0.0, 1.0) < 0.2) {
                                continue;
                            }
                            RunRecord r;
                            r.task = task;
                            r.family = fam;
                            r.size = size;
                            r.config_id = std::string(fam) + "-" + c + "-" + size;
                            r.learning_rate = lr;
                            r.seed = s;
                            r.test_error = std::round(uniform(rng, 0.0, 1.0) * 8) / 8;
                            if (uniform(rng, 0.0, 1.0) < 0.05) {
                                r.status = "failed";
                                r.test_error = std::nan("");
                            }
                            rs.push_back(r);
                        }
                    }
                }
            }
        }
    }
    std::shuffle(rs.begin(), rs.end(), rng);
    return rs;
}

} // namespace est::testing
