#include "est/rng.hpp"
#include "est/training/aggregate.hpp"
#include "est/training/report.hpp"
#include "est/training/results.hpp"
#include "est/training/sweep.hpp"

#include "aggregate_oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

namespace est {
namespace {

class ScratchDir : public ::testing::Test {
protected:
    std::filesystem::path dir = std::filesystem::temp_directory_path() /
                                (std::string("est_exp_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    void SetUp() override {
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
    }
    void TearDown() override { std::filesystem::remove_all(dir); }
};

RunRecord sample_record() {
    RunRecord r;
    r.task = "continuous_postcasting";
    r.family = "est";
    r.size = "1k";
    r.config_id = "est-1-1k";
    r.learning_rate = 0.003;
    r.seed = 2;
    r.val_error = 0.1 + 0.2; // not representable in short decimal
    r.test_error = 1.0 / 3.0;
    r.epochs = 57;
    r.wall_ms = 1234;
    return r;
}

void expect_same(const RunRecord& a, const RunRecord& b, bool compare_wall = true) {
    EXPECT_EQ(a.task, b.task);
    EXPECT_EQ(a.family, b.family);
    EXPECT_EQ(a.size, b.size);
    EXPECT_EQ(a.config_id, b.config_id);
    EXPECT_EQ(a.learning_rate, b.learning_rate);
    EXPECT_EQ(a.seed, b.seed);
    if (std::isnan(a.val_error)) {
        EXPECT_TRUE(std::isnan(b.val_error));
    } else {
        EXPECT_EQ(a.val_error, b.val_error);
    }
    if (std::isnan(a.test_error)) {
        EXPECT_TRUE(std::isnan(b.test_error));
    } else {
        EXPECT_EQ(a.test_error, b.test_error);
    }
    EXPECT_EQ(a.epochs, b.epochs);
    if (compare_wall) {
        EXPECT_EQ(a.wall_ms, b.wall_ms);
    }
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.message, b.message);
}

TEST(ResultsFormat, RoundTripsBitExactly) {
    RunRecord r = sample_record();
    expect_same(parse_record(format_record(r)), r);
    r.status = "failed";
    r.message = "non-finite loss = bad\nline 2 at 100%";
    r.val_error = std::numeric_limits<double>::quiet_NaN();
    r.test_error = std::numeric_limits<double>::infinity();
    const std::string line = format_record(r);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    expect_same(parse_record(line), r);
    r.size = "";
    expect_same(parse_record(format_record(r)), r);
}

TEST(ResultsFormat, LineIsSelfDescribing) {
    const std::string line = format_record(sample_record());
    EXPECT_EQ(line.rfind("task=continuous_postcasting family=est size=1k config=est-1-1k lr=0.0030000000000000001 "
                         "seed=2 ",
                         0),
              0u);
    EXPECT_THROW((void)parse_record("task=a family=b"), DataError);
    EXPECT_THROW((void)parse_record(line + " extra=1"), DataError);
    EXPECT_THROW((void)parse_record(line + " seed=3"), DataError);
    std::string bad = line;
    bad.replace(bad.find("seed=2"), 6, "seed=x");
    EXPECT_THROW((void)parse_record(bad), DataError);
}

TEST_F(ScratchDir, PartialFinalLineIsIgnored) {
    const auto file = dir / "results.txt";
    {
        std::ofstream out(file, std::ios::binary);
        out << format_record(sample_record()) << '\n' << format_record(sample_record()).substr(0, 40);
    }
    const auto loaded = load_records(file);
    EXPECT_EQ(loaded.records.size(), 1u);
    EXPECT_TRUE(loaded.partial_tail);
    EXPECT_TRUE(load_records(dir / "absent.txt").records.empty());
}

TEST_F(ScratchDir, MalformedCompleteLineIsAnError) {
    const auto file = dir / "results.txt";
    {
        std::ofstream out(file, std::ios::binary);
        out << "garbage\n" << format_record(sample_record()) << '\n';
    }
    EXPECT_THROW((void)load_records(file), DataError);
}

TEST_F(ScratchDir, StoreRefusesExistingFileUnlessResumingAndTrimsTail) {
    const auto file = dir / "results.txt";
    {
        std::ofstream out(file, std::ios::binary);
        out << format_record(sample_record()) << "\ntask=cut";
    }
    EXPECT_THROW(ResultsStore(file, false), ConfigError);
    ResultsStore store(file, true);
    EXPECT_EQ(store.existing().size(), 1u);
    RunRecord second = sample_record();
    second.seed = 9;
    store.append(second);
    const auto loaded = load_records(file);
    ASSERT_EQ(loaded.records.size(), 2u);
    EXPECT_FALSE(loaded.partial_tail);
    expect_same(loaded.records[1], second);
}

stream::TaskConfig tiny_task(stream::TaskId id) {
    stream::TaskConfig t = stream::default_task_config(id);
    t.n_train = 4;
    t.n_valid = 2;
    t.n_test = 2;
    t.sequence_length = 6;
    t.delay = 1;
    return t;
}

SweepSpec tiny_spec() {
    SweepSpec s;
    s.tasks = {tiny_task(stream::TaskId::continuous_postcasting), tiny_task(stream::TaskId::discrete_postcasting)};
    s.models = {"est-1-1k", "gru-1k"};
    s.learning_rates = {0.01, 0.001};
    s.seeds = {0, 1};
    s.train.epochs = 2;
    return s;
}

std::map<std::string, RunRecord> by_key(const std::vector<RunRecord>& records) {
    std::map<std::string, RunRecord> m;
    for (const auto& r : records) {
        EXPECT_TRUE(m.emplace(r.key(), r).second) << "duplicate " << r.key();
    }
    return m;
}

TEST_F(ScratchDir, SingleCellGridYieldsOneRecord) {
    SweepSpec s = tiny_spec();
    s.tasks.resize(1);
    s.models = {"lstm-1k"};
    s.learning_rates = {0.003};
    s.seeds = {4};
    const auto result = sweep(s, dir / "r.txt");
    EXPECT_EQ(result.total, 1u);
    const auto records = load_records(dir / "r.txt").records;
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].key(), cell_key("continuous_postcasting", "lstm-1k", 0.003, 4));
    EXPECT_EQ(records[0].family, "lstm");
    EXPECT_EQ(records[0].size, "1k");
}

TEST_F(ScratchDir, GridProductAndResumeEquivalence) {
    const SweepSpec s = tiny_spec();
    EXPECT_EQ(expand(s).size(), 2u * 2u * 2u * 2u);
    const auto full = sweep(s, dir / "full.txt", {.workers = 2});
    EXPECT_EQ(full.executed, 16u);
    const auto uninterrupted = by_key(load_records(dir / "full.txt").records);
    ASSERT_EQ(uninterrupted.size(), 16u);

    // Interrupted after 5 runs, with a half-written sixth line, then resumed.
    const auto part = dir / "part.txt";
    EXPECT_EQ(sweep(s, part, {.max_new_runs = 5}).executed, 5u);
    {
        std::ofstream out(part, std::ios::binary | std::ios::app);
        out << "task=continuous_postcasting family=es";
    }
    const auto resumed = sweep(s, part, {.workers = 3, .resume = true});
    EXPECT_EQ(resumed.skipped, 5u);
    EXPECT_EQ(resumed.executed, 11u);
    const auto loaded = load_records(part);
    EXPECT_FALSE(loaded.partial_tail);
    const auto after = by_key(loaded.records);
    ASSERT_EQ(after.size(), uninterrupted.size());
    for (const auto& [key, r] : uninterrupted) {
        ASSERT_TRUE(after.count(key)) << key;
        expect_same(after.at(key), r, false);
    }
    // A complete store resumes to a no-op.
    EXPECT_EQ(sweep(s, part, {.resume = true}).executed, 0u);
    EXPECT_THROW((void)sweep(s, part), ConfigError);
}

TEST_F(ScratchDir, FailedRunsAreRecordedAndTheSweepContinues) {
    SweepSpec s = tiny_spec();
    s.tasks.resize(1);
    s.models = {"gru-1k"};
    s.learning_rates = {1e300, 0.01};
    s.seeds = {0};
    s.train.clip_norm = 1e300;
    const auto result = sweep(s, dir / "r.txt");
    EXPECT_EQ(result.executed, 2u);
    EXPECT_EQ(result.failed, 1u);
    const auto records = by_key(load_records(dir / "r.txt").records);
    EXPECT_EQ(records.at(cell_key("continuous_postcasting", "gru-1k", 1e300, 0)).status, "failed");
    EXPECT_TRUE(records.at(cell_key("continuous_postcasting", "gru-1k", 0.01, 0)).ok());
}

TEST(SweepSpec, ValidationRejectsEmptyAndDuplicateGrids) {
    SweepSpec s = tiny_spec();
    s.seeds.clear();
    EXPECT_THROW(s.validate(), ConfigError);
    s = tiny_spec();
    s.models.push_back("est-1-1k");
    EXPECT_THROW(s.validate(), ConfigError);
    s = tiny_spec();
    s.models = {"est-7-1k"};
    EXPECT_THROW(s.validate(), ConfigError);
    s = tiny_spec();
    s.learning_rates = {-1.0};
    EXPECT_THROW(s.validate(), ConfigError);
    s = tiny_spec();
    s.train.patience = 5; // beyond the 2-epoch budget
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(SweepSpec, SelectModelsAndPaperCellCount) {
    const std::vector<std::string> families{"est"}, sizes{"1k"};
    const auto models = select_models(families, sizes);
    EXPECT_EQ(models, (std::vector<std::string>{"est-1-1k", "est-2-1k", "est-3-1k", "est-4-1k"}));
    SweepSpec s;
    s.tasks = {stream::default_task_config(stream::TaskId::discrete_postcasting)};
    s.models = models;
    s.learning_rates = {0.01, 0.003, 0.001, 0.0003, 0.0001};
    s.seeds = {0, 1, 2, 3, 4};
    EXPECT_EQ(expand(s).size(), 100u);
}

RunRecord rec(std::string family, std::string size, std::string config, double lr, std::uint64_t seed, double err) {
    RunRecord r;
    r.task = "t";
    r.family = std::move(family);
    r.size = std::move(size);
    r.config_id = std::move(config);
    r.learning_rate = lr;
    r.seed = seed;
    r.test_error = err;
    return r;
}

TEST(Aggregate, Examples) {
    const std::vector<RunRecord> one{rec("est", "1k", "a", 0.1, 0, 0.3), rec("est", "1k", "a", 0.1, 1, 0.5)};
    ASSERT_EQ(aggregate_bwa(one).size(), 1u);
    EXPECT_DOUBLE_EQ(aggregate_bwa(one)[0].error, 0.4);
    EXPECT_EQ(aggregate_bwa(one)[0].runs, 2u);
    EXPECT_DOUBLE_EQ(aggregate_boa(one)[0].error, 0.3);

    // Cell means 0.4 and 0.2.
    std::vector<RunRecord> two = one;
    two.push_back(rec("est", "1k", "b", 0.1, 0, 0.1));
    two.push_back(rec("est", "1k", "b", 0.1, 1, 0.3));
    EXPECT_DOUBLE_EQ(aggregate_bwa(two)[0].error, 0.2);
    EXPECT_EQ(aggregate_bwa(two)[0].config_id, "b");

    const std::vector<RunRecord> pair{rec("gru", "1k", "g", 0.1, 0, 0.3), rec("gru", "1k", "g", 0.1, 1, 0.1)};
    EXPECT_DOUBLE_EQ(aggregate_boa(pair)[0].error, 0.1);
    EXPECT_TRUE(aggregate_bwa({}).empty());
}

TEST(Aggregate, IncompleteAndFailedCellsAreSkipped) {
    std::vector<RunRecord> rs{rec("est", "1k", "a", 0.1, 0, 0.3), rec("est", "1k", "a", 0.1, 1, 0.3),
                              rec("est", "1k", "b", 0.1, 0, 0.01)};
    EXPECT_EQ(aggregate_bwa(rs)[0].config_id, "a");
    EXPECT_DOUBLE_EQ(aggregate_boa(rs)[0].error, 0.01);
    RunRecord failed = rec("est", "1k", "b", 0.1, 1, 0.0);
    failed.status = "failed";
    rs.push_back(failed);
    EXPECT_EQ(aggregate_bwa(rs)[0].config_id, "a");
    EXPECT_DOUBLE_EQ(aggregate_boa(rs)[0].error, 0.01);
}

TEST(Aggregate, MatchesBruteForceOnRandomTables) {
    for (std::uint64_t trial = 0; trial < 300; ++trial) {
        const auto rs = testing::random_record_table(trial);
        const auto oracle = testing::brute_force_aggregate(rs);
        const auto bwa = aggregate_bwa(rs);
        const auto boa = aggregate_boa(rs);
        std::size_t expected_bwa = 0;
        for (const auto& [g, o] : oracle) {
            expected_bwa += o.has_bwa ? 1 : 0;
        }
        ASSERT_EQ(boa.size(), oracle.size());
        ASSERT_EQ(bwa.size(), expected_bwa);
        for (const auto& row : boa) {
            EXPECT_EQ(row.error, oracle.at({row.task, row.family, row.size}).boa);
        }
        for (const auto& row : bwa) {
            const auto& o = oracle.at({row.task, row.family, row.size});
            EXPECT_NEAR(row.error, o.bwa, 1e-15);
            EXPECT_GE(row.error, o.boa);
        }
    }
}

TEST(Report, CellFormatAndTables) {
    EXPECT_EQ(format_cell(0.232, "1k"), "0.232 / 1k");
    EXPECT_EQ(format_cell(0.0, "10k"), "0.000 / 10k");

    const std::string empty = render_table({}, "BWA");
    EXPECT_EQ(empty.rfind("BWA\ntask", 0), 0u);
    EXPECT_EQ(std::count(empty.begin(), empty.end(), '\n'), 3);
    EXPECT_EQ(render_csv({}, {}), "metric,task,family,size,config,learning_rate,error,runs\n");

    std::vector<AggregateRow> rows{{"discrete_postcasting", "est", "1k", "est-1-1k", 0.003, 0.5, 3},
                                   {"discrete_postcasting", "est", "10k", "est-1-10k", 0.003, 0.232, 3},
                                   {"discrete_postcasting", "gru", "1k", "gru-1k", 0.01, 0.4, 3}};
    const std::string table = render_table(rows, "BWA");
    EXPECT_NE(table.find("0.232 / 10k"), std::string::npos);
    EXPECT_NE(table.find("0.400 / 1k"), std::string::npos);
    EXPECT_EQ(table.find("0.500 / 1k"), std::string::npos);
    EXPECT_NE(table.find("-"), std::string::npos);
    const std::string csv = render_csv(rows, rows);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_NE(csv.find("bwa,discrete_postcasting,est,10k,est-1-10k,0.0030000000000000001,0.23200000000000001,3"),
              std::string::npos);
}

TEST(Report, ParameterReportDocumentsEveryDeviation) {
    const auto rows = param_counts(4, 4);
    ASSERT_EQ(rows.size(), 40u);
    const std::string text = render_param_report(rows, 4, 4);
    for (const auto& r : rows) {
        EXPECT_EQ(r.within, r.ratio >= 0.5 && r.ratio <= 2.0);
        if (!r.within) {
            EXPECT_NE(text.find(r.name + ": " + std::to_string(r.count)), std::string::npos) << r.name;
        }
    }
}

} // namespace
} // namespace est
