#include "batch.hpp"
#include "libsvm.hpp"

#include "oracles.hpp"
#include "random_models.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace treeverify;
using namespace treeverify::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kData = TREEVERIFY_DATA_DIR;

class Scratch : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("treeverify_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path file(const std::string& name) const { return dir_ / name; }

    static void write(const fs::path& p, const std::string& text)
    {
        std::ofstream out(p, std::ios::binary);
        out << text;
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    int run(const RunConfig& cfg)
    {
        std::ostringstream diag;
        const int rc = run_batch(cfg, diag);
        last_diag_ = diag.str();
        return rc;
    }

    json run_json(RunConfig cfg, const std::string& name = "report.json")
    {
        cfg.output_path = file(name);
        EXPECT_EQ(run(cfg), kExitOk) << last_diag_;
        return json::parse(slurp(cfg.output_path));
    }

    fs::path dir_;
    std::string last_diag_;
};

std::string libsvm_line(int label, const std::vector<double>& x)
{
    std::string s = std::to_string(label);
    char buf[64];
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::snprintf(buf, sizeof buf, " %zu:%.17g", i + 1, x[i]);
        s += buf;
    }
    return s + "\n";
}

json without_metadata(json doc)
{
    doc.erase("metadata");
    return doc;
}

int shell(const std::string& args)
{
    const std::string cmd = std::string(TREEVERIFY_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Libsvm, SparseRowIsDensified)
{
    std::istringstream in("1 1:0.5 3:0.2\n");
    const auto rows = parse_libsvm(in, 3);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].label, 1);
    EXPECT_EQ(rows[0].x, (std::vector<double>{0.5, 0.0, 0.2}));
}

TEST(Libsvm, EmptyInputHasNoRows)
{
    std::istringstream in("");
    EXPECT_TRUE(parse_libsvm(in, 3).empty());
    std::istringstream comments("# nothing\n\n");
    EXPECT_TRUE(parse_libsvm(comments, 3).empty());
}

TEST(Libsvm, IndexBeyondDimensionReportsLine)
{
    std::istringstream in("0 4:1.0\n");
    try {
        (void)parse_libsvm(in, 3);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
}

TEST(Libsvm, MalformedTokensAreRejected)
{
    for (const char* text : {"x 1:0.5\n", "1 1=0.5\n", "1 0:0.5\n", "1 1:abc\n"}) {
        std::istringstream in(text);
        EXPECT_THROW((void)parse_libsvm(in, 3), DataError) << text;
    }
}

TEST(Libsvm, InferredWidthPadsShortRows)
{
    std::istringstream in("0 2:1\n1 5:2\n");
    const auto rows = parse_libsvm(in, 0);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].x.size(), 5u);
    EXPECT_EQ(rows[1].x[4], 2.0);
}

TEST(Libsvm, SignedBinaryLabelsMapToZeroOne)
{
    std::vector<LabeledPoint> pts{{-1, {}}, {1, {}}};
    normalize_labels(pts, 2);
    EXPECT_EQ(pts[0].label, 0);
    EXPECT_EQ(pts[1].label, 1);
    std::vector<LabeledPoint> bad{{3, {}}};
    EXPECT_THROW(normalize_labels(bad, 3), DataError);
}

TEST(Pgm, PixelsScaleWithDomainWidth)
{
    const std::vector<FeatureRadius> r{{1.0, false}, {0.5, false}, {0.25, false}, {0.0, false}};
    EXPECT_EQ(importance_pixels(r, 1.0), (std::vector<unsigned char>{255, 128, 64, 0}));
    const std::vector<FeatureRadius> sat{{0.3, true}, {2.0, true}};
    EXPECT_EQ(importance_pixels(sat, 1.0), (std::vector<unsigned char>{255, 255}));
}

TEST_F(Scratch, PgmHeaderAndShape)
{
    const std::vector<FeatureRadius> r{{1.0, false}, {0.5, false}, {0.25, false}, {0.0, false}};
    emit_importance_map(r, 1.0, 2, 2, file("m.pgm"));
    const std::string bytes = slurp(file("m.pgm"));
    EXPECT_EQ(bytes.substr(0, 11), "P5\n2 2\n255\n");
    EXPECT_EQ(bytes.size(), 15u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 128);
    EXPECT_THROW(emit_importance_map(r, 1.0, 3, 2, file("bad.pgm")), InvalidInput);
}

TEST_F(Scratch, SingleTreeModeOnThreeExamples)
{
    // f0 <= 0.5 -> -1, else +1.
    Ensemble e;
    e.dim = 2;
    e.trees = {Tree{{TreeNode::split(0, 0.5, 1, 2), TreeNode::leaf(-1), TreeNode::leaf(1)}, 0}};
    e.class_of_tree = {0};
    write(file("m.json"), emit_native_json(e));
    write(file("d.libsvm"), "0 1:0.25 2:0.1\n1 1:0.875\n1 1:0.125\n");
    RunConfig cfg;
    cfg.model_path = file("m.json");
    cfg.model_format = ModelFormat::native;
    cfg.data_path = file("d.libsvm");
    cfg.mode = RunMode::single_tree;
    cfg.verify.levels = 0;
    const json doc = run_json(cfg);
    const auto& ex = doc["examples"];
    ASSERT_EQ(ex.size(), 3u);
    EXPECT_EQ(ex[0]["radius"].get<double>(), 0.25);
    EXPECT_EQ(ex[1]["radius"].get<double>(), 0.375);
    EXPECT_EQ(ex[2]["correct"].get<bool>(), false);
    EXPECT_EQ(ex[2]["radius"].get<double>(), 0.0);
    EXPECT_EQ(doc["summary"]["correct"].get<int>(), 2);
}

TEST_F(Scratch, ExactModeAverageEqualsOracleMean)
{
    tvtest::Rng rng(61);
    const Ensemble e = tvtest::random_ensemble(rng, 4, 2, {.max_depth = 3});
    write(file("m.json"), emit_native_json(e));
    std::string data;
    double sum = 0.0;
    const int n = 12;
    for (int i = 0; i < n; ++i) {
        const auto x = tvtest::random_point(rng, 2);
        const int y = e.predict(x);
        data += libsvm_line(y, x);
        sum += tvtest::searched_radius(tvtest::oracle_binary_rstar(e, x, y), 1.0, 10);
    }
    write(file("d.libsvm"), data);
    RunConfig cfg;
    cfg.model_path = file("m.json");
    cfg.model_format = ModelFormat::native;
    cfg.data_path = file("d.libsvm");
    cfg.mode = RunMode::exact;
    cfg.verify.levels = 0;
    const json doc = run_json(cfg);
    EXPECT_EQ(doc["summary"]["correct"].get<int>(), n);
    EXPECT_DOUBLE_EQ(doc["summary"]["avg_radius_all"].get<double>(), sum / n);
}

TEST_F(Scratch, ImportanceCsvHasOneColumnPerFeature)
{
    Ensemble e;
    e.dim = 4;
    e.trees = {Tree{{TreeNode::split(0, 0.5, 1, 2), TreeNode::leaf(-1), TreeNode::leaf(1)}, 0}};
    e.class_of_tree = {0};
    write(file("m.json"), emit_native_json(e));
    write(file("d.libsvm"), "0 1:0.25 2:0.5\n");
    RunConfig cfg;
    cfg.model_path = file("m.json");
    cfg.model_format = ModelFormat::native;
    cfg.data_path = file("d.libsvm");
    cfg.mode = RunMode::importance;
    cfg.verify.levels = 0;
    cfg.output_format = OutputFormat::csv;
    cfg.output_path = file("imp.csv");
    ASSERT_EQ(run(cfg), kExitOk) << last_diag_;
    std::istringstream csv(slurp(file("imp.csv")));
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    EXPECT_EQ(header, "f0,f1,f2,f3");
    std::vector<double> cells;
    std::stringstream rs(row);
    for (std::string cell; std::getline(rs, cell, ',');)
        cells.push_back(std::strtod(cell.c_str(), nullptr));
    ASSERT_EQ(cells.size(), 4u);
    EXPECT_LE(cells[0], 0.25);
    EXPECT_GE(cells[0], 0.25 - 1.0 / 1024);
    for (int f = 1; f < 4; ++f)
        EXPECT_EQ(cells[static_cast<std::size_t>(f)], 1.0);
}

TEST_F(Scratch, ImportanceMapsAreWrittenPerExample)
{
    Ensemble e;
    e.dim = 4;
    e.trees = {Tree{{TreeNode::split(0, 0.5, 1, 2), TreeNode::leaf(-1), TreeNode::leaf(1)}, 0}};
    e.class_of_tree = {0};
    write(file("m.json"), emit_native_json(e));
    write(file("d.libsvm"), "0 1:0.25\n0 1:0.75\n");
    RunConfig cfg;
    cfg.model_path = file("m.json");
    cfg.model_format = ModelFormat::native;
    cfg.data_path = file("d.libsvm");
    cfg.mode = RunMode::importance;
    cfg.verify.levels = 0;
    cfg.image = std::pair{2, 2};
    cfg.image_prefix = file("imp");
    (void)run_json(cfg);
    EXPECT_TRUE(fs::exists(file("imp.0.pgm")));
    EXPECT_FALSE(fs::exists(file("imp.1.pgm")));
    cfg.image = std::pair{3, 3};
    cfg.output_path = file("r2.json");
    EXPECT_EQ(run(cfg), kExitUsage);
}

TEST_F(Scratch, ReportsAreDeterministicAcrossRunsAndThreads)
{
    RunConfig cfg;
    cfg.model_path = kData / "breast_cancer.xgb.json";
    cfg.data_path = kData / "breast_cancer.eval.libsvm";
    cfg.num_examples = 40;
    cfg.verify.levels = 1;
    const json a = run_json(cfg, "a.json");
    const json b = run_json(cfg, "b.json");
    cfg.threads = 4;
    const json c = run_json(cfg, "c.json");
    EXPECT_EQ(without_metadata(a).dump(), without_metadata(b).dump());
    EXPECT_EQ(without_metadata(a).dump(), without_metadata(c).dump());
    EXPECT_EQ(c["metadata"]["threads"].get<int>(), 4);
}

TEST_F(Scratch, NativeRoundTripGivesIdenticalRadii)
{
    RunConfig cfg;
    cfg.model_path = kData / "breast_cancer.xgb.json";
    cfg.data_path = kData / "breast_cancer.eval.libsvm";
    cfg.num_examples = 30;
    cfg.verify.levels = 1;
    const json xgb = run_json(cfg, "x.json");

    std::ifstream in(cfg.model_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const Ensemble e = parse_xgboost_json(ss.str(), {.dim = 9});
    write(file("native.json"), emit_native_json(e));
    cfg.model_path = file("native.json");
    cfg.model_format = ModelFormat::native;
    const json native = run_json(cfg, "n.json");
    ASSERT_EQ(xgb["examples"].size(), native["examples"].size());
    for (std::size_t i = 0; i < xgb["examples"].size(); ++i)
        EXPECT_EQ(xgb["examples"][i]["radius"], native["examples"][i]["radius"]) << i;
}

TEST_F(Scratch, ThreadsEnvironmentOverridesConfig)
{
    RunConfig cfg;
    ::setenv("TREEVERIFY_THREADS", "3", 1);
    apply_environment(cfg);
    ::unsetenv("TREEVERIFY_THREADS");
    EXPECT_EQ(cfg.threads, 3);
}

TEST_F(Scratch, ExitCodesDistinguishFailures)
{
    const std::string model = (kData / "breast_cancer.xgb.json").string();
    const std::string data = (kData / "breast_cancer.eval.libsvm").string();
    write(file("bad.json"), "{not json");
    write(file("bad.libsvm"), "1 1:zz\n");
    EXPECT_EQ(shell("--help"), 0);
    EXPECT_EQ(shell("--model " + model), 2);
    EXPECT_EQ(shell("--model " + model + " --data " + data + " --bogus"), 2);
    EXPECT_EQ(shell("--model " + file("bad.json").string() + " --data " + data), 3);
    EXPECT_EQ(shell("--model " + file("missing.json").string() + " --data " + data), 3);
    EXPECT_EQ(shell("--model " + model + " --data " + file("bad.libsvm").string()), 4);
    EXPECT_EQ(shell("--model " + model + " --data " + data + " --n 2 --L 9"), 2);
    EXPECT_EQ(shell("--model " + model + " --data " + data + " --n 2 --out " + (dir_ / "no/such/dir/r.json").string()),
              5);
    EXPECT_EQ(shell("--model " + model + " --data " + data + " --n 2 --out " + file("ok.json").string()), 0);
    EXPECT_TRUE(json::parse(slurp(file("ok.json"))).contains("summary"));
}
