#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"

using namespace modalnadir;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("modalnadir_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args, const fs::path& out) {
    const std::string cmd = std::string(MODALNADIR_CLI) + " " + args + " --out " + out.string() + " > " +
                            (out / "stdout.txt").string() + " 2> " + (out / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string case_arg() { return "--case " + fx::data_path("ieee39.case"); }

}  // namespace

TEST(Study, PredictionOnlyNeverSimulates) {
    StudyConfig cfg = fx::case1_config();
    cfg.skip_oracle = true;
    const long before = simulation_counter().load();
    const CaseResult r = run_case(fx::ieee39(), cfg);
    EXPECT_EQ(simulation_counter().load(), before);
    EXPECT_FALSE(r.oracle.has_value());
    const std::string row = prediction_csv_row(r);
    EXPECT_NE(row.find(",,,,"), std::string::npos) << row;
}

TEST(Study, ConfigValidation) {
    StudyConfig cfg = fx::case1_config();
    cfg.inertia_scale = 0.0;
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = fx::case2_config();
    cfg.linearize_at = LinearizationPoint::PreFault;
    cfg.skip_oracle = true;
    EXPECT_THROW((void)run_case(fx::ieee39(), cfg), InputError);
    cfg = fx::case1_config();
    cfg.scenario = Scenario::load_step(15, 0.0);
    cfg.skip_oracle = true;
    EXPECT_THROW((void)run_case(fx::ieee39(), cfg), InputError);
}

TEST(Study, PreFaultLinearizationGivesASimilarPrediction) {
    StudyConfig cfg = fx::case1_config();
    cfg.skip_oracle = true;
    const auto post = run_case(fx::ieee39(), cfg).estimate.prediction;
    cfg.linearize_at = LinearizationPoint::PreFault;
    const auto pre = run_case(fx::ieee39(), cfg).estimate.prediction;
    EXPECT_NEAR(pre.f_nadir, post.f_nadir, 0.02);
    EXPECT_NEAR(pre.t_nadir, post.t_nadir, 0.5);
}

TEST(Scan, SingleFactorGivesOneRow) {
    StudyConfig cfg = fx::case1_config();
    const ScanResult r = sensitivity_scan(fx::ieee39(), cfg, {1.0}, 1);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_TRUE(r.rows[0].ok) << r.rows[0].error;
    EXPECT_NEAR(r.rows[0].eig_drift, 0.0, 1e-9);
    EXPECT_EQ(r.base_modes.size(), 3u);
}

TEST(Scan, FactorsOutsideTheRangeAreRejected) {
    EXPECT_THROW(validate_factors({1.0, 5.0}), InputError);
    EXPECT_THROW(validate_factors({}), InputError);
    EXPECT_NO_THROW(validate_factors({0.5, 1.5}));
}

TEST(Scan, CsvRowsForFailures) {
    ScanRow r;
    r.factor = 1.4;
    EXPECT_EQ(scan_csv_row(r), "1.40,failed,,,,,,,");
    r.predicted = true;
    r.f_nadir_pred = 59.38;
    r.t_nadir_pred = 8.5;
    r.eig_drift = 0.0047;
    EXPECT_EQ(scan_csv_row(r), "1.40,failed,,59.380000,,,8.5000,,0.00470");
    const std::string header = scan_csv_header(), row = scan_csv_row(r);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
}

TEST(Cli, PredictIsDeterministic) {
    const fs::path a = scratch("predict_a"), b = scratch("predict_b");
    ASSERT_EQ(run_cli("predict " + case_arg(), a), 0) << slurp(a / "stderr.txt");
    ASSERT_EQ(run_cli("predict " + case_arg(), b), 0) << slurp(b / "stderr.txt");
    const std::string text = slurp(a / "prediction.csv");
    EXPECT_EQ(text, slurp(b / "prediction.csv"));
    EXPECT_EQ(text.rfind(prediction_csv_header(), 0), 0u);
    EXPECT_NE(text.find("load-step:15:20,"), std::string::npos) << text;
}

TEST(Cli, SkipOracleLeavesActualColumnsEmpty) {
    const fs::path d = scratch("skip");
    ASSERT_EQ(run_cli("predict --skip-oracle --scenario gen-trip:1 " + case_arg(), d), 0) << slurp(d / "stderr.txt");
    EXPECT_NE(slurp(d / "prediction.csv").find(",,,,"), std::string::npos);
}

TEST(Cli, SimulateWritesSeries) {
    const fs::path d = scratch("simulate");
    ASSERT_EQ(run_cli("simulate --horizon 2 " + case_arg(), d), 0) << slurp(d / "stderr.txt");
    EXPECT_TRUE(fs::exists(d / "trajectory.csv"));
    const std::string coi = slurp(d / "coi.csv");
    EXPECT_EQ(coi.rfind("t,f_coi_hz\n0,60", 0), 0u) << coi.substr(0, 40);
    EXPECT_NE(slurp(d / "stdout.txt").find("nadir "), std::string::npos);
}

TEST(Cli, ModesMarksSelection) {
    const fs::path d = scratch("modes");
    const fs::path matrix = d / "a.txt";
    ASSERT_EQ(run_cli("modes --dump-matrix " + matrix.string() + " " + case_arg(), d), 0) << slurp(d / "stderr.txt");
    const std::string csv = slurp(d / "modes.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 140);
    EXPECT_EQ(slurp(matrix).rfind("139 139\n", 0), 0u);
    EXPECT_NE(slurp(d / "stdout.txt").find("selected"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    const fs::path d = scratch("exit");
    EXPECT_EQ(run_cli("modes --case /nonexistent.case", d), 2);
    EXPECT_NE(slurp(d / "stderr.txt").find("nonexistent"), std::string::npos);
    EXPECT_EQ(run_cli("modes --pf-threshold 1.0 " + case_arg(), d), 2);
    EXPECT_EQ(run_cli("scan --factors 5.0 " + case_arg(), d), 2);
    EXPECT_EQ(run_cli("scan --factors 1.0,abc " + case_arg(), d), 2);
    EXPECT_EQ(run_cli("predict --scenario blackout " + case_arg(), d), 2);
    EXPECT_EQ(run_cli("predict --scenario load-step:15:0 --skip-oracle " + case_arg(), d), 2);
    EXPECT_EQ(run_cli("predict --imbalance sometimes " + case_arg(), d), 2);
    EXPECT_EQ(run_cli("frobnicate " + case_arg(), d), 2);
}
