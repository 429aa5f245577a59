#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lcm/experiments.hpp"

using namespace lcm;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lcm_exp_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig tiny_exp1() {
    ExperimentConfig cfg;
    cfg.experiment = "exp1";
    cfg.n_users = 24;
    cfg.n_items = 24;
    cfg.choices_per_user = 40;
    cfg.repetitions = 1;
    cfg.error_laws = {"gumbel"};
    cfg.models = {ModelKind::MNL};
    cfg.seed = 5;
    cfg.threads = 1;
    cfg.max_epochs = 30;
    cfg.patience = 5;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

int data_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    int rows = 0;
    bool cols_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!cols_seen) {
            cols_seen = true;
            continue;
        }
        ++rows;
    }
    return rows;
}

}  // namespace

TEST_CASE("exp1: single law and model yields exactly one aggregate row") {
    ExperimentConfig cfg = tiny_exp1();
    cfg.out_dir = fresh_dir("one_row");
    const ExperimentResult res = run_experiment1(cfg);
    CHECK(res.failures == 0);
    CHECK(data_rows(cfg.out_dir / "exp1" / "table2.tsv") == 1);
    CHECK(fs::exists(cfg.out_dir / "exp1" / "gumbel" / "rep000.tsv"));
    CHECK(fs::exists(cfg.out_dir / "exp1" / "gumbel" / "rep000_mnl.json"));
}

TEST_CASE("exp1: same config and seed reproduce reports byte for byte") {
    ExperimentConfig cfg = tiny_exp1();
    cfg.out_dir = fresh_dir("det_a");
    REQUIRE(run_experiment1(cfg).failures == 0);
    ExperimentConfig cfg2 = tiny_exp1();
    cfg2.out_dir = fresh_dir("det_b");
    REQUIRE(run_experiment1(cfg2).failures == 0);
    CHECK(slurp(cfg.out_dir / "exp1" / "table2.tsv") ==
          slurp(cfg2.out_dir / "exp1" / "table2.tsv"));
    CHECK(slurp(cfg.out_dir / "exp1" / "per_repetition.tsv") ==
          slurp(cfg2.out_dir / "exp1" / "per_repetition.tsv"));
}

TEST_CASE("exp1: resume skips cached repetitions and keeps reports identical") {
    ExperimentConfig cfg = tiny_exp1();
    cfg.repetitions = 2;
    cfg.out_dir = fresh_dir("resume");
    REQUIRE(run_experiment1(cfg).failures == 0);
    const std::string before = slurp(cfg.out_dir / "exp1" / "table2.tsv");
    const auto mtime_before =
        fs::last_write_time(cfg.out_dir / "exp1" / "gumbel" / "rep001.tsv");
    cfg.resume = true;
    REQUIRE(run_experiment1(cfg).failures == 0);
    CHECK(slurp(cfg.out_dir / "exp1" / "table2.tsv") == before);
    CHECK(fs::last_write_time(cfg.out_dir / "exp1" / "gumbel" / "rep001.tsv") ==
          mtime_before);
}

TEST_CASE("exp2: control run gives zero shifts and a row per model and bias") {
    ExperimentConfig cfg;
    cfg.experiment = "exp2";
    cfg.n_users = 24;
    cfg.n_items = 24;
    cfg.choices_per_user = 40;
    cfg.repetitions = 2;
    cfg.treated_count = 4;
    cfg.error_laws = {"gumbel"};
    cfg.bias_kinds = {"overexposure", "competition"};
    cfg.models = {ModelKind::MNL};
    cfg.seed = 9;
    cfg.threads = 1;
    cfg.max_epochs = 20;
    cfg.patience = 5;
    cfg.control = true;
    cfg.out_dir = fresh_dir("exp2_control");
    const ExperimentResult res = run_experiment2(cfg);
    CHECK(res.failures == 0);

    const fs::path table4 = cfg.out_dir / "exp2" / "table4.tsv";
    CHECK(data_rows(table4) == 2);  // one per (law, model, bias kind)
    std::ifstream in(table4);
    std::string line;
    bool cols_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!cols_seen) {
            cols_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string law, model, bias, mean;
        std::getline(ss, law, '\t');
        std::getline(ss, model, '\t');
        std::getline(ss, bias, '\t');
        std::getline(ss, mean, '\t');
        CHECK(std::stod(mean) == doctest::Approx(0.0));
    }
    CHECK(fs::exists(cfg.out_dir / "exp2" / "fig3_raw.tsv"));
}

TEST_CASE("profiles: desk and paper presets") {
    ExperimentConfig cfg;
    cfg.apply_profile("desk");
    CHECK(cfg.n_users == 100);
    CHECK(cfg.repetitions == 5);
    cfg.apply_profile("paper");
    CHECK(cfg.n_users == 500);
    CHECK(cfg.choices_per_user == 500);
    CHECK(cfg.repetitions == 100);
    CHECK_THROWS(cfg.apply_profile("nope"));
}
