#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <pivotal/cli.hpp>

using namespace pivotal;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test
{
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("pivotal_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const Json& j) const
    {
        const std::string path = (dir_ / name).string();
        write_text_file(path, j.dump(2));
        return path;
    }

    int run(std::vector<std::string> args)
    {
        out_.str("");
        err_.str("");
        return parse_and_dispatch(std::move(args), out_, err_);
    }

    static Json small_sim()
    {
        return Json{{"n", 20}, {"p", 30}, {"q", 3}, {"s", 2}, {"seed", 4}};
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

} // namespace

TEST(Override, Paths)
{
    Json j{{"sim", {{"snr", 1.0}, {"design", "toeplitz"}}}, {"estimators", Json::array({{{"kind", "scl"}}})}};
    apply_override(j, "sim.snr=2.5");
    EXPECT_EQ(j["sim"]["snr"], 2.5);
    apply_override(j, "sim.design=incoherent");
    EXPECT_EQ(j["sim"]["design"], "incoherent");
    apply_override(j, "estimators.0.kind=\"sgcl\"");
    EXPECT_EQ(j["estimators"][0]["kind"], "sgcl");
    EXPECT_THROW(apply_override(j, "sim.snrr=1"), InvalidInput);
    EXPECT_THROW(apply_override(j, "estimators.1.kind=scl"), InvalidInput);
    EXPECT_THROW(apply_override(j, "sim.snr"), InvalidInput);
    EXPECT_THROW(apply_override(j, "=3"), InvalidInput);
}

TEST(Config, ExperimentRoundTrip)
{
    ExperimentConfig c;
    c.experiment = ExperimentKind::recovery_heatmap;
    c.sim.seed = 11;
    c.sim.rho_x = 0.25;
    c.sigma_min_grid = {0.1, 2.0};
    EstimatorSpec e;
    e.kind = EstimatorKind::sgcl;
    e.sigma_max = infinity;
    e.controls.tol = 1e-7;
    c.estimators = {e};
    const Json j = to_json(c);
    const ExperimentConfig back = experiment_config_from_json(Json::parse(j.dump()));
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.sim, c.sim);
    EXPECT_TRUE(std::isinf(back.estimators[0].sigma_max));
}

TEST(Config, UnknownKeysAreRejectedWithTheirPath)
{
    Json j{{"experiment", "pivotality"}, {"sim", {{"seed", 1}, {"rhox", 0.5}}}};
    try {
        experiment_config_from_json(j);
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("sim.rhox"), std::string::npos);
    }
    EXPECT_THROW(experiment_config_from_json(Json{{"experiment", "pivotality"}, {"sim", {{"n", 3}}}}), InvalidInput);
    EXPECT_THROW(fit_config_from_json(Json{{"kind", "scl"}, {"lamda", 0.1}, {"sim", {{"seed", 0}}}}), InvalidInput);
}

TEST(Config, FitRoundTrip)
{
    FitConfig c;
    c.estimator.kind = EstimatorKind::mt_lasso;
    c.estimator.lambda = 0.02;
    c.sim = SimulationSpec{};
    c.replicate = 3;
    c.diagnostics.rep_trials = 50;
    const Json j = to_json(c);
    EXPECT_EQ(to_json(fit_config_from_json(j)), j);
    FitConfig both = c;
    both.data = "somewhere";
    EXPECT_THROW(both.validate(), InvalidInput);
    FitConfig neither = c;
    neither.sim.reset();
    EXPECT_THROW(neither.validate(), InvalidInput);
}

TEST(Dataset, WriteReadRoundTrip)
{
    const fs::path dir = fs::temp_directory_path() / "pivotal_dataset_roundtrip";
    fs::remove_all(dir);
    SimulationSpec s;
    s.n = 15;
    s.p = 10;
    s.q = 2;
    s.s = 3;
    const Dataset d = simulate(s);
    write_dataset(d, dir.string());
    const Dataset back = read_dataset(dir.string());
    EXPECT_EQ(back.x, d.x);
    EXPECT_EQ(back.y, d.y);
    EXPECT_EQ(back.truth->coef, d.truth->coef);
    EXPECT_EQ(back.truth->support, d.truth->support);
    EXPECT_EQ(back.truth->sigma, d.truth->sigma);

    Json manifest = Json::parse(read_text_file((dir / "manifest.json").string()));
    manifest["truth"]["support"] = Json::array({0});
    write_text_file((dir / "manifest.json").string(), manifest.dump());
    EXPECT_THROW(read_dataset(dir.string()), InvalidInput);
    fs::remove_all(dir);
}

TEST_F(Cli, HelpAndUsageErrors)
{
    EXPECT_EQ(run({"--help"}), 0);
    EXPECT_NE(out_.str().find("experiment"), std::string::npos);
    EXPECT_EQ(run({}), 2);
    EXPECT_EQ(run({"fit"}), 2);
    EXPECT_EQ(run({"frobnicate", "--config", "x.json"}), 2);
    EXPECT_EQ(run({"fit", "--config", (dir_ / "missing.json").string()}), 2);
    EXPECT_NE(err_.str().find("missing.json"), std::string::npos);
}

TEST_F(Cli, NegativeLambdaIsAConfigError)
{
    const std::string cfg = write("fit.json", Json{{"kind", "scl"}, {"lambda", 0.1}, {"sim", small_sim()}});
    EXPECT_EQ(run({"fit", "--config", cfg, "--set", "lambda=-1"}), 2);
    EXPECT_NE(err_.str().find("lambda"), std::string::npos);
    EXPECT_EQ(run({"fit", "--config", cfg, "--set", "lambdaa=1"}), 2);
    EXPECT_NE(err_.str().find("lambdaa"), std::string::npos);
}

TEST_F(Cli, UnknownKeyInFileIsAConfigError)
{
    const std::string cfg = write("fit.json", Json{{"kind", "scl"}, {"sigma_mn", 0.1}, {"sim", small_sim()}});
    EXPECT_EQ(run({"fit", "--config", cfg}), 2);
    EXPECT_NE(err_.str().find("sigma_mn"), std::string::npos);
}

TEST_F(Cli, FitPrintsJson)
{
    const std::string cfg = write("fit.json", Json{{"kind", "mt_lasso"}, {"lambda", 0.05}, {"sim", small_sim()}});
    ASSERT_EQ(run({"fit", "--config", cfg}), 0) << err_.str();
    const Json j = Json::parse(out_.str());
    EXPECT_EQ(j["kind"], "mt_lasso");
    EXPECT_EQ(j["coef"]["rows"], 30);
    EXPECT_TRUE(j["converged"].get<bool>());

    ASSERT_EQ(run({"fit", "--config", cfg, "--out", (dir_ / "o").string()}), 0);
    EXPECT_TRUE(fs::exists(dir_ / "o" / "fit.json"));
}

TEST_F(Cli, LambdaMaxMatchesLibrary)
{
    const std::string cfg = write("f.json", Json{{"kind", "scl"}, {"sigma_min", 0.2}, {"sim", small_sim()}});
    ASSERT_EQ(run({"lambda-max", "--config", cfg}), 0) << err_.str();
    const SimulationSpec s = simulation_spec_from_json(small_sim());
    const Dataset d = simulate(s);
    EXPECT_EQ(parse_double(out_.str().substr(0, out_.str().find('\n')), "out"),
              lambda_max(EstimatorKind::scl, d.x, d.y, 0.2));
}

TEST_F(Cli, SimulateThenFitFromRelativeDataPath)
{
    const std::string sim = write("sim.json", small_sim());
    ASSERT_EQ(run({"simulate", "--config", sim, "--out", (dir_ / "data").string(), "--replicate", "2"}), 0)
        << err_.str();
    EXPECT_TRUE(fs::exists(dir_ / "data" / "manifest.json"));
    EXPECT_EQ(read_dataset((dir_ / "data").string()).y, simulate(simulation_spec_from_json(small_sim()), 2).y);

    const std::string cfg = write("fit.json", Json{{"kind", "scl"}, {"lambda", 0.1}, {"data", "data"}});
    ASSERT_EQ(run({"diagnose", "--config", cfg, "--set", "diagnostics.rep_trials=20"}), 0) << err_.str();
    const Json rep = Json::parse(out_.str());
    EXPECT_TRUE(rep.contains("events"));
    EXPECT_TRUE(rep.contains("recovery"));
}

TEST_F(Cli, ExperimentRerunIsByteIdentical)
{
    const Json cfg{{"experiment", "recovery_heatmap"},
                   {"sim", small_sim()},
                   {"estimators", Json::array({{{"kind", "scl"}}})},
                   {"lambda_grid", {{"count", 4}, {"min_ratio", 0.1}}},
                   {"sigma_min_grid", {0.5, 2.0}},
                   {"replicates", 2}};
    const std::string path = write("exp.json", cfg);
    ASSERT_EQ(run({"experiment", "--config", path, "--out", (dir_ / "a").string()}), 0) << err_.str();
    ASSERT_EQ(run({"experiment", "--config", path, "--out", (dir_ / "b").string(), "--jobs", "2"}), 0);
    for (const char* f : {"recovery_heatmap.csv", "recovery_heatmap_cells.csv", "recovery_heatmap.config.json"}) {
        EXPECT_EQ(read_text_file((dir_ / "a" / f).string()), read_text_file((dir_ / "b" / f).string())) << f;
    }
    // the sidecar is a complete config: running it again reproduces the table
    ASSERT_EQ(run({"experiment", "--config", (dir_ / "a" / "recovery_heatmap.config.json").string(), "--out",
                   (dir_ / "c").string()}),
              0);
    EXPECT_EQ(read_text_file((dir_ / "a" / "recovery_heatmap.csv").string()),
              read_text_file((dir_ / "c" / "recovery_heatmap.csv").string()));
    EXPECT_EQ(run({"experiment", "--config", path, "--jobs", "0"}), 2);
}

TEST(Presets, AllParseAndValidate)
{
    int count = 0;
    for (const auto& entry : fs::directory_iterator(PIVOTAL_PRESET_DIR)) {
        if (entry.path().extension() != ".json") continue;
        ++count;
        const Json j = Json::parse(read_text_file(entry.path().string()));
        SCOPED_TRACE(entry.path().filename().string());
        if (j.contains("experiment")) {
            EXPECT_NO_THROW(experiment_config_from_json(j).validate());
        } else if (j.contains("kind")) {
            EXPECT_NO_THROW(fit_config_from_json(j).validate());
        } else {
            EXPECT_NO_THROW(simulation_spec_from_json(j).validate());
        }
    }
    EXPECT_GT(count, 0);
}
