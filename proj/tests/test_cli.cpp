#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / ("statmicro_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args, std::string* err = nullptr) {
    const fs::path errfile = workdir() / "stderr.txt";
    const std::string cmd = std::string(STATMICRO_CLI) + " " + args + " > " + (workdir() / "stdout.txt").string() + " 2> " +
                            errfile.string();
    const int status = std::system(cmd.c_str());
    if (err) {
        std::ifstream in(errfile);
        std::stringstream ss;
        ss << in.rdbuf();
        *err = ss.str();
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = workdir() / name;
    std::ofstream(p) << text;
    return p;
}

const std::string kParams = "n_commodities = 1\na = 1.0\nb = 1.0\nd = 4.0\ns = 1.0\nm = 100.0\nkinetic_accel = 0.001\n";

}  // namespace

TEST_CASE("solve writes prices and market clearing") {
    const auto params = write("p.toml", kParams);
    const auto out = workdir() / "solve";
    REQUIRE(run("solve -p " + params.string() + " -o " + out.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(out / "solve.json"));
    CHECK(j["p0"][0].get<double>() == doctest::Approx(2.0));
    CHECK(j["gamma"][0].get<double>() == doctest::Approx(4.0 / 2.0 * 0.5 + 2.0 * 0.5));
    CHECK(j["market_clearing"]["expenditure"].get<double>() == doctest::Approx(100.0));
    CHECK(j["config_hash"].is_string());
    REQUIRE(run("solve --format csv -p " + params.string() + " -o " + out.string()) == 0);
    CHECK(slurp(out / "solve.csv").rfind("# config_hash=", 0) == 0);
}

TEST_CASE("propagate and sample are byte-identical on rerun") {
    const auto params = write("p2.toml", kParams);
    const auto config = write("run.toml", "params = \"p2.toml\"\nseed = 9\n[lattice]\nn_steps = 32\n[sampler]\nn_sweeps = 600\n"
                                          "n_burnin = 100\nmax_lag = 3\n");
    const auto a = workdir() / "a";
    const auto b = workdir() / "b";
    REQUIRE(run("propagate -c " + config.string() + " -o " + a.string()) == 0);
    REQUIRE(run("sample -c " + config.string() + " -o " + a.string()) == 0);
    REQUIRE(run("propagate -c " + config.string() + " -o " + b.string()) == 0);
    REQUIRE(run("sample -c " + config.string() + " -o " + b.string()) == 0);
    for (const char* f : {"propagator_lattice.csv", "propagator_continuum.csv", "propagate.json", "sample.json",
                          "sample.csv", "sample_compare.csv"}) {
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK_FALSE(slurp(a / f).empty());
    }
    const auto j = nlohmann::json::parse(slurp(a / "sample.json"));
    CHECK(j["seed"] == 9);
    CHECK(j["sampler"]["n_sweeps"] == 600);
    CHECK(fs::exists(a / "run.log"));
    // a flag overrides the config file
    REQUIRE(run("sample -c " + config.string() + " --seed 10 -o " + b.string()) == 0);
    CHECK(slurp(a / "sample.csv") != slurp(b / "sample.csv"));
}

TEST_CASE("calibrate reads a series written by sample") {
    const auto params = write("p3.toml", kParams);
    const auto out = workdir() / "cal";
    const auto series = workdir() / "series.csv";
    REQUIRE(run("sample -p " + params.string() + " --n-steps 2000 --sweeps 400 --burnin 300 --max-lag 2 -o " +
                out.string() + " --series-out " + series.string()) == 0);
    REQUIRE(run("calibrate -p " + params.string() + " --series " + series.string() + " --bootstrap 4 -o " + out.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(out / "calibration.json"));
    CHECK(j["channels"].size() == 1);
    CHECK(fs::exists(out / "calibration_fit.csv"));
}

TEST_CASE("errors map to exit codes") {
    std::string err;
    CHECK(run("", &err) == 2);
    CHECK(run("solve --bogus", &err) == 2);
    CHECK(run("solve -p " + (workdir() / "missing.toml").string(), &err) == 2);
    CHECK(err.find("does not exist") != std::string::npos);

    const auto params = write("p4.toml", kParams);
    const auto config = write("bad.toml", "params = \"p4.toml\"\n[lattice]\nn_step = 32\n");
    CHECK(run("propagate -c " + config.string(), &err) == 2);
    CHECK(err.find("bad.toml:3") != std::string::npos);
    CHECK(err.find("lattice.n_step") != std::string::npos);

    const auto bad_params = write("p5.toml", "n_commodities = 1\na = 1.0\nb = 1.0\nd = -4.0\ns = 1.0\nm = 100.0\n");
    CHECK(run("solve -p " + bad_params.string(), &err) == 2);

    const auto zero = write("zero.toml", "params = \"p4.toml\"\n[lattice]\nboundary = \"zero-fluctuation\"\n");
    CHECK(run("propagate -c " + zero.string() + " -o " + (workdir() / "z").string(), &err) == 1);

    const auto series = write("flat.csv", "timestamp,a\n0,1\n1,1\n2,1\n3,1\n4,1\n5,1\n6,1\n7,1\n8,1\n9,1\n10,1\n");
    CHECK(run("calibrate --m 10 --series " + series.string() + " --max-lag 1 -o " + (workdir() / "f").string(), &err) != 0);
}
