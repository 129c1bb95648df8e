#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zlsfem/config_json.hpp"
#include "zlsfem/selfcheck.hpp"
#include "zlsfem/zlsfem.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace zlsfem;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "zlsfem_cli_test";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    os << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ZLSFEM_BENCH_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

// strip the wall_ms column (17th of 18) before comparing
std::string strip_wall_ms(const std::string& csv) {
    std::istringstream is(csv);
    std::ostringstream os;
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string field;
        int col = 0;
        while (std::getline(ls, field, ',')) {
            if (col != 16) os << field << ',';
            ++col;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace

TEST_CASE("config parsing") {
    SUBCASE("full config") {
        const BenchmarkConfig cfg = parse_benchmark_config(std::string(R"({
            "benchmark": "porous-media",
            "scheme": "split",
            "delta": 0.5,
            "gamma": 0.8,
            "theta": 0.4,
            "max_total_dofs": 5000,
            "max_outer_iters": 10,
            "c_f": 0.3221,
            "out": "x.csv",
            "seed": 7
        })"));
        CHECK(cfg.benchmark == BenchmarkKind::porous_media);
        CHECK(cfg.scheme == SchemeKind::split);
        CHECK(cfg.delta == 0.5);
        CHECK(cfg.max_total_dofs == 5000);
        CHECK(cfg.c_f.has_value());
        CHECK(cfg.out == "x.csv");
        CHECK(cfg.seed == 7);
    }
    SUBCASE("defaults fill in") {
        const BenchmarkConfig cfg = parse_benchmark_config(std::string(R"({"benchmark": "convex-energy"})"));
        CHECK(cfg.delta == 1.0);
        CHECK(cfg.gamma == 0.9);
        CHECK(cfg.theta == 0.3);
        CHECK(cfg.max_total_dofs == 200000);
        CHECK(cfg.max_outer_iters == 60);
        CHECK_FALSE(cfg.c_f.has_value());
    }
    SUBCASE("unknown keys rejected") {
        CHECK_THROWS_AS(parse_benchmark_config(std::string(R"({"benchmark": "convex-energy", "delta_": 1})")),
                        ConfigError);
    }
    SUBCASE("missing benchmark rejected") {
        CHECK_THROWS_AS(parse_benchmark_config(std::string(R"({"delta": 1})")), ConfigError);
    }
    SUBCASE("out-of-range parameters rejected") {
        CHECK_THROWS_AS(parse_benchmark_config(std::string(R"({"benchmark": "convex-energy", "gamma": 1.5})")),
                        ConfigError);
        CHECK_THROWS_AS(parse_benchmark_config(std::string(R"({"benchmark": "convex-energy", "theta": 0})")),
                        ConfigError);
        CHECK_THROWS_AS(parse_benchmark_config(std::string(R"({"benchmark": "nope"})")), ConfigError);
        CHECK_THROWS_AS(parse_benchmark_config(std::string("[1, 2]")), ConfigError);
        CHECK_THROWS_AS(parse_benchmark_config(std::string("{nope")), ConfigError);
    }
}

TEST_CASE("CSV output") {
    BenchmarkConfig cfg;
    cfg.benchmark = BenchmarkKind::convex_energy;
    cfg.max_total_dofs = 1200;
    cfg.max_outer_iters = 16;

    SUBCASE("schema header and row shape") {
        std::ostringstream os;
        run_benchmark(cfg, &os);
        std::istringstream is(os.str());
        std::string header;
        std::getline(is, header);
        CHECK(header ==
              "benchmark,scheme,delta,gamma,theta,k,ell,accepted,n_elem,n_rt,n_s1,eta,mu,N,grad_inf,"
              "marked,wall_ms,budget");
        std::string row;
        REQUIRE(std::getline(is, row));
        CHECK(row.substr(0, 34) == "convex-energy,emphasized-gradient,");
        int commas = 0;
        for (char c : row) commas += c == ',';
        CHECK(commas == 17);
    }
    SUBCASE("reruns are byte-identical up to wall time") {
        std::ostringstream a, b;
        run_benchmark(cfg, &a);
        run_benchmark(cfg, &b);
        CHECK(strip_wall_ms(a.str()) == strip_wall_ms(b.str()));
    }
    SUBCASE("budget flag sits on the final row") {
        std::ostringstream os;
        const RunRecord rec = run_benchmark(cfg, &os);
        REQUIRE(rec.budget_flagged);
        std::istringstream is(os.str());
        std::string line, last;
        std::getline(is, line); // header
        int ones = 0;
        while (std::getline(is, line)) {
            last = line;
            if (line.size() >= 2 && line.substr(line.size() - 2) == ",1") ++ones;
        }
        CHECK(ones == 1);
        CHECK(last.substr(last.size() - 2) == ",1");
    }
}

TEST_CASE("porous-media run logs the gradient norm and the box data exactly") {
    BenchmarkConfig cfg;
    cfg.benchmark = BenchmarkKind::porous_media;
    cfg.max_total_dofs = 2500;
    cfg.max_outer_iters = 25;
    std::ostringstream os;
    const RunRecord rec = run_benchmark(cfg, &os);
    REQUIRE_FALSE(rec.rows.empty());
    double gmax = 0.0;
    for (const auto& r : rec.rows)
        if (r.accepted) {
            CHECK(std::isfinite(r.grad_inf));
            CHECK(r.grad_inf > 0.0);
            gmax = std::max(gmax, r.grad_inf);
        }
    // the iterate gradients approach the flux scale of the data
    // (|p| / phi ~ 1e-2); they must stay within the same order
    CHECK(gmax < 5e-2);
    // the exact box-clipped source integral: integrating f1 over the whole
    // mesh gives the box area regardless of element alignment
    const ProblemSpec p = make_porous_media_problem();
    MeshPtr mesh = make_benchmark_mesh(BenchmarkKind::porous_media);
    double integral = 0.0;
    for (std::size_t t = 0; t < mesh->tris.size(); ++t)
        integral += p.f1.moments(tri_geom(*mesh, t)).first;
    CHECK(integral == doctest::Approx(0.04).epsilon(1e-13));
}

TEST_CASE("smaller damping never beats delta = 1 at matched budgets") {
    double min_n_full = 0.0;
    std::vector<double> min_n;
    for (double delta : {1.0, 0.1, 0.05}) {
        BenchmarkConfig cfg;
        cfg.benchmark = BenchmarkKind::convex_energy;
        cfg.delta = delta;
        cfg.max_total_dofs = 2000;
        cfg.max_outer_iters = 30;
        std::ostringstream os;
        const RunRecord rec = run_benchmark(cfg, &os);
        double mn = 1e300;
        for (const auto& r : rec.rows) mn = std::min(mn, r.nfun);
        if (delta == 1.0) min_n_full = mn;
        else min_n.push_back(mn);
    }
    for (double mn : min_n) CHECK(mn >= 0.99 * min_n_full);
}

TEST_CASE("selfcheck passes clean and fails under injected faults") {
    std::ostringstream log;
    CHECK(selfcheck(SelfcheckFault::none, log) == 0);
    std::ostringstream log2;
    CHECK(selfcheck(SelfcheckFault::halve_w1, log2) > 0);
    CHECK(log2.str().find("fundamental equivalence") != std::string::npos);
    std::ostringstream log3;
    CHECK(selfcheck(SelfcheckFault::reverse_mark_ties, log3) > 0);
    CHECK(log3.str().find("marking") != std::string::npos);
}

TEST_CASE("command-line interface") {
    const fs::path dir = temp_dir();

    SUBCASE("run subcommand writes the CSV") {
        const fs::path cfg = dir / "run.json";
        const fs::path out = dir / "run.csv";
        write_file(cfg, R"({"benchmark": "convex-energy", "max_total_dofs": 800, "max_outer_iters": 10})");
        REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string()) == 0);
        const std::string csv = read_file(out);
        CHECK(csv.rfind("benchmark,scheme", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') > 2);
    }
    SUBCASE("invalid config exits with 1") {
        const fs::path cfg = dir / "bad.json";
        write_file(cfg, R"({"benchmark": "convex-energy", "bogus": 1})");
        CHECK(run_cli("run --config " + cfg.string()) == 1);
        write_file(cfg, R"({"benchmark": "convex-energy", "gamma": 2.0})");
        CHECK(run_cli("run --config " + cfg.string()) == 1);
        CHECK(run_cli("run --config " + (dir / "missing.json").string()) == 1);
    }
    SUBCASE("selfcheck subcommand exit codes") {
        CHECK(run_cli("selfcheck") == 0);
        CHECK(run_cli("selfcheck --inject halve-w1") == 2);
        CHECK(run_cli("selfcheck --inject reverse-mark-ties") == 2);
    }
    SUBCASE("sweep produces one combined CSV ordered by value") {
        const fs::path cfg = dir / "sweep.json";
        const fs::path out = dir / "sweep.csv";
        write_file(cfg, R"({"benchmark": "convex-energy", "max_total_dofs": 600, "max_outer_iters": 8})");
        REQUIRE(run_cli("sweep --param delta --values 0.5,1 --config " + cfg.string() + " --out " +
                        out.string()) == 0);
        const std::string csv = read_file(out);
        CHECK(csv.find(",0.5,") != std::string::npos);
        CHECK(csv.find(",1,") != std::string::npos);
        // single header line
        std::istringstream is(csv);
        std::string line;
        int headers = 0;
        while (std::getline(is, line)) headers += line.rfind("benchmark,", 0) == 0;
        CHECK(headers == 1);
        // the parallel sweep produces the same rows
        const fs::path out_par = dir / "sweep_par.csv";
        REQUIRE(run_cli("sweep --param delta --values 0.5,1 --config " + cfg.string() + " --out " +
                        out_par.string() + " --parallel") == 0);
        CHECK(strip_wall_ms(read_file(out_par)) == strip_wall_ms(csv));
    }
    SUBCASE("indicator dumps appear behind the debug flag") {
        const fs::path cfg = dir / "dump.json";
        const fs::path out = dir / "dump.csv";
        const fs::path ind = dir / "indicators";
        write_file(cfg, R"({"benchmark": "convex-energy", "max_total_dofs": 400, "max_outer_iters": 6})");
        REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string() + " --dump-indicators " +
                        ind.string()) == 0);
        bool found = false;
        for (const auto& e : fs::directory_iterator(ind)) {
            found = true;
            const std::string content = read_file(e.path());
            CHECK(content.rfind("element_index,eta2,mu2", 0) == 0);
        }
        CHECK(found);
    }
    SUBCASE("outputs are identical across worker thread counts") {
        const fs::path cfg = dir / "threads.json";
        write_file(cfg, R"({"benchmark": "convex-energy", "max_total_dofs": 6000, "max_outer_iters": 30})");
        const fs::path out1 = dir / "threads1.csv";
        const fs::path out8 = dir / "threads8.csv";
        const std::string base = std::string(ZLSFEM_BENCH_PATH) + " run --config " + cfg.string();
        REQUIRE(WEXITSTATUS(std::system(
                    ("ZLSFEM_THREADS=1 " + base + " --out " + out1.string() + " >/dev/null 2>&1").c_str())) == 0);
        REQUIRE(WEXITSTATUS(std::system(
                    ("ZLSFEM_THREADS=8 " + base + " --out " + out8.string() + " >/dev/null 2>&1").c_str())) == 0);
        CHECK(strip_wall_ms(read_file(out1)) == strip_wall_ms(read_file(out8)));
    }
    SUBCASE("solution snapshot export") {
        const fs::path cfg = dir / "snap.json";
        const fs::path out = dir / "snap.csv";
        const fs::path sol = dir / "snap.sol";
        write_file(cfg, R"({"benchmark": "porous-media", "max_total_dofs": 700, "max_outer_iters": 8})");
        REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string() + " --dump-solution " +
                        sol.string()) == 0);
        std::istringstream is(read_file(sol));
        int k, ell;
        std::size_t nrt, ns1;
        REQUIRE((is >> k >> ell >> nrt >> ns1));
        CHECK(nrt > 0);
    }
}
