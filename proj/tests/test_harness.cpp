#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pbe/error.hpp"
#include "pbe/harness.hpp"

using namespace pbe;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

std::string csv(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream out;
  write_convergence_csv(out, rows);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pbe_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("pbe_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("manufactured problem data") {
  const MmsProblem mms = mms_problem();
  const ProblemSpec& s = mms.spec;
  CHECK(s.source(0.0, 0.5, {0.5, 0.5}) == doctest::Approx(2.0 * pi * pi - 0.1).epsilon(1e-14));
  CHECK(s.epsilon == 1.0);
  CHECK(s.b.x == 1.0);
  CHECK(s.b.y == 1.0);
  CHECK(s.growth(0.5) == doctest::Approx(1.0));
  CHECK(s.growth(0.0) == doctest::Approx(0.5));
  CHECK_NOTHROW(validate_problem(s));

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const Point2 x{u(rng), u(rng)};
    const double t = u(rng);
    CHECK(s.z_bdry(t, x) == 0.0);
    CHECK(s.z_init(0.0, x) == s.z_bdry(0.0, x));
  }
}

TEST_CASE("the source matches finite differences of the exact solution") {
  const MmsProblem mms = mms_problem();
  const ProblemSpec& s = mms.spec;
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const double d = 1e-4;
  for (int k = 0; k < 40; ++k) {
    const double t = u(rng), l = u(rng);
    const Point2 x{u(rng), u(rng)};
    auto z = [&](double tt, double ll, double xx, double yy) { return mms.exact(tt, ll, {xx, yy}); };
    const double zt = (z(t + d, l, x.x, x.y) - z(t - d, l, x.x, x.y)) / (2 * d);
    const double zl = (z(t, l + d, x.x, x.y) - z(t, l - d, x.x, x.y)) / (2 * d);
    const double zx = (z(t, l, x.x + d, x.y) - z(t, l, x.x - d, x.y)) / (2 * d);
    const double zy = (z(t, l, x.x, x.y + d) - z(t, l, x.x, x.y - d)) / (2 * d);
    const double c = z(t, l, x.x, x.y);
    const double lap = (z(t, l, x.x + d, x.y) + z(t, l, x.x - d, x.y) + z(t, l, x.x, x.y + d) +
                        z(t, l, x.x, x.y - d) - 4.0 * c) /
                       (d * d);
    const double f = zt + s.growth(l) * zl - s.epsilon * lap + s.b.x * zx + s.b.y * zy;
    CHECK(s.source(t, l, x) == doctest::Approx(f).epsilon(1e-5).scale(1.0));

    const Vec2 g = mms.exact_gradient(t, l, x);
    CHECK(g.x == doctest::Approx(zx).epsilon(1e-7).scale(1.0));
    CHECK(g.y == doctest::Approx(zy).epsilon(1e-7).scale(1.0));
    const Vec2 gi = s.z_init_grad(l, x);
    CHECK(gi.x == doctest::Approx(mms.exact_gradient(0.0, l, x).x));
  }
}

TEST_CASE("coupled steps") {
  CHECK(coupled_step(0.25, Coupling::H2) == 0.0625);
  CHECK(coupled_step(0.5, Coupling::H3) == 0.125);
  CHECK(coupled_step(0.125, Coupling::Equal) == 0.125);
}

TEST_CASE("order columns are log2 error ratios") {
  std::vector<ConvergenceRow> rows{{0.5, 0.25, 0.25, 0.3, {}, 2.0, {}},
                                   {0.25, 0.0625, 0.0625, 0.07, {}, 1.1, {}},
                                   {0.125, 0.015625, 0.015625, 0.0191, {}, 0.52, {}}};
  fill_orders(rows);
  CHECK_FALSE(rows[0].l2_order.has_value());
  CHECK_FALSE(rows[0].h1_order.has_value());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::abs(*rows[i].l2_order - std::log2(rows[i - 1].l2_error / rows[i].l2_error)) <= 1e-12);
    CHECK(std::abs(*rows[i].h1_order - std::log2(rows[i - 1].h1_error / rows[i].h1_error)) <= 1e-12);
  }
}

TEST_CASE("convergence CSV") {
  std::vector<ConvergenceRow> rows{{0.25, 0.0625, 0.0625, 0.0748712345, {}, 0.81234, {}},
                                   {0.125, 0.015625, 0.015625, 0.0201999, {}, 0.4123, {}},
                                   {std::ldexp(1.0, -5), std::ldexp(1.0, -10), std::ldexp(1.0, -10),
                                    1.234567e-4, {}, 0.0101, {}}};
  fill_orders(rows);
  const std::string text = csv(rows);

  SUBCASE("layout") {
    std::istringstream in(text);
    std::string header, first, second;
    std::getline(in, header);
    std::getline(in, first);
    std::getline(in, second);
    CHECK(header == "h,tau,iota,l2_error,l2_order,h1_error,h1_order");
    CHECK(first == "0.25,0.0625,0.0625,7.48712e-02,,8.12340e-01,");
    CHECK(second.substr(second.find_last_of(',') + 1).size() == 6);  // e.g. 0.9780
  }
  SUBCASE("round trip") {
    std::istringstream in(text);
    const std::vector<ConvergenceRow> back = read_convergence_csv(in);
    REQUIRE(back.size() == rows.size());
    CHECK(csv(back) == text);
    std::istringstream again(csv(back));
    const std::vector<ConvergenceRow> twice = read_convergence_csv(again);
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(twice[i].h == back[i].h);
      CHECK(twice[i].tau == rows[i].tau);
      CHECK(twice[i].l2_error == back[i].l2_error);
      CHECK(twice[i].l2_order == back[i].l2_order);
      CHECK(twice[i].h1_order == back[i].h1_order);
    }
    CHECK(back[0].h == rows[0].h);
    CHECK(back[2].iota == rows[2].iota);
    CHECK(back[1].l2_error == doctest::Approx(rows[1].l2_error).epsilon(1e-5));
  }
  SUBCASE("malformed input") {
    std::istringstream bad_header("h,tau\n");
    CHECK_THROWS_AS(read_convergence_csv(bad_header), InvalidArgument);
    std::istringstream bad_row("h,tau,iota,l2_error,l2_order,h1_error,h1_order\n0.5,x,1,1,,1,\n");
    CHECK_THROWS_AS(read_convergence_csv(bad_row), InvalidArgument);
    std::istringstream short_row("h,tau,iota,l2_error,l2_order,h1_error,h1_order\n0.5,1,1\n");
    CHECK_THROWS_AS(read_convergence_csv(short_row), InvalidArgument);
  }
}

TEST_CASE("study configuration checks") {
  StudyConfig c;
  c.kind = StudyKind::Convergence;
  c.levels = {0.25, 0.5};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.levels = {0.5, 0.25};
  CHECK_NOTHROW(c.validate());
  c.workers = {0};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);

  StudyConfig ch;
  ch.kind = StudyKind::Characteristics;
  ch.levels = {0.25};
  ch.order = ElementOrder::P1;
  CHECK_THROWS_AS(characteristics_study(ch), InvalidArgument);
}

TEST_CASE("study levels are checked before anything runs") {
  const MmsProblem mms = mms_problem();
  CHECK_THROWS_AS(run_mms_level(mms, ElementOrder::P1, 0.5, 0.5, 0.001, 0), CflViolation);
  CHECK_THROWS_AS(run_mms_level(mms, ElementOrder::P1, 0.5, 0.25, 0.125, 0), CflViolation);

  StudyConfig c;
  c.kind = StudyKind::Convergence;
  c.coupling = Coupling::Equal;
  c.levels = {0.5, 0.25};
  CHECK_NOTHROW(convergence_study(c));
  // the second level's tau does not divide T
  c.final_time = 0.5;
  c.levels = {0.5, 0.3};
  CHECK_THROWS_AS(convergence_study(c), SizingError);
}

TEST_CASE("small convergence study: decreasing errors and byte-identical reruns") {
  StudyConfig c;
  c.kind = StudyKind::Convergence;
  c.levels = {0.5, 0.25, 0.125};
  c.coupling = Coupling::H2;
  const std::vector<ConvergenceRow> a = convergence_study(c);
  const std::vector<ConvergenceRow> b = convergence_study(c);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 1; i < a.size(); ++i) {
    CHECK(a[i].l2_error < a[i - 1].l2_error);
    CHECK(a[i].h1_error < a[i - 1].h1_error);
  }
  CHECK(csv(a) == csv(b));

  c.workers = {3};
  CHECK(csv(convergence_study(c)) == csv(a));
}

TEST_CASE("halving iota at fixed fine h roughly halves the L2 error") {
  const MmsProblem mms = mms_problem();
  const double h = 1.0 / 16;
  const LevelResult coarse = run_mms_level(mms, ElementOrder::P2, h, 1.0 / 16, 1.0 / 16, 0);
  const LevelResult fine = run_mms_level(mms, ElementOrder::P2, h, 1.0 / 32, 1.0 / 32, 0);
  const double ratio = coarse.l2 / fine.l2;
  MESSAGE("error ratio = ", ratio);
  CHECK(ratio >= 1.7);
  CHECK(ratio <= 2.3);
}

TEST_CASE("scaling study") {
  SUBCASE("strong mode") {
    StudyConfig c;
    c.kind = StudyKind::Scaling;
    c.h = 0.25;
    c.tau = 0.0625;
    c.iota = 0.0625;
    c.final_time = 0.5;
    c.workers = {2, 1, 4};
    const ScalingResult r = scaling_study(c);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].workers == 1);
    CHECK(r.rows[0].speedup == 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(r.message_counts[i] == static_cast<std::size_t>((r.rows[i].workers - 1) * 8));
    }
  }
  SUBCASE("weak mode") {
    StudyConfig c;
    c.kind = StudyKind::Scaling;
    c.scaling_mode = ScalingMode::Weak;
    c.h = 0.25;
    c.block = 4;
    c.steps = 3;
    c.workers = {1, 2, 4};
    const ScalingResult r = scaling_study(c);
    REQUIRE(r.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(r.message_counts[i] == static_cast<std::size_t>((r.rows[i].workers - 1) * 3));
      CHECK(r.rows[i].max_worker_seconds >= r.rows[i].avg_worker_seconds);
    }
  }
  SUBCASE("baseline other than one worker is annotated") {
    StudyConfig c;
    c.kind = StudyKind::Scaling;
    c.h = 0.5;
    c.tau = 0.25;
    c.iota = 0.25;
    c.final_time = 0.5;
    c.workers = {2, 3};
    const ScalingResult r = scaling_study(c);
    CHECK(r.rows[0].speedup == 1.0);
    CHECK(r.note.find("P=2") != std::string::npos);
  }
}

TEST_CASE("command line: convergence study writes the CSV") {
  TempDir tmp;
  const std::string out = tmp.file("t1.csv");
  CHECK(run_cli({"--study", "convergence", "--element", "p1", "--levels", "2,3,4", "--coupling", "h2",
                 "--out", out}) == kExitOk);
  std::ifstream in(out);
  const std::vector<ConvergenceRow> rows = read_convergence_csv(in);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].h == 0.25);
  CHECK(rows[2].h == 0.0625);
  CHECK(rows[2].tau == 0.0625 * 0.0625);
  CHECK_FALSE(rows[0].l2_order.has_value());
  CHECK(rows[2].l2_order.has_value());
  CHECK(rows[2].h1_order.has_value());
}

TEST_CASE("command line: single run through the pipeline") {
  TempDir tmp;
  const std::string out = tmp.file("single.csv");
  const std::string prefix = tmp.file("snap");
  const std::string matrix = tmp.file("k.coo");
  CHECK(run_cli({"--study", "single", "--h", "0.125", "--tau", "0.0625", "--iota", "0.0625", "--workers",
                 "4", "--out", out, "--snapshots", "0,16", "--snapshot-prefix", prefix, "--dump-matrix",
                 matrix}) == kExitOk);
  std::ifstream in(out);
  const std::vector<ConvergenceRow> rows = read_convergence_csv(in);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].l2_error > 0.0);
  CHECK(rows[0].l2_error < 0.1);
  CHECK(fs::exists(prefix + "_n0.txt"));
  CHECK(fs::exists(prefix + "_n16.txt"));
  CHECK_FALSE(slurp(matrix).empty());

  // same run without workers: identical snapshots
  const std::string seq_prefix = tmp.file("seq");
  CHECK(run_cli({"--study", "single", "--h", "0.125", "--tau", "0.0625", "--iota", "0.0625", "--snapshots",
                 "16", "--snapshot-prefix", seq_prefix}) == kExitOk);
  CHECK(slurp(seq_prefix + "_n16.txt") == slurp(prefix + "_n16.txt"));
}

TEST_CASE("command line: failures have distinct statuses") {
  CHECK(run_cli({"--tau", "0.5", "--iota", "0.001"}) == kExitCfl);
  CHECK(run_cli({"--bogus"}) == kExitUsage);
  CHECK(run_cli({"--h", "abc"}) == kExitUsage);
  CHECK(run_cli({"--element", "p3"}) == kExitUsage);
  CHECK(run_cli({"--workers", "2,x"}) == kExitUsage);
  CHECK(run_cli({"--h", "0.3"}) == kExitConfig);
  CHECK(run_cli({"--study", "convergence", "--levels", "3,2"}) == kExitConfig);
  CHECK(run_cli({"--solver", "iterative", "--max-iter", "1", "--tol", "1e-15", "--h", "0.0625"}) ==
        kExitSolver);
  CHECK(run_cli({"--solver", "iterative", "--max-iter", "1", "--tol", "1e-15", "--h", "0.0625",
                 "--workers", "2"}) == kExitSolver);
}

TEST_CASE("command line: config file with flags taking precedence") {
  TempDir tmp;
  const std::string cfg = tmp.file("run.cfg");
  {
    std::ofstream f(cfg);
    f << "study = convergence\nlevels = 1,2\ncoupling = equal\nelement = p2\n";
  }
  const std::string a = tmp.file("a.csv");
  CHECK(run_cli({"--config", cfg, "--out", a}) == kExitOk);
  std::ifstream ina(a);
  const auto rows_a = read_convergence_csv(ina);
  REQUIRE(rows_a.size() == 2);
  CHECK(rows_a[1].h == 0.25);

  const std::string b = tmp.file("b.csv");
  CHECK(run_cli({"--config", cfg, "--levels", "1,2,3", "--out", b}) == kExitOk);
  std::ifstream inb(b);
  CHECK(read_convergence_csv(inb).size() == 3);
}
