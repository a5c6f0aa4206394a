#include "tfcgc/cli.hpp"
#include "tfcgc/error.hpp"
#include "tfcgc/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace tfcgc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &tag) {
    path = fs::temp_directory_path() /
           ("tfcgc_test_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string &name) const { return (path / name).string(); }
};

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "tfcgc");
  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TFCGCMap tiny_map(std::vector<std::size_t> times, std::vector<double> freqs, double value) {
  TFCGCMap m;
  m.times = std::move(times);
  m.freqs = std::move(freqs);
  m.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(m.times.size()),
                                       static_cast<Eigen::Index>(m.freqs.size()), value);
  m.flagged.assign(m.times.size() * m.freqs.size(), 0);
  m.apply_threshold(0.0);
  return m;
}

} // namespace

TEST_SUITE("io") {

TEST_CASE("numbers keep 17 significant digits") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  for (double v : {1.0 / 3.0, -2.5e-300, 123456.789, 6.02214076e23})
    CHECK(parse_number(format_number(v), "v") == v);
  CHECK_THROWS_AS(parse_number("1.5x", "v"), Error);
  CHECK_THROWS_AS(parse_number("", "v"), Error);
}

TEST_CASE("trial CSV round trip is byte identical") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  TrialSet d;
  d.channels = {"x", "y", "z"};
  d.sampling_rate = 200;
  for (int b = 0; b < 3; ++b) {
    Eigen::MatrixXd m(25, 3);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = normal(rng);
    d.trials.push_back(m);
  }
  std::ostringstream first;
  write_trials_csv(first, d);
  std::istringstream in(first.str());
  const auto back = parse_trials_csv(in, 200);
  CHECK(back.channels == d.channels);
  for (int b = 0; b < 3; ++b)
    CHECK(back.trials[static_cast<std::size_t>(b)] == d.trials[static_cast<std::size_t>(b)]);
  std::ostringstream second;
  write_trials_csv(second, back);
  CHECK(first.str() == second.str());
}

TEST_CASE("trial CSV: interleaved rows and ordering by id") {
  std::istringstream in("trial,t,a,b,c\n"
                        "9,2,1,2,3\n"
                        "4,1,7,8,9\n"
                        "9,1,4,5,6\n"
                        "4,2,0,0,1\n");
  const auto d = parse_trials_csv(in, 10.0);
  REQUIRE(d.trial_count() == 2);
  CHECK(d.trials[0](0, 0) == 7.0); // id 4 first
  CHECK(d.trials[1](0, 0) == 4.0);
  CHECK(d.trials[1](1, 2) == 3.0);
  CHECK(d.sampling_rate == 10.0);
}

TEST_CASE("trial CSV errors") {
  auto parse = [](const std::string &text) {
    std::istringstream in(text);
    return parse_trials_csv(in, 1.0);
  };
  CHECK_THROWS_AS(parse(""), Error);
  CHECK_THROWS_AS(parse("t,trial,a\n1,1,0\n"), Error);
  CHECK_THROWS_AS(parse("trial,t,a,a\n1,1,0,0\n"), Error);
  CHECK_THROWS_AS(parse("trial,t,a\n1,1,0\n1,3,0\n"), Error);     // gap
  CHECK_THROWS_AS(parse("trial,t,a\n1,1,0\n1,1,0\n"), Error);     // duplicate
  CHECK_THROWS_AS(parse("trial,t,a\n1,1,0\n2,1,0\n2,2,0\n"), Error); // ragged
  CHECK_THROWS_AS(parse("trial,t,a\n1,1,zz\n"), Error);
  CHECK_THROWS_AS(parse("trial,t,a\n1,0,1\n"), Error);
  CHECK_THROWS_AS(read_trials_csv("/nonexistent/file.csv", 1.0), Error);
}

TEST_CASE("map CSV round trip is byte identical") {
  TFCGCMap m = tiny_map({3, 5}, {0.0, 12.5, 25.0}, 0.0);
  m.values << 0.1, 1.0 / 3.0, 0.0, 2.0, 1e-17, 7.25;
  m.flagged[2] = 1;
  m.apply_threshold(0.2);
  std::ostringstream first;
  write_map_csv(first, m);
  CHECK(first.str().rfind("t,f,gc,significant,flagged\n3,0,0.10000000000000001,0,0\n", 0) == 0);
  std::istringstream in(first.str());
  const auto back = parse_map_csv(in);
  CHECK(back.times == m.times);
  CHECK(back.freqs == m.freqs);
  CHECK(back.values == m.values);
  CHECK(back.significant == m.significant);
  CHECK(back.flagged == m.flagged);
  std::ostringstream second;
  write_map_csv(second, back);
  CHECK(first.str() == second.str());

  std::istringstream broken("t,f,gc,significant,flagged\n3,0,1,0,0\n3,1,1,0,0\n5,0,1,0,0\n");
  CHECK_THROWS_AS(parse_map_csv(broken), Error);
}

TEST_CASE("key-value files") {
  KeyValueFile kv;
  kv.set("a", "1");
  kv.set("b", "x y");
  kv.set("a", "2");
  CHECK(kv.entries().size() == 2);
  CHECK(kv.get("a") == "2");
  std::istringstream in("# comment\n a = 2 \n\nb = x y\n");
  const auto back = KeyValueFile::parse(in);
  CHECK(back.entries() == kv.entries());
  CHECK(KeyValueFile::parse(*std::make_unique<std::istringstream>(kv.str())).entries() ==
        kv.entries());
  std::istringstream bad("novalue\n");
  CHECK_THROWS_AS(KeyValueFile::parse(bad), Error);
  CHECK_THROWS_AS(kv.get("missing"), Error);
}

} // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("usage and exit codes") {
  CHECK(exit_code(ErrorKind::InvalidArgument) == 1);
  CHECK(exit_code(ErrorKind::Shape) == 1);
  CHECK(exit_code(ErrorKind::Numeric) == 2);
  CHECK(exit_code(ErrorKind::Io) == 3);
  CHECK(run({}).code == 1);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"simulate", "--help"}).code == 0);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"simulate", "--no-such-flag"}).code == 1);
  TempDir dir("usage");
  CHECK(run({"simulate", "--out", dir.path.string(), "--scenario", "sim9"}).code == 1);
  CHECK(run({"simulate", "--out", dir.path.string(), "--samples", "abc"}).code == 1);
  CHECK(run({"simulate", "--out", (dir.path / "missing").string()}).code == 3);
  CHECK(run({"cgc", "--out", dir.path.string(), "--input", dir / "none.csv"}).code == 3);
  CHECK(run({"cgc", "--out", dir.path.string(), "--estimator", "lasso",
             "--input", dir / "none.csv"})
            .code == 1);
}

TEST_CASE("simulate is reproducible and echoes its config") {
  TempDir a("sim_a"), b("sim_b");
  for (auto *d : {&a, &b})
    REQUIRE(run({"simulate", "--scenario", "sim2", "--seed", "7", "--samples", "120",
                 "--trials", "3", "--out", d->path.string()})
                .code == 0);
  CHECK(slurp(a / "data.csv") == slurp(b / "data.csv"));
  CHECK(slurp(a / "truth.csv") == slurp(b / "truth.csv"));
  const auto cfg = KeyValueFile::load(a / "config.txt");
  CHECK(cfg.get("command") == "simulate");
  CHECK(cfg.get("seed") == "7");
  CHECK(cfg.get("samples") == "120");
  CHECK(cfg.get("noise") == "0.01,0.01,0.01");
  CHECK_FALSE(cfg.has("threads"));
  const auto data = read_trials_csv(a / "data.csv", 200);
  CHECK(data.trial_count() == 3);
  CHECK(data.samples() == 120);
}

TEST_CASE("sim1 default length") {
  TempDir dir("sim1");
  REQUIRE(run({"simulate", "--scenario", "sim1", "--out", dir.path.string()}).code == 0);
  const auto data = read_trials_csv(dir / "data.csv", 200);
  CHECK(data.trial_count() == 1);
  CHECK(data.samples() == 2000);
  CHECK(KeyValueFile::load(dir / "config.txt").get("seed") == "0");
}

TEST_CASE("cgc needs three channels") {
  TempDir dir("two");
  std::ofstream(dir / "two.csv") << "trial,t,a,b\n1,1,0,1\n1,2,1,0\n1,3,0,0\n";
  const auto r = run({"cgc", "--input", dir / "two.csv", "--out", dir.path.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("three") != std::string::npos);
}

TEST_CASE("cgc on white noise finds nothing and replays from its echo") {
  TempDir dir("white"), again("white_again");
  {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    std::ofstream csv(dir / "noise.csv");
    csv << "trial,t,p,q,r\n";
    for (int b = 1; b <= 8; ++b)
      for (int t = 1; t <= 150; ++t)
        csv << b << ',' << t << ',' << normal(rng) << ',' << normal(rng) << ','
            << normal(rng) << '\n';
  }
  const std::vector<std::string> args{
      "cgc",       "--input",    dir / "noise.csv", "--estimator", "rls",  "--direction",
      "q->p|r",    "--frequencies", "11",           "--time-stride", "5",  "--permutations",
      "99",        "--out",      dir.path.string()};
  const auto r = run(args);
  REQUIRE(r.code == 0);
  const auto map = read_map_csv(dir / "map_q_to_p_given_r.csv");
  CHECK(map.significant_count() == 0);
  CHECK(map.freqs.size() == 11);
  const std::string summary = slurp(dir / "summary.csv");
  CHECK(summary.rfind("direction,threshold,flagged,significant,max,min_unclamped,map\nq->p|r,", 0) == 0);

  const auto replay =
      run({"cgc", "--config", dir / "config.txt", "--out", again.path.string()});
  REQUIRE(replay.code == 0);
  CHECK(slurp(dir / "map_q_to_p_given_r.csv") == slurp(again / "map_q_to_p_given_r.csv"));
  CHECK(slurp(dir / "summary.csv") == slurp(again / "summary.csv"));
  CHECK(run({"simulate", "--config", dir / "config.txt", "--out", again.path.string()}).code == 1);
}

TEST_CASE("bench writes one row per direction and estimator") {
  TempDir dir("bench");
  const auto r = run({"bench", "--scenario", "sim2", "--samples", "150", "--trials", "2",
                      "--orders", "3", "--scale", "2", "--frequencies", "9",
                      "--time-stride", "10", "--permutations", "0", "--out",
                      dir.path.string()});
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(dir / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "scenario,direction,estimator,mae,rmse,psnr,max,threshold");
  int rows = 0;
  while (std::getline(csv, line))
    ++rows;
  CHECK(rows == 24);
  const auto cfg = KeyValueFile::load(dir / "config.txt");
  CHECK(cfg.get("forgetting") == "0.9");
  CHECK(cfg.get("alpha") == "0.05");
  CHECK(cfg.get("permutations") == "0");
}

TEST_CASE("causal flow on hand-computable maps") {
  const std::vector<std::size_t> times{10, 30, 50, 70};
  const std::vector<double> freqs{0.0, 10.0, 20.0};
  // a -> b carries 1.0 everywhere; b -> a carries 0.25 only at 10 Hz in the
  // second window.
  TFCGCMap ab = tiny_map(times, freqs, 1.0);
  TFCGCMap ba = tiny_map(times, freqs, 0.0);
  ba.values(2, 1) = 0.25;
  ba.values(3, 1) = 0.25;
  ba.apply_threshold(0.0);
  const auto rows = causal_flow({"a", "b"}, {{TFCGCMap{}, ab}, {ba, TFCGCMap{}}}, 100.0,
                                8.0, 14.0, 0.4);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].node == "a");
  CHECK(rows[0].window_start == 0.0);
  CHECK(rows[0].window_end == doctest::Approx(0.4));
  CHECK(rows[0].cf == 1.0);
  CHECK(rows[1].cf == -1.0);
  CHECK(rows[2].window_start == doctest::Approx(0.4));
  CHECK(rows[2].cf == doctest::Approx(0.75));
  CHECK(rows[3].cf == doctest::Approx(-0.75));

  // Non-significant cells count as zero.
  ab.apply_threshold(2.0);
  const auto quiet = causal_flow({"a", "b"}, {{TFCGCMap{}, ab}, {ba, TFCGCMap{}}}, 100.0,
                                 8.0, 14.0, 0.4);
  CHECK(quiet[2].cf == doctest::Approx(-0.25));
  CHECK_THROWS_AS(causal_flow({"a", "b"}, {{TFCGCMap{}, ab}, {ba, TFCGCMap{}}}, 100.0,
                              40.0, 60.0, 0.4),
                  Error);
}

TEST_CASE("flow command: symmetric maps, conservation and missing pairs") {
  TempDir dir("flow");
  const std::vector<std::size_t> times{3, 20, 40, 60, 80};
  const std::vector<double> freqs{0.0, 9.0, 12.0, 30.0};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::string> args{"flow", "--out", dir.path.string(), "--window", "0.2"};
  const std::vector<std::string> nodes{"n1", "n2", "n3"};
  for (const auto &s : nodes)
    for (const auto &t : nodes) {
      if (s == t)
        continue;
      TFCGCMap m = tiny_map(times, freqs, 0.0);
      for (Eigen::Index i = 0; i < m.values.size(); ++i)
        m.values.data()[i] = unif(rng);
      m.apply_threshold(0.0);
      write_map_csv(dir / (s + t + ".csv"), m);
      args.push_back("--map");
      args.push_back(s + "->" + t + "=" + dir / (s + t + ".csv"));
    }
  REQUIRE(run(args).code == 0);
  std::istringstream csv(slurp(dir / "flow.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "node,window_start,window_end,cf");
  std::map<std::string, double> sums;
  int rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string node, lo, hi, cf;
    std::getline(ss, node, ',');
    std::getline(ss, lo, ',');
    std::getline(ss, hi, ',');
    std::getline(ss, cf, ',');
    sums[lo] += std::stod(cf);
    ++rows;
  }
  CHECK(rows == 9); // 0.2 s windows at 200 Hz: {3, 20}, {40, 60}, {80}
  for (const auto &[w, s] : sums)
    CHECK(std::abs(s) < 1e-12);

  // The same map in both directions gives zero flow.
  TempDir sym("flow_sym");
  write_map_csv(sym / "m.csv", tiny_map(times, freqs, 0.7));
  REQUIRE(run({"flow", "--out", sym.path.string(), "--map", "a->b=" + sym / "m.csv",
               "--map", "b->a=" + sym / "m.csv"})
              .code == 0);
  CHECK(slurp(sym / "flow.csv") == "node,window_start,window_end,cf\na,0,0.25,0\nb,0,0.25,0\n"
                                        "a,0.25,0.5,0\nb,0.25,0.5,0\n");

  const auto missing = run({"flow", "--out", sym.path.string(), "--map", "a->b=" + sym / "m.csv",
                            "--map", "b->c=" + sym / "m.csv"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("a->c") != std::string::npos);
  CHECK(missing.err.find("c->b") != std::string::npos);
}

} // TEST_SUITE
