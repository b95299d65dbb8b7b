#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hmcode/cli.hpp"

namespace fs = std::filesystem;
using namespace hmcode;

namespace {

// Runs the CLI entry point in-process with stderr captured so failing
// invocations stay quiet in the test log.
int run_cli(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::vector<const char*> argv;
  argv.push_back("hmcode");
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream captured;
  std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
  const int rc = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old);
  if (err != nullptr) *err = captured.str();
  return rc;
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "hmcode_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string f;
  while (std::getline(is, f, ',')) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("sweep range and list parsing") {
  const auto r = cli_detail::parse_double_list("0.01:0.09:0.02", "pb");
  REQUIRE(r.size() == 5);
  CHECK(r[0] == Catch::Approx(0.01));
  CHECK(r[1] == Catch::Approx(0.03));
  CHECK(r[4] == Catch::Approx(0.09));

  const auto single = cli_detail::parse_double_list("0.5", "pb");
  REQUIRE(single == std::vector<double>{0.5});

  const auto commas = cli_detail::parse_int_list("0,1,4", "delay");
  REQUIRE(commas == std::vector<int>{0, 1, 4});

  const auto irange = cli_detail::parse_int_list("2:8:3", "delay");
  REQUIRE(irange == std::vector<int>{2, 5, 8});

  CHECK_THROWS_AS(cli_detail::parse_double_list("0.9:0.1:0.1", "pb"), ParameterError);
  CHECK_THROWS_AS(cli_detail::parse_double_list("0.1:0.9:0", "pb"), ParameterError);
  CHECK_THROWS_AS(cli_detail::parse_double_list("0.1:0.9", "pb"), ParameterError);
  CHECK_THROWS_AS(cli_detail::parse_double_list("abc", "pb"), ParameterError);
  CHECK_THROWS_AS(cli_detail::parse_int_list("1,,2", "delay"), ParameterError);
}

TEST_CASE("pb sweep writes one aggregate row per sweep value") {
  const fs::path out = scratch_dir() / "sweep.csv";
  const int rc = run_cli({"sweep-pb", "--scheme", "punctured", "--decoder", "delayed",
                          "--delay", "1", "--density", "0.25", "--pb", "0.01:0.09:0.02",
                          "--n", "12", "--S", "8", "--M", "4", "--packets", "1500",
                          "--sequences", "2", "--seed", "7", "--out", out.string()});
  REQUIRE(rc == 0);

  const auto rows = lines_of(slurp(out));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == kCsvHeader);
  const std::vector<std::string> want_pb = {"0.01", "0.03", "0.05", "0.07", "0.09"};
  for (int i = 0; i < 5; ++i) {
    const auto f = fields_of(rows[1 + i]);
    REQUIRE(f.size() == 17);
    CHECK(f[0] == "steady-state");
    CHECK(f[1] == "punctured");
    CHECK(f[2] == "delayed");
    CHECK(f[6] == want_pb[i]);
    CHECK(f[8] == "1");
    CHECK(f[12] == "-1");
    CHECK(f[13] == "-1");
    CHECK(f[14] == "3000");
    const double per = std::stod(f[16]);
    CHECK(per >= 0.0);
    CHECK(per <= 1.0);
  }
}

TEST_CASE("repeat invocations produce byte-identical output") {
  const fs::path out_a = scratch_dir() / "rep_a.csv";
  const fs::path out_b = scratch_dir() / "rep_b.csv";
  const std::vector<std::string> base = {"transient", "--schemes", "legacy,punctured",
                                         "--n", "12", "--S", "8", "--M", "4",
                                         "--packets", "400", "--sequences", "2",
                                         "--seed", "11"};
  auto args_a = base;
  args_a.insert(args_a.end(), {"--out", out_a.string()});
  auto args_b = base;
  args_b.insert(args_b.end(), {"--out", out_b.string()});
  REQUIRE(run_cli(args_a) == 0);
  REQUIRE(run_cli(args_b) == 0);
  CHECK(slurp(out_a) == slurp(out_b));
}

TEST_CASE("config file supplies defaults and the command line wins") {
  const fs::path dir = scratch_dir();
  const fs::path out = dir / "cfg_out.csv";
  const fs::path cfg = dir / "cfg.txt";
  {
    std::ofstream os(cfg);
    os << "# run shape\n"
       << "decoder=min-distance\n"
       << "packets = 600\n"
       << "sequences=1\n"
       << "pb=0.02\n"
       << "out=" << out.string() << "\n";
  }

  SECTION("file keys apply where the command line is silent") {
    const int rc = run_cli({"sweep-pb", "--config", cfg.string(), "--n", "12",
                            "--S", "8", "--M", "4", "--packets", "300"});
    REQUIRE(rc == 0);
    const auto rows = lines_of(slurp(out));
    REQUIRE(rows.size() == 2);
    const auto f = fields_of(rows[1]);
    CHECK(f[2] == "min-distance");  // from file
    CHECK(f[6] == "0.02");          // from file
    CHECK(f[14] == "300");          // --packets beats packets=600
  }

  SECTION("unknown keys are rejected") {
    const fs::path bad = dir / "bad.txt";
    std::ofstream(bad) << "turbo=yes\n";
    std::string err;
    CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--out", out.string(),
                   "--config", bad.string()}) == 1);
    CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--out", out.string(),
                   "--config", bad.string()}, &err) == 1);
    CHECK(err.find("turbo") != std::string::npos);
  }

  SECTION("a key for another subcommand's flag is rejected") {
    const fs::path bad = dir / "bad2.txt";
    std::ofstream(bad) << "scheme=legacy\n";  // transient takes --schemes
    CHECK(run_cli({"transient", "--out", out.string(), "--config", bad.string()}) == 1);
  }

  SECTION("missing config file is an error") {
    CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--out", out.string(),
                   "--config", (dir / "nope.txt").string()}) == 1);
  }

  SECTION("malformed line is an error") {
    const fs::path bad = dir / "bad3.txt";
    std::ofstream(bad) << "just words\n";
    CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--out", out.string(),
                   "--config", bad.string()}) == 1);
  }
}

TEST_CASE("missing required options fail with a message") {
  std::string err;
  CHECK(run_cli({"sweep-pb", "--out", "/tmp/x.csv"}, &err) != 0);
  CHECK(err.find("--pb") != std::string::npos);

  CHECK(run_cli({"sweep-pb", "--pb", "0.05"}, &err) != 0);
  CHECK(err.find("--out") != std::string::npos);

  CHECK(run_cli({"sweep-density", "--out", "/tmp/x.csv"}, &err) != 0);
  CHECK(err.find("--density") != std::string::npos);

  CHECK(run_cli({"sweep-delay", "--out", "/tmp/x.csv"}, &err) != 0);
  CHECK(err.find("--delay") != std::string::npos);

  CHECK(run_cli({}, &err) != 0);
  CHECK(run_cli({"frobnicate"}, &err) != 0);
  CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--out", "/tmp/x.csv", "--bogus"}, &err) != 0);
}

TEST_CASE("invalid parameter values fail after parsing") {
  std::string err;
  CHECK(run_cli({"sweep-pb", "--pb", "1.5", "--out", "/tmp/x.csv"}, &err) == 1);
  CHECK(err.find("error:") != std::string::npos);
  CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--S", "12", "--out", "/tmp/x.csv"}, &err) == 1);
  CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--decoder", "viterbi",
                 "--out", "/tmp/x.csv"}, &err) == 1);
  CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--scheme", "magic",
                 "--out", "/tmp/x.csv"}, &err) == 1);
  // Compression schemes need the steady-state source model.
  CHECK(run_cli({"transient", "--schemes", "stationary", "--out", "/tmp/x.csv"}, &err) == 1);
}

TEST_CASE("codebook dump emits one row per codeword") {
  const fs::path out = scratch_dir() / "book.csv";
  REQUIRE(run_cli({"codebook-dump", "--scheme", "legacy", "--n", "12", "--S", "8",
                   "--M", "4", "--out", out.string()}) == 0);
  const auto rows = lines_of(slurp(out));
  REQUIRE(rows.size() == 1 + 8 * 4);
  CHECK(rows[0] == "state,message,codeword_bits");
  const auto f = fields_of(rows[1]);
  REQUIRE(f.size() == 3);
  CHECK(f[0] == "0");
  CHECK(f[1] == "0");
  CHECK(f[2].size() == 12);
  CHECK(f[2].find_first_not_of("01") == std::string::npos);
}

TEST_CASE("trace output records each packet of sequence zero") {
  const fs::path dir = scratch_dir();
  const fs::path out = dir / "tr_out.csv";
  const fs::path trace = dir / "tr.csv";
  REQUIRE(run_cli({"sweep-pb", "--pb", "0", "--n", "12", "--S", "8", "--M", "4",
                   "--packets", "64", "--sequences", "1", "--out", out.string(),
                   "--trace", trace.string()}) == 0);
  const auto rows = lines_of(slurp(trace));
  REQUIRE(rows.size() == 1 + 64);
  CHECK(rows[0] == "t,true_state,true_msg,est_state,est_msg,posterior_entropy");
  const auto f = fields_of(rows[1]);
  REQUIRE(f.size() == 6);
  CHECK(f[0] == "0");
  CHECK(f[1] == f[3]);  // noiseless decode is exact
  CHECK(f[2] == f[4]);
}

TEST_CASE("estimator dump needs a learning mode") {
  const fs::path dir = scratch_dir();
  const fs::path out = dir / "ed_out.csv";
  const fs::path dump = dir / "ed.txt";

  std::string err;
  CHECK(run_cli({"sweep-pb", "--pb", "0.05", "--n", "12", "--S", "8", "--M", "4",
                 "--packets", "50", "--sequences", "1", "--out", out.string(),
                 "--estimator-dump", dump.string()}, &err) == 1);
  CHECK(err.find("learning mode") != std::string::npos);

  REQUIRE(run_cli({"transient", "--n", "12", "--S", "8", "--M", "4",
                   "--packets", "300", "--sequences", "1", "--out", out.string(),
                   "--estimator-dump", dump.string()}) == 0);
  const auto rows = lines_of(slurp(dump));
  REQUIRE(rows.size() == 9);  // 8 matrix rows then the flip-rate line
  CHECK(rows[8].rfind("pb ", 0) == 0);
}
