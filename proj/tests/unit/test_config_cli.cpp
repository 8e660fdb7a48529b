#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "lexisafe/cli.hpp"
#include "lexisafe/config.hpp"
#include "lexisafe/errors.hpp"
#include "lexisafe/report.hpp"

using namespace lexisafe;
namespace fs = std::filesystem;

namespace {

constexpr const char* kChainConfig = R"(
[env]
name = chain_hazard
length = 6

[dataset]
path = data/dataset.lxsd
n_episodes = 40
seed = 3

[train]
mode = sc
batch_size = 32
total_steps = 30
hidden_dims = 16
lr_lambda = 0.01

[eval]
n_episodes = 6
curve_interval = 10
bc_steps = 20
)";

fs::path write_config(const fs::path& dir, const std::string& text, const std::string& name = "run.ini") {
  write_text_file(dir / name, text);
  return dir / name;
}

int run(const std::string& command, const fs::path& config, const fs::path& out, bool force = false,
        const fs::path& policy = {}) {
  CliOptions o;
  o.command = command;
  o.config = config;
  o.out = out;
  o.force = force;
  o.policy = policy;
  return run_command(o);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config parsing") {
  const ConfigDocument doc = parse_config_text("# comment\n[train]\nbatch_size = 64 ; trailing\n\n[env]\nname=grid_twocost\n");
  REQUIRE(doc.sections.size() == 2);
  CHECK(doc.sections[0].name == "train");
  CHECK(doc.sections[0].entries[0].value == "64");
  CHECK(doc.sections[0].entries[0].line == 3);
  CHECK_THROWS_AS(parse_config_text("[train]\na = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[train]\n[train]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("key_without_section = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[train]\njust words\n"), ConfigError);
}

TEST_CASE("unknown keys get a suggestion") {
  CHECK(edit_distance("batchsize", "batch_size") == 1);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(closest_match("gen-dta", {"gen-data", "train"}) == "gen-data");
  CHECK_FALSE(closest_match("zzzzzz", {"gen-data", "train"}).has_value());
  CHECK_THROWS_WITH_AS(resolve_config(parse_config_text("[train]\nbatchsize = 3\n")),
                       "unknown key 'batchsize' in [train] (line 2); did you mean 'batch_size'?", ConfigError);
  CHECK_THROWS_AS(resolve_config(parse_config_text("[trian]\n")), ConfigError);
  CHECK_THROWS_AS(resolve_config(parse_config_text("[train]\nbatch_size = many\n")), ConfigError);
}

TEST_CASE("defaults and environment specific keys") {
  const RunConfig chain = resolve_config(parse_config_text("[env]\nlength = 9\n"));
  CHECK(chain.env.chain.length == 9);
  CHECK(chain.train.gamma == chain.env.gamma());
  CHECK(chain.ablation.weights == std::vector<std::vector<double>>{{1}, {10}, {100}, {1000}, {5000}});
  CHECK_THROWS_AS(resolve_config(parse_config_text("[env]\nname = grid_twocost\nlength = 9\n")), ConfigError);
  const RunConfig grid =
      resolve_config(parse_config_text("[env]\nname = grid_twocost\nwidth = 7\n[train]\nmode = mc\ncost_thresholds = 1, 2\n"));
  CHECK(grid.env.grid.width == 7);
  CHECK(grid.train.cost_thresholds == std::vector<double>{1.0, 2.0});
  CHECK(grid.ablation.weights.front() == std::vector<double>{1.0, 1.0});
  CHECK_THROWS_AS(resolve_config(parse_config_text("[env]\nname = grid_twocost\n[train]\nmode = sc\n")), ConfigError);
}

TEST_CASE("canonical text round trips") {
  const auto dir = testing::scratch_dir("canonical");
  const RunConfig a = resolve_config(parse_config_text(kChainConfig), dir);
  CHECK(a.dataset.path == dir / "data/dataset.lxsd");
  const std::string text = canonical_config_text(a);
  const RunConfig b = resolve_config(parse_config_text(text), dir);
  CHECK(canonical_config_text(b) == text);
  CHECK(b.train.lr_lambda == 0.01);
  CHECK(b.eval.curve_interval == 10);
}

TEST_CASE("csv numbers round trip") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9}) CHECK(std::stod(csv_number(x)) == x);
  CHECK(csv_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
  const auto dir = testing::scratch_dir("csv");
  {
    CsvWriter w(dir / "t.csv", {"a", "b"});
    w.row({"1", ""});
    CHECK_THROWS_AS(w.row({"1"}), UsageError);
  }
  const CsvTable t = read_csv(dir / "t.csv");
  CHECK(t.numeric("a") == std::vector<double>{1.0});
  CHECK(std::isnan(t.numeric("b")[0]));
  CHECK_THROWS_AS(t.column("c"), DataError);
}

TEST_CASE("command line workflow") {
  const auto dir = testing::scratch_dir("workflow");
  const fs::path cfg = write_config(dir, kChainConfig);

  REQUIRE(run("gen-data", cfg, dir / "data") == 0);
  REQUIRE(run("gen-data", cfg, dir / "data2") == 0);
  CHECK(slurp(dir / "data/dataset.lxsd") == slurp(dir / "data2/dataset.lxsd"));
  CHECK(fs::exists(dir / "data" / kConfigSnapshot));
  CHECK(run("gen-data", cfg, dir / "data") == 2);  // not empty without --force
  CHECK(run("gen-data", cfg, dir / "data", true) == 0);

  REQUIRE(run("train", cfg, dir / "train") == 0);
  for (const char* f : {"metrics.csv", "final_policy.lxck", "train_state.lxck", "eval.csv", "manifest.json", "SCHEMA.md"}) {
    CHECK(fs::exists(dir / "train" / f));
  }
  const CsvTable m = read_csv(dir / "train/metrics.csv");
  CHECK(m.header == metrics_columns(1));
  CHECK(m.rows.size() == 30);
  const auto oracle = m.numeric("oracle_reward");
  CHECK_FALSE(std::isnan(oracle[0]));
  CHECK(std::isnan(oracle[9]));
  CHECK_FALSE(std::isnan(oracle[10]));
  CHECK_FALSE(std::isnan(oracle[29]));

  REQUIRE(run("eval", cfg, dir / "eval1", false, dir / "train/final_policy.lxck") == 0);
  REQUIRE(run("eval", cfg, dir / "eval2", false, dir / "train/final_policy.lxck") == 0);
  CHECK(slurp(dir / "eval1/eval.csv") == slurp(dir / "eval2/eval.csv"));
  CHECK(run("eval", cfg, dir / "eval3") == 2);  // --policy missing

  write_config(dir, std::string(kChainConfig) + "\n[report]\nrun_dir = train\n", "report.ini");
  CHECK(run("report", dir / "report.ini", dir / "report") == 0);
  CHECK(fs::exists(dir / "report/training_curves.svg"));
}

TEST_CASE("zero training steps leave only the config snapshot") {
  const auto dir = testing::scratch_dir("zero_steps");
  std::string text = kChainConfig;
  text.replace(text.find("total_steps = 30"), 16, "total_steps = 0");
  const fs::path cfg = write_config(dir, text);
  REQUIRE(run("train", cfg, dir / "out") == 0);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "out")) files.push_back(e.path().filename());
  CHECK(files == std::vector<fs::path>{kConfigSnapshot});
}

TEST_CASE("always-left policy is perfectly safe") {
  const auto dir = testing::scratch_dir("always_left");
  const fs::path cfg = write_config(dir, std::string(kChainConfig));
  const RunConfig config = load_run_config(cfg);
  const CmdpSpec env = config.env.build();
  TrainConfig tc = config.train;
  TrainState s = make_train_state(env, tc);
  std::fill(s.policy.params.values.begin(), s.policy.params.values.end(), 0.0);
  s.policy.params[s.policy.params.size() - env.n_actions] = 60.0;  // output bias of "left"
  save_checkpoint(s.policy.to_checkpoint(), dir / "left.lxck");
  std::string text = kChainConfig;
  text.replace(text.find("path = data/dataset.lxsd\n"), 25, "");
  write_config(dir, text, "nodata.ini");
  REQUIRE(run("eval", dir / "nodata.ini", dir / "out", false, dir / "left.lxck") == 0);
  const CsvTable e = read_csv(dir / "out/eval.csv");
  CHECK(e.numeric("normalized_cost0")[0] == 0.0);
  CHECK(e.numeric("safe0")[0] == 1.0);
  CHECK(std::isnan(e.numeric("kl")[0]));
}

TEST_CASE("error exit codes") {
  const auto dir = testing::scratch_dir("errors");
  const fs::path cfg = write_config(dir, kChainConfig);
  CHECK(run("trian", cfg, dir / "a") == 2);
  CHECK(run("train", dir / "missing.ini", dir / "b") == 2);
  CHECK(run("train", cfg, dir / "c") == 3);  // dataset file absent

  // A dataset generated for a different environment.
  REQUIRE(run("gen-data", cfg, dir / "data") == 0);
  std::string text = kChainConfig;
  text.replace(text.find("length = 6"), 10, "length = 9");
  const fs::path other = write_config(dir, text, "other.ini");
  CHECK(run("train", other, dir / "d") == 3);

  // Corrupted dataset bytes.
  std::string bytes = slurp(dir / "data/dataset.lxsd");
  bytes[bytes.size() / 2] ^= 0x5a;
  write_text_file(dir / "data/dataset.lxsd", bytes);
  CHECK(run("train", cfg, dir / "e") == 3);

  text = kChainConfig;
  write_config(dir, text + "\n[sweep]\nn_grid = 500\n", "sweep.ini");
  CHECK(run("sweep", dir / "sweep.ini", dir / "f") == 2);
}

TEST_CASE("ablation with no weights runs only the multi-channel method") {
  const auto dir = testing::scratch_dir("ablate");
  const fs::path cfg = write_config(dir, R"(
[env]
name = grid_twocost
width = 4
height = 4
wall_rows = 1

[dataset]
n_episodes = 20

[train]
mode = mc
cost_thresholds = 1, 1
batch_size = 16
total_steps = 5
hidden_dims = 8

[eval]
n_episodes = 2
bc_steps = 5

[ablation]
weights =
seeds = 1, 2
)");
  REQUIRE(run("ablate", cfg, dir / "out") == 0);
  const CsvTable t = read_csv(dir / "out/ablation.csv");
  REQUIRE(t.rows.size() == 2);
  for (const auto& row : t.rows) CHECK(row[t.column("method")] == "lexisafe_mc");
}
