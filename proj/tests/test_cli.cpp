#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "splab/datagen.hpp"

using namespace splab;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
};

// Runs a shell command, capturing interleaved stdout/stderr.
CmdResult run_shell(const std::string& cmd) {
  CmdResult res;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return res;
  char buf[512];
  while (fgets(buf, sizeof buf, pipe) != nullptr) res.out += buf;
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string bin() { return std::string(SPLAB_CLI_PATH); }

}  // namespace

TEST_SUITE("cli") {

// ---------------------------------------------------------------- schedule

TEST_CASE("schedule prints band widths for flag combinations") {
  CmdResult def = run_shell(bin() + " schedule");
  CHECK(def.code == 0);
  CHECK(def.out == "13 8 5 4\n");

  CmdResult inv = run_shell(bin() + " schedule --inverse");
  CHECK(inv.code == 0);
  CHECK(inv.out == "4 5 8 13\n");

  CmdResult alt = run_shell(bin() + " schedule --rmin 2 --rmax 9 --p 2.2");
  CHECK(alt.code == 0);
  CHECK(alt.out == "7 4 2 2\n");

  CmdResult flat = run_shell(bin() + " schedule --rmin 3 --rmax 3 --p 1.0");
  CHECK(flat.code == 0);
  CHECK(flat.out == "3 3 3 3\n");
}

TEST_CASE("schedule rejects inconsistent widths with a config exit") {
  CmdResult bad = run_shell(bin() + " schedule --rmin 9 --rmax 4");
  CHECK(bad.code == 2);
  CHECK(bad.out.find("r_min") != std::string::npos);
}

// ------------------------------------------------------------------ parsing

TEST_CASE("usage errors exit with the config code") {
  CHECK(run_shell(bin()).code == 2);
  CHECK(run_shell(bin() + " no-such-command").code == 2);
  CHECK(run_shell(bin() + " schedule --frequency 3").code == 2);
}

TEST_CASE("help exits cleanly and lists the subcommands") {
  CmdResult help = run_shell(bin() + " --help");
  CHECK(help.code == 0);
  for (const char* name : {"schedule", "gen-data", "pretrain", "finetune",
                           "compare", "drop-high", "diagnose-dw", "spectrum",
                           "adapter-vs-trunc", "verify-theory"}) {
    CHECK(help.out.find(name) != std::string::npos);
  }
  CHECK(run_shell(bin() + " schedule --help").code == 0);
}

// ------------------------------------------------------------- config file

TEST_CASE("config files supply defaults, explicit flags win") {
  const std::string cfg_path = "/tmp/splab_cli_cfg.json";
  {
    std::ofstream f(cfg_path);
    f << R"({"rmin": 2, "rmax": 9, "p": 2.2})" << "\n";
  }
  CmdResult from_file = run_shell(bin() + " schedule --config " + cfg_path);
  CHECK(from_file.code == 0);
  CHECK(from_file.out == "7 4 2 2\n");

  CmdResult overridden = run_shell(bin() + " schedule --config " + cfg_path +
                                   " --rmin 4 --rmax 16 --p 2.0");
  CHECK(overridden.code == 0);
  CHECK(overridden.out == "13 8 5 4\n");

  CmdResult missing =
      run_shell(bin() + " schedule --config /tmp/no_such_cfg.json");
  CHECK(missing.code == 2);
  std::remove(cfg_path.c_str());
}

// ------------------------------------------------------------ verify-theory

TEST_CASE("theory verification runs and reports from the command line") {
  CmdResult tail = run_shell(bin() + " verify-theory --prop 3");
  CHECK(tail.code == 0);
  CHECK(tail.out.find("overall PASS") != std::string::npos);

  CmdResult decay = run_shell(bin() + " verify-theory --lemma decay");
  CHECK(decay.code == 0);
  CHECK(decay.out.find("overall PASS") != std::string::npos);

  CHECK(run_shell(bin() + " verify-theory").code == 2);
  CHECK(run_shell(bin() + " verify-theory --lemma unknown").code == 2);
  // Invalid smoothness order is a config error, not a bound failure.
  CHECK(run_shell(bin() + " verify-theory --lemma decay --alpha 1.5").code ==
        2);
}

// ------------------------------------------------------- gen-data + seeding

TEST_CASE("gen-data writes a dataset and exactly one run manifest") {
  const std::string out = "/tmp/splab_cli_gen";
  std::filesystem::remove_all(out);
  CmdResult gen = run_shell(
      "SPLAB_SEED=99 " + bin() +
      " gen-data --solver heat --grid 32 --samples 4 --out " + out);
  CHECK(gen.code == 0);

  std::size_t manifests = 0;
  for (const auto& entry : std::filesystem::directory_iterator(out)) {
    if (entry.path().filename() == "manifest.json") ++manifests;
  }
  CHECK(manifests == 1);

  std::ifstream mf(out + "/manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  CHECK(manifest.at("subcommand") == "gen-data");
  CHECK(manifest.at("seed").get<std::uint64_t>() == 99);
  CHECK(manifest.at("wall_clock_seconds").get<double>() >= 0.0);
  bool dataset_listed = false;
  for (const auto& a : manifest.at("artifacts")) {
    if (a.get<std::string>().find("dataset.bin") != std::string::npos) {
      dataset_listed = true;
    }
  }
  CHECK(dataset_listed);

  Dataset ds = read_dataset(out + "/dataset.bin");
  CHECK(ds.spec.samples == 4);
  CHECK(ds.spec.seed == 99);
  CHECK(ds.inputs.shape == std::vector<std::size_t>{4, 32});
  std::filesystem::remove_all(out);
}

TEST_CASE("explicit seed flags beat the environment default") {
  const std::string out = "/tmp/splab_cli_gen_seed";
  std::filesystem::remove_all(out);
  CmdResult gen = run_shell(
      "SPLAB_SEED=99 " + bin() +
      " gen-data --solver heat --grid 32 --samples 2 --seed 7 --out " + out);
  CHECK(gen.code == 0);
  std::ifstream mf(out + "/manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  CHECK(manifest.at("seed").get<std::uint64_t>() == 7);
  std::filesystem::remove_all(out);
}

TEST_CASE("a malformed seed environment variable is a config error") {
  CHECK(run_shell("SPLAB_SEED=banana " + bin() + " schedule").code == 2);
}

}  // TEST_SUITE
