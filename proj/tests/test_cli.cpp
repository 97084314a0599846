#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(ZIPFLS_CLI_PATH) + " " + args + " 2>&1";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  std::array<char, 512> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "zipfls_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

const char* kTinyConfig = R"({
  "classes": 4, "superclasses": 2,
  "train_per_class": 12, "eval_per_class": 6,
  "noise_sigma": 20.0,
  "widths": [4, 8, 8],
  "epochs": 1, "batch_size": 16,
  "base_lr": 0.02, "milestones": [],
  "dist": "zipf", "ranking": "dense12",
  "seed": 5
})";

}  // namespace

TEST_CASE("missing subcommand exits 1 with usage text") {
  RunResult res = run_cli("");
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("subcommand") != std::string::npos);
}

TEST_CASE("labelgen prints ranks and the zipf label") {
  const fs::path dir = work_dir();
  write_text(dir / "logits.txt", "2 1 0 -1\n");
  RunResult res =
      run_cli("labelgen --logits " + (dir / "logits.txt").string() + " --target 0 --alpha 1");
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("ranks: 1 2 3") != std::string::npos);
  CHECK(res.output.find("label: 0.545455 0.272727 0.181818") != std::string::npos);
}

TEST_CASE("labelgen runtime failure exits 2") {
  RunResult res = run_cli("labelgen --logits /nonexistent.txt --target 0");
  CHECK(res.exit_code == 2);
}

TEST_CASE("unknown flag exits 1") {
  RunResult res = run_cli("train --no-such-flag 3");
  CHECK(res.exit_code == 1);
}

TEST_CASE("config with unknown key exits 1 naming the key") {
  const fs::path dir = work_dir();
  write_text(dir / "bad.json", R"({"lamda": 2})");
  RunResult res = run_cli("train --config " + (dir / "bad.json").string());
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("lamda") != std::string::npos);
}

TEST_CASE("train, evaluate, analyze and compare round trip") {
  const fs::path dir = work_dir();
  write_text(dir / "cfg.json", kTinyConfig);
  const std::string out_dir = (dir / "run1").string();

  // train writes the resolved config, report, metrics and checkpoint
  RunResult tr = run_cli("train --config " + (dir / "cfg.json").string() +
                         " --lambda 0 --out " + out_dir);
  CHECK(tr.exit_code == 0);
  CHECK(fs::exists(fs::path(out_dir) / "config.json"));
  CHECK(fs::exists(fs::path(out_dir) / "report.json"));
  CHECK(fs::exists(fs::path(out_dir) / "metrics.csv"));
  CHECK(fs::exists(fs::path(out_dir) / "model.ckpt"));
  {
    std::ifstream in(fs::path(out_dir) / "config.json");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("\"lambda\": 0.0") != std::string::npos);  // flag overrode file
  }
  CHECK(fs::exists(fs::path(out_dir) / "eval.bin"));
  const std::string final_line = tr.output.substr(0, tr.output.find('\n'));
  CHECK(final_line.find("final_top1 ") == 0);

  // vanilla run with the same seed must match the lambda-0 run exactly
  RunResult tr2 = run_cli("train --config " + (dir / "cfg.json").string() +
                          " --dist constant --lambda 0 --out " + (dir / "run2").string());
  CHECK(tr2.exit_code == 0);
  CHECK(tr2.output.substr(0, tr2.output.find('\n')) == final_line);

  // evaluating the checkpoint on the exported eval split reproduces the
  // reported accuracy
  RunResult ev = run_cli("evaluate --ckpt " + out_dir + "/model.ckpt --data " +
                         out_dir + "/eval.bin");
  CHECK(ev.exit_code == 0);
  CHECK("top1 " + final_line.substr(11) + "\n" == ev.output);

  RunResult ev_missing =
      run_cli("evaluate --ckpt " + out_dir + "/model.ckpt --data /nope.bin");
  CHECK(ev_missing.exit_code == 2);

  RunResult an = run_cli("analyze --ckpt " + out_dir + "/model.ckpt --data " + out_dir +
                         "/eval.bin --fit-min 2 --fit-max 4 --out " +
                         (dir / "p.csv").string());
  CHECK(an.exit_code == 0);
  CHECK(an.output.find("alpha_hat ") != std::string::npos);
  CHECK(fs::exists(dir / "p.csv"));
  CHECK(fs::exists(dir / "p.csv.fit.json"));
  {
    std::ifstream in(dir / "p.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "rank,mean_prob,fit_prob");
  }

  // compare over two seeds emits one row per config
  RunResult cp = run_cli("compare --configs " + (dir / "cfg.json").string() + " " +
                         (dir / "cfg.json").string() + " --seeds 1 --out " +
                         (dir / "cmp.csv").string());
  CHECK(cp.exit_code == 0);
  CHECK(cp.output.find("method,seeds,mean_top1,std_top1,per_seed") != std::string::npos);
  CHECK(fs::exists(dir / "cmp.csv"));

  fs::remove_all(dir);
}
