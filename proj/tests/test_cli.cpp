// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

// Black-box tests of the installed CLI: every invocation goes through
// std::system on the real binary, checking exit codes and file output.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "synthforge/data.hpp"
#include "synthforge/metrics.hpp"
#include "test_util.hpp"

#ifndef SYNTHFORGE_CLI_PATH
#error "SYNTHFORGE_CLI_PATH must point at the built binary"
#endif
#ifndef SYNTHFORGE_CONFIG_DIR
#error "SYNTHFORGE_CONFIG_DIR must point at the shipped configs"
#endif

namespace fs = std::filesystem;
using doctest::Contains;
using synthtest::TempDir;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

CmdResult run_cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" SYNTHFORGE_CLI_PATH "\" " + args +
                          " >\"" + out_file.string() + "\" 2>\"" + err_file.string() + "\"";
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = synthtest::read_file(out_file);
  r.err = synthtest::read_file(err_file);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const std::string kTrainConfig =
    "model_family: autoencoder\n"
    "image_size: 8\n"
    "epochs: 2\n"
    "batch_size: 8\n"
    "seed: 5\n"
    "labeling_paradigm: labeled\n"
    "num_classes: 2\n";

std::size_t count_matching(const fs::path& dir, const std::string& prefix,
                           const std::string& ext) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && entry.path().extension() == ext) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  TempDir dir("cli_usage");
  CHECK(run_cli(dir, "").code == 1);
  CHECK(run_cli(dir, "frobnicate").code == 1);
  CHECK(run_cli(dir, "train").code == 1);  // missing required options
  CHECK(run_cli(dir, "validate-config").code == 1);
  CmdResult unknown = run_cli(dir, "train --no-such-flag");
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("Usage:") != std::string::npos);
}

TEST_CASE("help exits cleanly and names every subcommand") {
  TempDir dir("cli_help");
  CmdResult r = run_cli(dir, "--help");
  CHECK(r.code == 0);
  for (const char* sub :
       {"validate-config", "phantom", "train", "generate", "compare", "info"}) {
    CHECK_MESSAGE(r.out.find(sub) != std::string::npos, sub);
  }
}

TEST_CASE("info prints the version") {
  TempDir dir("cli_info");
  CmdResult r = run_cli(dir, "info");
  CHECK(r.code == 0);
  CHECK(r.out.find("synthforge ") == 0);
}

TEST_CASE("validate-config echoes the effective config on success") {
  TempDir dir("cli_vc");
  const fs::path shipped = fs::path(SYNTHFORGE_CONFIG_DIR) / "minimal.conf";
  CmdResult r = run_cli(dir, "validate-config --config " + q(shipped));
  CHECK(r.code == 0);
  CHECK(r.out.find("model_family: autoencoder\n") != std::string::npos);
  CHECK(r.out.find("image_size: 8\n") != std::string::npos);

  // The echoed form must itself validate, closing the round trip.
  const fs::path echoed = dir / "echo.conf";
  synthtest::write_file(echoed, r.out);
  CmdResult r2 = run_cli(dir, "validate-config --config " + q(echoed));
  CHECK(r2.code == 0);
  CHECK(r2.out == r.out);
}

TEST_CASE("validate-config failures exit with code 2 and cite the file") {
  TempDir dir("cli_vc_bad");
  const fs::path bad = dir / "bad.conf";

  synthtest::write_file(bad, "model_family: autoencoder\nimage_size: 12\nepochs: 1\n");
  CmdResult range = run_cli(dir, "validate-config --config " + q(bad));
  CHECK(range.code == 2);
  CHECK(range.err.find("error:") != std::string::npos);
  CHECK(range.err.find(bad.string()) != std::string::npos);
  CHECK(range.err.find("image_size") != std::string::npos);

  synthtest::write_file(bad, "model_family: autoencoder\n\tepochs: 1\n");
  CmdResult tab = run_cli(dir, "validate-config --config " + q(bad));
  CHECK(tab.code == 2);
  CHECK(tab.err.find("line 2") != std::string::npos);

  synthtest::write_file(bad, "model_family: autoencoder\nimage_size: 16\nepochs: 1\nbath_size: 4\n");
  CmdResult typo = run_cli(dir, "validate-config --config " + q(bad));
  CHECK(typo.code == 2);
  CHECK(typo.err.find("did you mean 'batch_size'") != std::string::npos);

  CmdResult missing = run_cli(dir, "validate-config --config " + q(dir / "absent.conf"));
  CHECK(missing.code == 3);
}

TEST_CASE("shipped example configs all validate") {
  TempDir dir("cli_examples");
  for (const char* name :
       {"minimal.conf", "vae_phantom.conf", "gan_phantom.conf", "diffusion_phantom.conf"}) {
    CAPTURE(name);
    const fs::path p = fs::path(SYNTHFORGE_CONFIG_DIR) / name;
    CHECK(run_cli(dir, "validate-config --config " + q(p)).code == 0);
  }
}

TEST_CASE("phantom writes a loadable labeled cohort") {
  TempDir dir("cli_phantom");
  const fs::path data = dir / "data";
  CmdResult r = run_cli(dir, "phantom --output-dir " + q(data) +
                                 " --n-per-class 3 --size 8 --seed 9");
  CHECK(r.code == 0);
  CHECK(fs::exists(data / "manifest.csv"));
  CHECK(count_matching(data, "", ".pgm") == 6);

  const auto manifest = synthforge::load_manifest_auto(data / "manifest.csv");
  CHECK(manifest.records.size() == 6);
  CHECK(manifest.paradigm == synthforge::LabelingParadigm::labeled);

  // Same seed, same bytes.
  const fs::path data2 = dir / "data2";
  CHECK(run_cli(dir, "phantom --output-dir " + q(data2) +
                         " --n-per-class 3 --size 8 --seed 9")
            .code == 0);
  CHECK(synthtest::read_file(data / "manifest.csv") ==
        synthtest::read_file(data2 / "manifest.csv"));

  CHECK(run_cli(dir, "phantom --output-dir " + q(dir / "tiny") + " --size 4").code == 3);
}

TEST_CASE("train, generate, compare, and info round trip") {
  TempDir dir("cli_e2e");
  const fs::path data = dir / "data";
  const fs::path run = dir / "run";
  const fs::path conf = dir / "train.conf";
  synthtest::write_file(conf, kTrainConfig);

  REQUIRE(run_cli(dir, "phantom --output-dir " + q(data) +
                          " --n-per-class 6 --size 8 --seed 11")
              .code == 0);

  CmdResult train = run_cli(dir, "train --config " + q(conf) + " --manifest " +
                                     q(data / "manifest.csv") + " --output-dir " + q(run));
  CHECK(train.code == 0);
  CHECK(fs::exists(run / "checkpoint_last.bin"));
  CHECK(fs::exists(run / "metrics.csv"));

  // Resuming at the configured horizon trains nothing and succeeds.
  const std::string before = synthtest::read_file(run / "checkpoint_last.bin");
  CmdResult resume = run_cli(dir, "train --config " + q(conf) + " --manifest " +
                                      q(data / "manifest.csv") + " --output-dir " + q(run) +
                                      " --resume");
  CHECK(resume.code == 0);
  CHECK(synthtest::read_file(run / "checkpoint_last.bin") == before);

  const fs::path samples = dir / "samples";
  CmdResult gen = run_cli(dir, "generate --checkpoint " + q(run / "checkpoint_last.bin") +
                                   " --num-samples 4 --output-dir " + q(samples));
  CHECK(gen.code == 0);
  CHECK(fs::exists(samples / "manifest.csv"));
  // Conditional model without --class-id: labels cycle through the classes.
  CHECK(fs::exists(samples / "sample_0_0000.pgm"));
  CHECK(fs::exists(samples / "sample_1_0001.pgm"));
  CHECK(fs::exists(samples / "sample_0_0002.pgm"));
  CHECK(fs::exists(samples / "sample_1_0003.pgm"));

  const fs::path pinned = dir / "pinned";
  CmdResult gen1 = run_cli(dir, "generate --checkpoint " + q(run / "checkpoint_last.bin") +
                                    " --num-samples 3 --class-id 1 --output-dir " + q(pinned));
  CHECK(gen1.code == 0);
  CHECK(count_matching(pinned, "sample_1_", ".pgm") == 3);

  CHECK(run_cli(dir, "generate --checkpoint " + q(run / "checkpoint_last.bin") +
                         " --num-samples 1 --class-id 7 --output-dir " + q(dir / "oops"))
            .code == 2);

  const fs::path report = dir / "report.csv";
  const fs::path report_json = dir / "report.json";
  CmdResult cmp = run_cli(dir, "compare --real-manifest " + q(data / "manifest.csv") +
                                   " --synth-manifest " + q(samples / "manifest.csv") +
                                   " --output " + q(report) + " --json " + q(report_json));
  CHECK(cmp.code == 0);
  const auto parsed = synthforge::parse_report_csv(synthtest::read_file(report));
  CHECK(parsed.rows.size() == 14);
  const std::string json_text = synthtest::read_file(report_json);
  CHECK(json_text.find("\"real_count\"") != std::string::npos);
  CHECK(json_text.find("\"features\"") != std::string::npos);

  // A cohort compared against itself reports zero divergence everywhere.
  const fs::path self_report = dir / "self.csv";
  REQUIRE(run_cli(dir, "compare --real-manifest " + q(data / "manifest.csv") +
                           " --synth-manifest " + q(data / "manifest.csv") + " --output " +
                           q(self_report))
              .code == 0);
  for (const auto& row : synthforge::parse_report_csv(synthtest::read_file(self_report)).rows) {
    CHECK(row.ks_distance == 0.0);
    CHECK(row.standardized_diff == 0.0);
    CHECK(row.mean_real == row.mean_synth);
  }

  CmdResult info = run_cli(dir, "info --checkpoint " + q(run / "checkpoint_last.bin"));
  CHECK(info.code == 0);
  CHECK(info.out.find("family: autoencoder") != std::string::npos);
  CHECK(info.out.find("epoch: 2") != std::string::npos);
  CHECK(info.out.find("image_size: 8") != std::string::npos);
}

TEST_CASE("train failures map onto the documented exit codes") {
  TempDir dir("cli_train_bad");
  const fs::path data = dir / "data";
  REQUIRE(run_cli(dir, "phantom --output-dir " + q(data) +
                          " --n-per-class 2 --size 8 --seed 1")
              .code == 0);
  const fs::path conf = dir / "train.conf";

  // Config says unlabeled, manifest is labeled: validation failure.
  synthtest::write_file(conf, "model_family: autoencoder\nimage_size: 8\nepochs: 1\n");
  CmdResult mism = run_cli(dir, "train --config " + q(conf) + " --manifest " +
                                    q(data / "manifest.csv") + " --output-dir " + q(dir / "r1"));
  CHECK(mism.code == 2);
  CHECK(mism.err.find("paradigm") != std::string::npos);

  synthtest::write_file(conf, kTrainConfig);
  CHECK(run_cli(dir, "train --config " + q(conf) + " --manifest " + q(data / "manifest.csv") +
                         " --output-dir " + q(dir / "r2") + " --resume")
            .code == 3);
  CHECK(run_cli(dir, "train --config " + q(conf) + " --manifest " + q(dir / "nope.csv") +
                         " --output-dir " + q(dir / "r3"))
            .code == 3);
}

TEST_CASE("generate rejects damaged checkpoints with a runtime exit") {
  TempDir dir("cli_gen_bad");
  const fs::path fake = dir / "fake.bin";
  synthtest::write_file(fake, "XSYNgarbage");
  CmdResult r = run_cli(dir, "generate --checkpoint " + q(fake) +
                                 " --num-samples 1 --output-dir " + q(dir / "out"));
  CHECK(r.code == 3);
  CHECK(r.err.find("bad magic") != std::string::npos);
}

TEST_CASE("log level changes verbosity but never the outputs") {
  TempDir dir("cli_log");
  const fs::path shipped = fs::path(SYNTHFORGE_CONFIG_DIR) / "minimal.conf";
  const std::string args = "validate-config --config " + q(shipped);
  CmdResult quiet = run_cli(dir, args, "SYNTHFORGE_LOG_LEVEL=error");
  CmdResult loud = run_cli(dir, args, "SYNTHFORGE_LOG_LEVEL=debug");
  CHECK(quiet.code == 0);
  CHECK(loud.code == 0);
  CHECK(quiet.out == loud.out);

  CmdResult odd = run_cli(dir, args, "SYNTHFORGE_LOG_LEVEL=shout");
  CHECK(odd.code == 0);
  CHECK(odd.out == quiet.out);
  CHECK(odd.err.find("shout") != std::string::npos);

  // The phantom cohort is a pure function of its seed, not of verbosity.
  CmdResult pa = run_cli(dir, "phantom --output-dir " + q(dir / "a") +
                                  " --n-per-class 2 --size 8 --seed 3",
                         "SYNTHFORGE_LOG_LEVEL=debug");
  CmdResult pb = run_cli(dir, "phantom --output-dir " + q(dir / "b") +
                                  " --n-per-class 2 --size 8 --seed 3",
                         "SYNTHFORGE_LOG_LEVEL=error");
  CHECK(pa.code == 0);
  CHECK(pb.code == 0);
  CHECK(synthtest::read_file(dir / "a" / "manifest.csv") ==
        synthtest::read_file(dir / "b" / "manifest.csv"));
}
