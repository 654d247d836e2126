#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

#include "artgan/cli.hpp"
#include "artgan/image_io.hpp"

namespace fs = std::filesystem;
using artgan::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// A one-epoch run shared by the tests below.
struct Workspace {
  fs::path root;
  fs::path config;
  Workspace() : root(fs::temp_directory_path() / ("artgan_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(root);
    fs::create_directories(root);
    config = root / "tiny.cfg";
    std::ofstream(config) << "epochs = 1\nbatch_size = 8\nseed = 2\nnoise_dim = 8\n"
                             "width_mult = 1/32\ndataset = synth\nsynth_classes = 3\n"
                             "synth_per_class = 12\n";
  }
  ~Workspace() { fs::remove_all(root); }
  std::string dir(const std::string& name) const { return (root / name).string(); }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

const std::string& trained_checkpoint() {
  static const std::string path = [] {
    Workspace& w = workspace();
    const Outcome o = call({"train", "--config", w.config.string(), "--output-dir", w.dir("run")});
    REQUIRE(o.code == 0);
    return w.dir("run") + "/final.ckpt";
  }();
  return path;
}

}  // namespace

TEST_CASE("every subcommand documents itself") {
  for (const char* sub : {"train", "generate", "reconstruct", "eval-parzen", "nearest",
                          "fidelity", "gradcheck", "info"}) {
    const Outcome o = call({sub, "--help"});
    CHECK(o.code == artgan::cli::kSuccess);
    CHECK(o.out.find(sub) != std::string::npos);
  }
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(call({}).code == artgan::cli::kUsage);
  CHECK(call({"frobnicate"}).code == 1);
  CHECK(call({"gradcheck", "--bogus"}).code == 1);
  CHECK(call({"generate", "--checkpoint", trained_checkpoint(), "--class", "0", "--output",
              workspace().dir("g.ppm")})
            .code == 1);
  CHECK(call({"generate", "--checkpoint", trained_checkpoint(), "--class", "4", "--output",
              workspace().dir("g.ppm")})
            .code == 1);
  CHECK(call({"generate", "--checkpoint", trained_checkpoint(), "--output",
              workspace().dir("g.ppm")})
            .code == 1);
  CHECK(call({"train", "--config", workspace().config.string(), "--set", "nonsense=1",
              "--output-dir", workspace().dir("bad")})
            .code == 1);
  const Outcome missing = call({"info", "--checkpoint", workspace().dir("nope.ckpt")});
  CHECK(missing.code == 1);
  CHECK_FALSE(missing.err.empty());
}

TEST_CASE("IO failures exit with code 2") {
  const fs::path junk = workspace().root / "junk.ckpt";
  std::ofstream(junk) << "garbage";
  CHECK(call({"info", "--checkpoint", junk.string()}).code == artgan::cli::kIo);
  CHECK(call({"generate", "--checkpoint", trained_checkpoint(), "--all-classes", "--output",
              workspace().dir("missing/dir/g.ppm")})
            .code == 2);
}

TEST_CASE("training is reproducible from the command line") {
  const std::string first = trained_checkpoint();
  Workspace& w = workspace();
  REQUIRE(call({"train", "--config", w.config.string(), "--output-dir", w.dir("again")}).code ==
          0);
  CHECK(slurp(w.dir("run") + "/metrics.tsv") == slurp(w.dir("again") + "/metrics.tsv"));
  CHECK(slurp(first) == slurp(w.dir("again") + "/final.ckpt"));
  CHECK(fs::exists(w.dir("run") + "/config.txt"));
}

TEST_CASE("sampling and evaluation commands") {
  const std::string ckpt = trained_checkpoint();
  Workspace& w = workspace();

  const Outcome info = call({"info", "--checkpoint", ckpt});
  CHECK(info.code == 0);
  CHECK(info.out.find("epoch") != std::string::npos);

  REQUIRE(call({"generate", "--checkpoint", ckpt, "--all-classes", "--count", "6", "--cols", "3",
                "--output", w.dir("all.ppm")})
              .code == 0);
  const artgan::data::RgbImage grid = artgan::data::read_ppm(w.dir("all.ppm"));
  CHECK(grid.width == 196);
  CHECK(grid.height == 130);
  REQUIRE(call({"generate", "--checkpoint", ckpt, "--class", "2", "--count", "2", "--output",
                w.dir("two.ppm")})
              .code == 0);

  const Outcome rec = call({"reconstruct", "--checkpoint", ckpt, "--input", w.dir("two.ppm"),
                            "--output", w.dir("rec.ppm")});
  CHECK(rec.code == 0);
  CHECK(fs::exists(w.dir("rec.ppm")));

  const Outcome parzen = call({"eval-parzen", "--checkpoint", ckpt, "--samples", "30",
                               "--validation", "6", "--test-points", "5", "--output",
                               w.dir("parzen.tsv")});
  CHECK(parzen.code == 0);
  CHECK(slurp(w.dir("parzen.tsv")).find("parzen") != std::string::npos);

  const Outcome nn = call({"nearest", "--checkpoint", ckpt, "--count", "3", "--output",
                           w.dir("nn.ppm")});
  CHECK(nn.code == 0);
  CHECK(std::count(nn.out.begin(), nn.out.end(), '\n') >= 3);

  const Outcome fid = call({"fidelity", "--checkpoint", ckpt, "--samples-per-class", "10"});
  CHECK(fid.code == 0);
  CHECK(fid.out.find("class_fidelity") != std::string::npos);
}

TEST_CASE("gradcheck subcommand") {
  const Outcome o = call({"gradcheck", "--coords", "10"});
  CHECK(o.code == 0);
  CHECK(o.out.find("L_D") != std::string::npos);
  CHECK(call({"gradcheck", "--coords", "10", "--tolerance", "1e-30"}).code ==
        artgan::cli::kVerification);
}

TEST_CASE("subcommands are reproducible from flags and seed") {
  const std::string ckpt = trained_checkpoint();
  Workspace& w = workspace();
  for (const char* name : {"r1.ppm", "r2.ppm"})
    REQUIRE(call({"generate", "--checkpoint", ckpt, "--all-classes", "--count", "5", "--seed", "9",
                  "--output", w.dir(name)})
                .code == 0);
  CHECK(slurp(w.dir("r1.ppm")) == slurp(w.dir("r2.ppm")));
  const Outcome a = call({"fidelity", "--checkpoint", ckpt, "--samples-per-class", "5"});
  const Outcome b = call({"fidelity", "--checkpoint", ckpt, "--samples-per-class", "5"});
  CHECK(a.out == b.out);
}

TEST_CASE("help text lists every flag") {
  const std::vector<std::pair<const char*, std::vector<const char*>>> expected{
      {"train", {"--config", "--set", "--epochs", "--batch-size", "--seed", "--width-mult",
                 "--output-dir", "--dataset", "--dataset-path", "--resume"}},
      {"generate", {"--checkpoint", "--class", "--all-classes", "--count", "--seed", "--cols",
                    "--output"}},
      {"reconstruct", {"--checkpoint", "--input", "--output"}},
      {"eval-parzen", {"--checkpoint", "--config", "--samples", "--validation", "--test-points",
                       "--seed", "--output"}},
      {"nearest", {"--checkpoint", "--config", "--count", "--seed", "--output"}},
      {"fidelity", {"--checkpoint", "--config", "--samples-per-class", "--seed", "--output"}},
      {"gradcheck", {"--seed", "--coords", "--tolerance"}},
      {"info", {"--checkpoint"}}};
  for (const auto& [sub, flags] : expected) {
    const Outcome o = call({sub, "--help"});
    for (const char* flag : flags) CHECK_MESSAGE(o.out.find(flag) != std::string::npos, sub, flag);
  }
}
