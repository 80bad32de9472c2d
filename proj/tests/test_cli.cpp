#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "e2f/cli.hpp"
#include "e2f/error.hpp"
#include "e2f/eval.hpp"
#include "e2f/io.hpp"
#include "e2f/pipeline.hpp"
#include "support.hpp"

using namespace e2f;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "e2f");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

const std::vector<std::string> kSmall = {"--set", "height=8", "--set", "width=8"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& extra) {
  a.insert(a.end(), extra.begin(), extra.end());
  return a;
}

// Generates 4 toy sequences and trains a tiny model on them.
struct Trained {
  testing::TempDir dir{"cli_model"};
  fs::path model = dir / "model.e2fm";
  Trained() {
    REQUIRE(invoke(with({"generate", "--out-dir", (dir / "data").string(), "--count", "4"}, kSmall)).code == 0);
    const auto r = invoke(with({"train", "--data", (dir / "data").string(), "--out", model.string(), "--set",
                             "train.iterations=40", "--set", "model.hidden=8", "--set", "train.log_every=10"},
                            kSmall));
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config dump and reload round-trip") {
  testing::TempDir tmp("cli_cfg");
  cli::RunConfig c;
  c.set("guidance.mode", "constant");
  c.assign("schedule.steps=12");
  {
    std::ofstream(tmp / "a.cfg") << "# comment\n" << c.dump();
  }
  cli::RunConfig d;
  d.load_file(tmp / "a.cfg");
  CHECK(d.values() == c.values());
  CHECK(d.count("schedule.steps") == 12);
  CHECK_THROWS(c.set("nope", "1"));
  CHECK_THROWS(c.assign("missing-equals"));
  {
    std::ofstream(tmp / "bad.cfg") << "seed=1\nbogus=2\n";
  }
  CHECK_THROWS(d.load_file(tmp / "bad.cfg"));
}

TEST_CASE("errors exit nonzero with one line") {
  const auto r = invoke({"bound-check", "--count", "0", "--set", "nope=1"});
  CHECK(r.code != 0);
  CHECK(lines(r.err).size() == 1);
  CHECK(r.err.rfind("error:", 0) == 0);
  const auto u = invoke({"frobnicate"});
  CHECK(u.code != 0);
  CHECK(lines(u.err).size() == 1);
}

TEST_CASE("seed precedence: file < E2F_SEED < --set < --seed") {
  testing::TempDir tmp("cli_seed");
  {
    std::ofstream(tmp / "s.cfg") << "seed=1\n";
  }
  auto seed_of = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = {"bound-check", "--count", "0", "--config", (tmp / "s.cfg").string(),
                                  "--dump-config", (tmp / "out.cfg").string()};
    a.insert(a.end(), extra.begin(), extra.end());
    REQUIRE(invoke(a).code == 0);
    cli::RunConfig c;
    c.load_file(tmp / "out.cfg");
    return c.u64("seed");
  };
  CHECK(seed_of({}) == 1);
  ::setenv("E2F_SEED", "2", 1);
  CHECK(seed_of({}) == 2);
  CHECK(seed_of({"--set", "seed=3"}) == 3);
  CHECK(seed_of({"--set", "seed=3", "--seed", "4"}) == 4);
  ::unsetenv("E2F_SEED");
}

TEST_CASE("generate, simulate and stack") {
  testing::TempDir tmp("cli_sim");
  const auto g = invoke(with({"generate", "--out-dir", (tmp / "d").string(), "--count", "2"}, kSmall));
  REQUIRE(g.code == 0);
  CHECK(fs::exists(tmp / "d" / "seq_001.evt"));
  const std::string frames = (tmp / "d" / "seq_000.f32").string();
  const auto s = invoke({"simulate", "--frames", frames, "--out", (tmp / "a.evt").string(), "--volume",
                      (tmp / "v.f32").string()});
  REQUIRE(s.code == 0);
  CHECK(lines(s.out).at(1).find(",true") != std::string::npos);
  REQUIRE(invoke({"simulate", "--frames", frames, "--out", (tmp / "b.evt").string()}).code == 0);
  CHECK(slurp(tmp / "a.evt") == slurp(tmp / "b.evt"));

  REQUIRE(invoke(with({"stack", "--events", (tmp / "a.evt").string(), "--out", (tmp / "s.f32").string()}, kSmall)).code == 0);
  CHECK(read_raw_f32(tmp / "s.f32") == read_raw_f32(tmp / "v.f32"));
  CHECK(read_raw_f32(tmp / "s.f32").shape() == Shape4{12, 3, 8, 8});

  write_raw_f32(tmp / "still.f32", Tensor4(Shape4{4, 1, 3, 3}, 0.5));
  const auto e = invoke({"simulate", "--frames", (tmp / "still.f32").string(), "--out", (tmp / "still.evt").string()});
  REQUIRE(e.code == 0);
  CHECK(lines(e.out).at(1).rfind("0,", 0) == 0);
}

TEST_CASE("train with zero iterations keeps the initial parameters") {
  testing::TempDir tmp("cli_train0");
  REQUIRE(invoke(with({"generate", "--out-dir", (tmp / "d").string(), "--count", "2"}, kSmall)).code == 0);
  const auto r = invoke({"train", "--data", (tmp / "d").string(), "--out", (tmp / "m").string(), "--set",
                      "train.iterations=0", "--set", "model.hidden=4", "--seed", "9"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const ModelBundle m = read_model(tmp / "m");
  const ToyDenoiser fresh(m.denoiser.spec(), 9);
  CHECK(std::vector<double>(m.denoiser.parameters().begin(), m.denoiser.parameters().end()) ==
        std::vector<double>(fresh.parameters().begin(), fresh.parameters().end()));
  CHECK(fs::exists(tmp / "m.report.csv"));
}

TEST_CASE("training is reproducible byte for byte") {
  testing::TempDir tmp("cli_train");
  REQUIRE(invoke(with({"generate", "--out-dir", (tmp / "d").string(), "--count", "2"}, kSmall)).code == 0);
  for (const char* name : {"a", "b"}) {
    REQUIRE(invoke({"train", "--data", (tmp / "d").string(), "--out", (tmp / name).string(), "--set",
                 "train.iterations=15", "--set", "model.hidden=4"})
                .code == 0);
  }
  CHECK(slurp(tmp / "a") == slurp(tmp / "b"));
  CHECK_FALSE(slurp(tmp / "a").empty());
}

TEST_CASE("task commands") {
  Trained t;
  const fs::path& dir = t.dir.path();
  const std::string events = (dir / "data" / "seq_000.evt").string();
  const std::string truth = (dir / "data" / "seq_000.f32").string();
  const std::string model = t.model.string();

  SUBCASE("reconstruct without guidance matches the bare sampler") {
    const auto r = invoke({"reconstruct", "--events", events, "--model", model, "--out", (dir / "r.f32").string(),
                        "--set", "guidance.mode=off", "--seed", "5"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const ModelBundle m = read_model(t.model);
    const EventVolume vol = volume_from_stream(read_event_stream_binary(events), FrameTimeline::uniform(12, 1.0));
    SamplerConfig cfg;
    cfg.schedule = make_schedule(ScheduleParams{});
    cfg.latent_shape = Shape4{12, 1, 8, 8};
    cfg.seed = 5;
    const Tensor4 direct = sample(m.denoiser, vol, cfg).data;
    const Tensor4 got = read_raw_f32(dir / "r.f32");
    REQUIRE(got.shape() == direct.shape());
    bool same = true;
    for (std::size_t i = 0; i < got.size(); ++i) same = same && got[i] == static_cast<double>(static_cast<float>(direct[i]));
    CHECK(same);
  }

  SUBCASE("vfp with terminal alpha one returns the reference frame") {
    const auto r = invoke({"vfp", "--events", events, "--model", model, "--out", (dir / "p.f32").string(),
                        "--ref-sequence", truth, "--set", "zeroshot.terminal_alpha=1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const Tensor4 got = read_raw_f32(dir / "p.f32"), ref = read_raw_f32(truth);
    CHECK(max_abs_diff(got.frame_tensor(0), ref.frame_tensor(0)) < 1e-6);
    CHECK_FALSE(invoke({"vfp", "--events", events, "--model", model, "--out", (dir / "x.f32").string()}).code == 0);
    CHECK_FALSE(invoke({"reconstruct", "--events", events, "--model", model, "--out", (dir / "x.f32").string(),
                     "--ref-sequence", truth}).code == 0);
  }

  SUBCASE("vfi11 endpoints beat reconstruction endpoints") {
    double vfi = 0.0, rec = 0.0;
    for (int s = 0; s < 4; ++s) {
      const std::string stem = (dir / "data" / ("seq_00" + std::to_string(s))).string();
      REQUIRE(invoke({"vfi11", "--events", stem + ".evt", "--model", model, "--out", (dir / "i.f32").string(),
                   "--ref-sequence", stem + ".f32"}).code == 0);
      REQUIRE(invoke({"reconstruct", "--events", stem + ".evt", "--model", model, "--out", (dir / "c.f32").string()}).code == 0);
      const Tensor4 gt = read_raw_f32(stem + ".f32");
      const auto mi = mse(read_raw_f32(dir / "i.f32"), gt), mc = mse(read_raw_f32(dir / "c.f32"), gt);
      vfi += mi.per_frame.front() + mi.per_frame.back();
      rec += mc.per_frame.front() + mc.per_frame.back();
    }
    CHECK(vfi <= rec);
  }

  SUBCASE("metrics, dumps and reruns") {
    const std::vector<std::string> base = {"reconstruct", "--events", events, "--model", model, "--truth", truth,
                                           "--dump-dir", (dir / "dump").string(), "--set", "dump.every=10",
                                           "--dump-config", (dir / "eff.cfg").string()};
    const auto a = invoke(with(base, {"--out", (dir / "a.f32").string()}));
    REQUIRE(a.code == 0);
    CHECK(lines(a.out).front() == "frame_index,mse,ssim_channel_mean");
    CHECK(lines(a.out).size() == 14);
    CHECK(fs::exists(dir / "dump" / "step_009.f32"));
    const auto b = invoke({"reconstruct", "--events", events, "--model", model, "--out", (dir / "b.f32").string(),
                        "--config", (dir / "eff.cfg").string()});
    REQUIRE(b.code == 0);
    CHECK(slurp(dir / "a.f32") == slurp(dir / "b.f32"));
  }
}

TEST_CASE("bound-check") {
  testing::TempDir tmp("cli_bound");
  const auto empty = invoke({"bound-check", "--count", "0"});
  REQUIRE(empty.code == 0);
  CHECK(lines(empty.out) == std::vector<std::string>{"seed,L,kappa,C,epsilon,loss,lhs,rhs,holds,sufficient,anchoring"});
  const auto a = invoke({"bound-check", "--count", "20", "--seed", "3"});
  const auto b = invoke({"bound-check", "--count", "20", "--seed", "3", "--out", (tmp / "b.csv").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == slurp(tmp / "b.csv"));
  const auto rows = lines(a.out);
  CHECK(rows.size() == 21);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].find(",true,") != std::string::npos);
}

TEST_CASE("eval") {
  testing::TempDir tmp("cli_eval");
  const Tensor4 a = testing::random_tensor(Shape4{3, 1, 12, 12}, 1);
  const Tensor4 b = testing::random_tensor(Shape4{3, 1, 12, 12}, 2);
  write_raw_f32(tmp / "a.f32", a);
  write_raw_f32(tmp / "b.f32", b);
  const auto same = invoke({"eval", "--pred", (tmp / "a.f32").string(), "--truth", (tmp / "a.f32").string()});
  REQUIRE(same.code == 0);
  CHECK(lines(same.out).back().rfind("mean,0,1", 0) == 0);
  const auto diff = invoke({"eval", "--pred", (tmp / "a.f32").string(), "--truth", (tmp / "b.f32").string()});
  REQUIRE(diff.code == 0);
  const Tensor4 af = read_raw_f32(tmp / "a.f32"), bf = read_raw_f32(tmp / "b.f32");
  std::ostringstream expect;
  expect.precision(12);
  expect << "mean," << mse(af, bf).mean;
  CHECK(lines(diff.out).back().rfind(expect.str(), 0) == 0);
  write_raw_f32(tmp / "c.f32", Tensor4(Shape4{3, 1, 12, 11}));
  CHECK(invoke({"eval", "--pred", (tmp / "a.f32").string(), "--truth", (tmp / "c.f32").string()}).code != 0);
}

}
