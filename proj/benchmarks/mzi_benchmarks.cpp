#include <benchmark/benchmark.h>

#include "mzi/env/interferometer_env.hpp"
#include "mzi/harness/encoding.hpp"
#include "mzi/harness/session.hpp"
#include "mzi/optics/interference.hpp"
#include "mzi/td3/trainer.hpp"

namespace {

using namespace mzi;

env::BeamPair misaligned_beams() {
  env::ControlState c;
  c.values = {1e-3, -5e-4, 4e-4, 2e-4, 3.0};
  const env::SetupGeometry g;
  return env::derive_beams(c, g, g.nominal_radius);
}

void BM_VisibilityAnalytic(benchmark::State& state) {
  const auto b = misaligned_beams();
  for (auto _ : state) benchmark::DoNotOptimize(optics::visibility_analytic(b.upper, b.lower));
}
BENCHMARK(BM_VisibilityAnalytic);

void BM_DetectorVisibility(benchmark::State& state) {
  const auto b = misaligned_beams();
  for (auto _ : state) benchmark::DoNotOptimize(optics::detector_visibility(b.upper, b.lower));
}
BENCHMARK(BM_DetectorVisibility);

void BM_RenderObservation(benchmark::State& state) {
  const auto b = misaligned_beams();
  const env::RandomizationConfig rand;
  env::Rng rng(1);
  for (auto _ : state) {
    const auto draws = env::draw_step(rand, rng);
    benchmark::DoNotOptimize(env::render_observation(b, draws, rand, 6.0, 64, 4.0));
  }
}
BENCHMARK(BM_RenderObservation)->Unit(benchmark::kMicrosecond);

void BM_EnvStep(benchmark::State& state) {
  env::EnvConfig cfg;
  cfg.obs_mode = state.range(0) ? env::ObsMode::kFrames : env::ObsMode::kVector;
  env::InterferometerEnv e(cfg);
  e.reset(3);
  env::PhysicalAction zero;
  for (auto _ : state) {
    if (e.done()) e.reset(3);
    benchmark::DoNotOptimize(e.step(zero));
  }
}
BENCHMARK(BM_EnvStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_ActorForwardFrames(benchmark::State& state) {
  nn::Network<float> actor(nn::NetworkSpec::actor_frames());
  actor.init_orthogonal(1);
  nn::Workspace<float> ws;
  nn::Matrix<float> obs = nn::Matrix<float>::Constant(actor.spec().input_features(), 1, 0.25f);
  for (auto _ : state) benchmark::DoNotOptimize(actor.forward(ws, obs));
}
BENCHMARK(BM_ActorForwardFrames)->Unit(benchmark::kMillisecond);

void BM_Td3UpdateVector(benchmark::State& state) {
  env::EnvConfig ec;
  ec.obs_mode = env::ObsMode::kVector;
  td3::TrainConfig tc;
  tc.total_steps = 1000;
  tc.start_train_step = 0;
  td3::Trainer trainer(ec, nn::NetworkSpec::actor_vector(6, 256), nn::NetworkSpec::critic_vector(6, 256), tc, 1);
  td3::ReplayBuffer buffer(64, 6);
  env::Rng rng(2);
  std::normal_distribution<float> n;
  for (int i = 0; i < 64; ++i) {
    std::vector<float> o(6), o2(6);
    td3::ActionVector a{};
    for (auto& v : o) v = n(rng);
    for (auto& v : o2) v = n(rng);
    buffer.add(o, a, 1.0f, o2, false);
  }
  std::int64_t it = 0;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.update(buffer.sample(32, rng), it++));
}
BENCHMARK(BM_Td3UpdateVector)->Unit(benchmark::kMicrosecond);

void BM_FrameBatchPng(benchmark::State& state) {
  std::vector<float> frame(64 * 64);
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = static_cast<float>(i % 97) / 97.0f;
  for (auto _ : state) {
    benchmark::DoNotOptimize(harness::base64_encode(harness::encode_png_gray8(harness::to_gray8(frame), 64, 64)));
  }
}
BENCHMARK(BM_FrameBatchPng)->Unit(benchmark::kMicrosecond);

void BM_SessionStep(benchmark::State& state) {
  harness::SessionManager m{env::EnvConfig{}};
  const auto created = m.handle({{"type", "create"}, {"payload", {{"seed", 1}}}});
  const std::string id = created.front()["session"];
  const nlohmann::json step = {{"type", "step"}, {"session", id}, {"payload", {{"action", {0, 0, 0, 0, 0}}}}};
  const nlohmann::json reset = {{"type", "reset"}, {"session", id}};
  for (auto _ : state) {
    auto replies = m.handle(step);
    if (replies.front()["type"] == "error") m.handle(reset);
    benchmark::DoNotOptimize(replies);
  }
}
BENCHMARK(BM_SessionStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
