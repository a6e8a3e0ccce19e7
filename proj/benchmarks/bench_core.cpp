#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include <unistd.h>

#include "mmsi/corpus.hpp"
#include "mmsi/entity.hpp"
#include "mmsi/extractors.hpp"
#include "mmsi/fusion.hpp"

namespace {

using namespace mmsi;
namespace fs = std::filesystem;

fusion::ExampleFeatures random_example(const fusion::FusionConfig& c, int clips, std::mt19937_64& rng) {
  std::normal_distribution<float> n;
  auto fill = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXf m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
  };
  fusion::ExampleFeatures ex;
  ex.example_id = "bench";
  ex.clip_count = clips;
  ex.video = fill(c.dims.video_feature, clips);
  ex.object = fill(c.dims.object_feature, clips);
  ex.caption = fill(2 * c.dims.text_feature, 1);
  ex.transcript = fill(2 * c.dims.text_feature, 1);
  ex.caption_names = {entity::encode_name_chars("Ada Lovelace")};
  ex.transcript_names = {entity::encode_name_chars("Grace Hopper")};
  ex.faces = fill(c.dims.face_block, 1);
  ex.reactions = fill(c.dims.reaction_block, 1);
  return ex;
}

struct Batch {
  fusion::FusionConfig config;
  std::vector<fusion::ExampleFeatures> examples;
  std::vector<const fusion::ExampleFeatures*> views;
  fusion::FusionParams<float> params;
};

// range(0): batch size, range(1): clips per example. Full default widths.
Batch make_batch(int batch, int clips) {
  Batch b;
  std::mt19937_64 rng(7);
  for (int i = 0; i < batch; ++i) {
    b.examples.push_back(random_example(b.config, clips, rng));
    b.examples.back().label = i % 2;
  }
  for (const auto& e : b.examples) b.views.push_back(&e);
  b.params = fusion::init_params<float>(b.config, 1);
  return b;
}

void BM_ForwardBatch(benchmark::State& state) {
  Batch b = make_batch(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fusion::forward_batch<float>(b.views, b.config, b.params));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBatch)->Args({1, 4})->Args({16, 4})->Args({16, 16})->Unit(benchmark::kMillisecond);

void BM_LossAndGradient(benchmark::State& state) {
  Batch b = make_batch(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  auto grad = fusion::zero_params<float>(b.config);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fusion::loss_and_gradient<float>(b.views, b.config, b.params, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGradient)->Args({16, 4})->Args({16, 16})->Unit(benchmark::kMillisecond);

void BM_EncodeNameChars(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(entity::encode_name_chars("Jos\u00e9 Mar\u00eda Rodr\u00edguez"));
  }
}
BENCHMARK(BM_EncodeNameChars);

void BM_GenerateExamples(benchmark::State& state) {
  std::vector<corpus::Post> posts(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < posts.size(); ++i) {
    posts[i].post_id = "p" + std::to_string(i);
    posts[i].source_org = "org" + std::to_string(i % 13);
    posts[i].caption_text = "caption";
    posts[i].video_ref = "v.mp4";
    posts[i].reactions_raw = {1, 2, 3, 4, 5, 6, 7};
  }
  for (auto _ : state) benchmark::DoNotOptimize(corpus::generate_examples(posts, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateExamples)->Arg(1000)->Arg(10000);

void BM_CachePutGet(benchmark::State& state) {
  const fs::path root = fs::temp_directory_path() / ("mmsi-bench-" + std::to_string(::getpid()));
  const extractors::FeatureCache cache(root);
  extractors::FeatureRecord rec{"p0", {"video-encoder", "bench"}, {16, 1024}, std::vector<float>(16 * 1024, 0.5f)};
  std::size_t i = 0;
  for (auto _ : state) {
    rec.post_id = "p" + std::to_string(i++ % 64);
    cache.put(rec);
    benchmark::DoNotOptimize(cache.get(rec.post_id, rec.extractor));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(rec.payload.size() * sizeof(float)));
  fs::remove_all(root);
}
BENCHMARK(BM_CachePutGet)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
