#include <benchmark/benchmark.h>

#include "tem/experiments.hpp"
#include "tem/generator.hpp"
#include "tem/inference.hpp"
#include "tem/init_support.hpp"

namespace {

const tem::Instance& bench_instance() {
  static const tem::Instance instance = [] {
    tem::GenerationParams p = tem::experiments::case1_tem_params(99);
    p.num_docs = 2000;
    return tem::gen_case1(p);
  }();
  return instance;
}

void BM_EStepToConvergence(benchmark::State& state) {
  const tem::Instance& inst = bench_instance();
  const tem::EStepSettings settings;
  std::size_t d = 0;
  for (auto _ : state) {
    const auto& doc = inst.docs[d % inst.docs.size()];
    benchmark::DoNotOptimize(
        tem::estep_kl(doc, inst.beta_true, doc.truth->support(), settings));
    ++d;
  }
}
BENCHMARK(BM_EStepToConvergence);

void BM_MStepThresholded(benchmark::State& state) {
  const tem::Instance& inst = bench_instance();
  std::vector<tem::TopicProportions> gammas;
  gammas.reserve(inst.docs.size());
  for (const auto& doc : inst.docs) gammas.push_back(*doc.truth);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tem::mstep_thresholded(inst.docs, gammas, inst.beta_true, true));
  }
}
BENCHMARK(BM_MStepThresholded);

void BM_PairTest(benchmark::State& state) {
  const tem::Instance& inst = bench_instance();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& a = inst.docs[i % inst.docs.size()];
    const auto& b = inst.docs[(i * 7 + 1) % inst.docs.size()];
    benchmark::DoNotOptimize(tem::pair_test(a, b, inst.params.max_doc_topics));
    ++i;
  }
}
BENCHMARK(BM_PairTest);

void BM_RecordTrace(benchmark::State& state) {
  const tem::Instance& inst = bench_instance();
  tem::InferenceState st = tem::experiments::oracle_support_state(inst);
  const auto perm = tem::identity_permutation(inst.num_topics());
  for (auto _ : state) {
    benchmark::DoNotOptimize(tem::record_trace(st, inst, perm, nullptr));
  }
}
BENCHMARK(BM_RecordTrace);

}  // namespace

BENCHMARK_MAIN();
