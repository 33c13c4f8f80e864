#include <benchmark/benchmark.h>

#include <map>

#include "pushsum/paillier.hpp"

namespace {

using namespace pushsum;

const paillier::Keypair& key_for(unsigned bits) {
  static std::map<unsigned, paillier::Keypair> cache;
  auto it = cache.find(bits);
  if (it == cache.end()) {
    Rng rng(bits);
    it = cache.emplace(bits, paillier::keygen(bits, rng)).first;
  }
  return it->second;
}

void BM_Encrypt(benchmark::State& state) {
  const auto& key = key_for(static_cast<unsigned>(state.range(0)));
  const paillier::FixedPointCodec codec(key.public_key().n(), 32);
  Rng rng(1);
  const auto m = codec.encode(Extended(12.375));
  for (auto _ : state) benchmark::DoNotOptimize(paillier::encrypt(key.public_key(), m, rng));
}
BENCHMARK(BM_Encrypt)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMicrosecond);

void BM_Decrypt(benchmark::State& state) {
  const auto& key = key_for(static_cast<unsigned>(state.range(0)));
  Rng rng(2);
  const auto c = paillier::encrypt(key.public_key(), 123456789, rng);
  for (auto _ : state) benchmark::DoNotOptimize(paillier::decrypt(key, c));
}
BENCHMARK(BM_Decrypt)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMicrosecond);

void BM_Keygen(benchmark::State& state) {
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(paillier::keygen(static_cast<unsigned>(state.range(0)), rng));
}
BENCHMARK(BM_Keygen)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
