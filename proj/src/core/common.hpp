// Copyright 2026 The noe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NOE_CORE_COMMON_HPP_
#define NOE_CORE_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace noe {

// Input or configuration rejected before any computation. The CLI maps this
// to exit status 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while computing (I/O, divergence, unreachable targets). Exit 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void Fail(const std::string& msg) {
  throw ValidationError(msg);
}

inline void Require(bool cond, std::string_view msg) {
  if (!cond) throw ValidationError(std::string(msg));
}

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds from the
// single run seed.
inline uint64_t MixSeed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng MakeRng(uint64_t seed, uint64_t stream) {
  return Rng(MixSeed(seed, stream));
}

// Stream tags. Changing these changes every derived random sequence.
enum StreamTag : uint64_t {
  kStreamCorpus = 1,
  kStreamPublic = 2,
  kStreamSplit = 3,
  kStreamEpoch = 4,
  kStreamInit = 5,
  kStreamNoise = 6,
  kStreamExpertInit = 7,
  kStreamPretrain = 8,
};

// Number of worker threads used for batch-parallel gradient evaluation.
// Reductions always happen in example order, so results do not depend on it.
int WorkerThreads();
void SetWorkerThreads(int n);

// Runs fn(i) for i in [0, n) across the worker pool.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

// Lowercase hex SHA-256 of a byte range.
std::string Sha256Hex(const void* data, std::size_t size);
std::string Sha256File(const std::string& path);

// Writes to a sibling temporary file and renames over `path`.
void WriteFileAtomic(const std::string& path, std::string_view bytes);
std::string ReadFile(const std::string& path);

}  // namespace noe

#endif  // NOE_CORE_COMMON_HPP_
