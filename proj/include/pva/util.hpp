#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace pva {

enum class ErrCode : int {
  ok = 0,
  internal = 1,
  config = 2,
  missing_artifact = 3,
  divergence = 4,
  param = 5,
  io = 6,
};

// All recoverable failures in the core surface as pva::Error; the C API
// translates them into integer codes.
class Error : public std::runtime_error {
 public:
  Error(ErrCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrCode code() const { return code_; }

 private:
  ErrCode code_;
};

[[noreturn]] inline void fail(ErrCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

// SplitMix64 generator. Self-contained so streams are stable across
// platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0x9e3779b97f4a7c15ULL) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller, one draw per call (no cached spare so
  // the stream position is a pure function of call count)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // integer in [0, n)
  uint64_t randint(uint64_t n) { return n ? next_u64() % n : 0; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[randint(i)]);
  }

  // independent child stream
  Rng fork(uint64_t stream) {
    return Rng(next_u64() ^ (0x632be59bd9b4e019ULL * (stream + 1)));
  }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

std::string hex64(uint64_t v);

// Seed derivation: one master seed, stable named substreams.
inline uint64_t derive_seed(uint64_t master, const std::string& name) {
  return fnv1a64(name, fnv1a64(&master, sizeof(master)));
}

std::string lower(std::string s);
std::vector<std::string> split_ws(const std::string& s);
std::string fmt_double(double v);  // locale-independent, stable across reruns

}  // namespace pva
