#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace pasdf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Error taxonomy. Each maps onto a CLI exit code (see tools/pasdf.cpp).

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A scalar parameter is out of its admissible range.
struct InvalidParameter : Error {
  using Error::Error;
};

/// An input object (cloud, mesh, descriptor list, ...) violates a precondition.
struct InvalidInput : Error {
  using Error::Error;
};

/// Fewer mutual feature correspondences than RANSAC needs for one hypothesis.
struct CoarseAlignmentFailed : Error {
  using Error::Error;
};

/// Non-finite values produced during numeric work (training loss, field samples).
struct NumericFailure : Error {
  using Error::Error;
};

/// AUROC requested on single-class data.
struct UndefinedMetric : Error {
  using Error::Error;
};

/// Marching cubes produced no surface for the learned field.
struct RepairFailed : Error {
  using Error::Error;
};

/// A persisted artifact does not match what the caller expects.
struct ArtifactMismatch : Error {
  using Error::Error;
};

/// Input file could not be opened or parsed.
struct IoError : Error {
  using Error::Error;
};

// --- deterministic seeding -------------------------------------------------

/// SplitMix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return mix64(root ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Named sub-stream of a root seed. Stable across platforms (FNV-1a over the name).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return derive_seed(root, h);
}

}  // namespace pasdf
