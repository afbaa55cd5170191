#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace kge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

using EntityId = std::int32_t;
using RelationId = std::int32_t;

/// Deterministic generator used everywhere a seed is accepted.
using Rng = std::mt19937_64;

struct Triple {
  EntityId subject = 0;
  RelationId predicate = 0;
  EntityId object = 0;

  auto operator<=>(const Triple&) const = default;
};

enum class Side { Subject, Object };

enum class Split { Train, Valid, Test };

const char* to_string(Split split);
Split parse_split(const std::string& name);

struct ParseError : std::runtime_error {
  ParseError(const std::string& file, std::size_t line, const std::string& what);
  std::size_t line;
};

struct VocabularyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InductiveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kge
