#pragma once

#include <stdexcept>
#include <string>

namespace dmoe {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument outside its mathematical domain (negative gain, bad layer...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Traffic scheduled over a link whose aggregate rate is zero.
class InfeasibleLinkError : public Error {
 public:
  using Error::Error;
};

// More active links than subcarriers; one-subcarrier-per-link cannot hold.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// No finite-cost matching of links into subcarriers exists.
class InfeasibleAssignmentError : public Error {
 public:
  using Error::Error;
};

// Aggregation requested over a selection whose scores are all zero.
class DegenerateGateError : public Error {
 public:
  using Error::Error;
};

// Exhaustive oracle asked to enumerate beyond its guard.
class SizeGuardError : public Error {
 public:
  using Error::Error;
};

// Scenario documents: malformed JSON or schema violations.
class ScenarioError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmoe
