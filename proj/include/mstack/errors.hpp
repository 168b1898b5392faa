#pragma once

#include <stdexcept>
#include <string>

namespace mstack {

// Base class for all recoverable stack errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// core
struct DegenerateHeading : Error {
  using Error::Error;
};

// propulsion
struct EmptyCurve : Error {
  using Error::Error;
};
struct OutOfRange : Error {
  using Error::Error;
};
struct Unreachable : Error {
  using Error::Error;
};

// plant
struct InvalidCommand : Error {
  using Error::Error;
};
struct RankDeficientGeometry : Error {
  using Error::Error;
};

// estimation
struct UnknownSource : Error {
  using Error::Error;
};
struct SourceNeverSeen : Error {
  using Error::Error;
};
struct NotInitialized : Error {
  using Error::Error;
};

// control
struct DegenerateForce : Error {
  using Error::Error;
};
struct UnknownProfile : Error {
  using Error::Error;
};

// netsim
struct UnknownChannel : Error {
  using Error::Error;
};
struct UnknownTopic : Error {
  using Error::Error;
};

// uvdar
struct LengthMismatch : Error {
  using Error::Error;
};

// cli / runner
struct SimulationPanic : Error {
  using Error::Error;
};

}  // namespace mstack
