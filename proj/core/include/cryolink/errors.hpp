#pragma once

// Error taxonomy shared by the whole library.
//
// The library throws standard exceptions for local argument/domain problems
// (std::invalid_argument, std::out_of_range) and the typed exceptions below
// for the structured failure modes that callers are expected to branch on:
//
//   validation_error   a configuration document or assembly description is
//                      structurally invalid (bad field, overlapping modules,
//                      missing section, ...)
//   infeasible_error   a physically meaningful computation has no admissible
//                      answer (a sink would need a plate temperature outside
//                      its cooling-curve domain, a feasibility bracket does
//                      not actually bracket, ...)
//   convergence_error  an iterative scheme exhausted its budget (Picard
//                      outer loop, divide relaxation sweeps, fit refinement)
//   io_error           a file could not be read or written
//
// The command-line front end maps these onto distinct process exit codes.

#include <stdexcept>
#include <string>

namespace cryolink {

class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

class infeasible_error : public std::runtime_error {
 public:
  explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

class convergence_error : public std::runtime_error {
 public:
  explicit convergence_error(const std::string& what) : std::runtime_error(what) {}
};

class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cryolink
