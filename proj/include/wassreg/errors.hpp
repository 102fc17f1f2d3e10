#pragma once

#include <stdexcept>
#include <string>

namespace wassreg {

//! Thrown when Sinkhorn scaling iterations hit max_iters before the
//! marginal violation drops below tolerance. Carries the final violation.
class SinkhornNonConvergence : public std::runtime_error {
public:
    SinkhornNonConvergence(const std::string& msg, double violation, int iterations)
        : std::runtime_error(msg), final_violation(violation), iterations_run(iterations) {}

    double final_violation;
    int iterations_run;
};

//! Thrown when barycenter iterates move apart for several consecutive
//! steps instead of settling; large regularization parameters are the
//! usual cause.
class SinkhornDiverged : public std::runtime_error {
public:
    explicit SinkhornDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

//! Thrown when a displacement interpolation would push mass outside the
//! grid rectangle.
class DomainExit : public std::runtime_error {
public:
    DomainExit(const std::string& msg, double escaped)
        : std::runtime_error(msg), escaped_mass(escaped) {}

    double escaped_mass;
};

//! Thrown when a local-mode prediction is requested outside the design hull.
class ExtrapolationNotSupported : public std::runtime_error {
public:
    explicit ExtrapolationNotSupported(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace wassreg
