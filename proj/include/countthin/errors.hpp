#pragma once

#include <stdexcept>
#include <string>

namespace countthin {

/// A numeric parameter lies outside its domain (negative mean, eps not summing to one, ...).
class InvalidParameter : public std::invalid_argument {
public:
    explicit InvalidParameter(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed or mismatched input data (shape mismatch, bad file contents, ...).
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// The data carry no information for the requested estimate (e.g. an all-zero gene).
class EstimationDegenerate : public std::runtime_error {
public:
    explicit EstimationDegenerate(const std::string& what) : std::runtime_error(what) {}
};

/// Design matrix is not of full column rank.
class SingularDesign : public std::runtime_error {
public:
    explicit SingularDesign(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace countthin
