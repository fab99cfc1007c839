#pragma once

#include <stdexcept>
#include <string>

namespace matchfit {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DegenerateGeometry : public Error {
public:
    explicit DegenerateGeometry(const std::string& msg) : Error(msg) {}
};

class OverlayFailure : public Error {
public:
    explicit OverlayFailure(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

class UnsupportedGeometry : public Error {
public:
    explicit UnsupportedGeometry(const std::string& msg) : Error(msg) {}
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& msg) : Error(msg) {}
};

class NoAnchors : public Error {
public:
    explicit NoAnchors(const std::string& msg) : Error(msg) {}
};

class DistortionBound : public Error {
public:
    explicit DistortionBound(const std::string& msg) : Error(msg) {}
};

class TooFewSites : public Error {
public:
    explicit TooFewSites(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace matchfit
