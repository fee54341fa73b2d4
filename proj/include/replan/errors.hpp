#pragma once

#include <stdexcept>
#include <string>

namespace replan {

// Failure taxonomy shared by all modules. Subclasses allow catching a
// specific failure; kind() supports dispatch (e.g. CLI exit codes).
enum class ErrorKind {
    TagStructure,   // plan tag grammar broken
    RegionPayload,  // region block not a valid JSON list of region objects
    Bbox,           // degenerate box after clamping
    Geometry,       // bbox/grid outside the geometry contract
    DegenerateBox,  // perturbation collapsed a box to zero area
    Layout,         // token layout segments inconsistent
    Mask,           // mask violates its own invariants (e.g. empty query row)
    Shape,          // tensor/grid dimension mismatch
    Domain,         // scalar outside its documented range
    EmptyInput,     // aggregate over zero records
    Format,         // malformed input file
    Io,             // filesystem failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct TagStructureError : Error {
    explicit TagStructureError(const std::string& w) : Error(ErrorKind::TagStructure, w) {}
};

struct RegionPayloadError : Error {
    explicit RegionPayloadError(const std::string& w) : Error(ErrorKind::RegionPayload, w) {}
};

struct BboxError : Error {
    explicit BboxError(const std::string& w) : Error(ErrorKind::Bbox, w) {}
};

struct GeometryError : Error {
    explicit GeometryError(const std::string& w) : Error(ErrorKind::Geometry, w) {}
};

struct DegenerateBoxError : Error {
    explicit DegenerateBoxError(const std::string& w) : Error(ErrorKind::DegenerateBox, w) {}
};

struct LayoutError : Error {
    explicit LayoutError(const std::string& w) : Error(ErrorKind::Layout, w) {}
};

struct MaskError : Error {
    explicit MaskError(const std::string& w) : Error(ErrorKind::Mask, w) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};

struct EmptyInputError : Error {
    explicit EmptyInputError(const std::string& w) : Error(ErrorKind::EmptyInput, w) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& w) : Error(ErrorKind::Format, w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

} // namespace replan
