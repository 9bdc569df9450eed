#pragma once

#include <stdexcept>
#include <string>

namespace vlp {

// Base class for every recoverable failure raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define VLP_DECLARE_ERROR(Name)                                   \
    class Name : public Error {                                   \
    public:                                                       \
        explicit Name(const std::string& what) : Error(what) {}   \
    }

// geometry
VLP_DECLARE_ERROR(BehindCamera);
// render
VLP_DECLARE_ERROR(MalformedIes);
VLP_DECLARE_ERROR(MalformedPgm);
// codec
VLP_DECLARE_ERROR(EmptyQuad);
VLP_DECLARE_ERROR(ProfileTooShort);
VLP_DECLARE_ERROR(NoTransitions);
VLP_DECLARE_ERROR(MalformedStripes);
VLP_DECLARE_ERROR(NoMatch);
VLP_DECLARE_ERROR(AmbiguousMatch);
// vision
VLP_DECLARE_ERROR(EmptyMask);
VLP_DECLARE_ERROR(TooFewCorners);
VLP_DECLARE_ERROR(DegenerateQuad);
VLP_DECLARE_ERROR(VisionFailure);
// learn
VLP_DECLARE_ERROR(InvalidTrainingSet);
VLP_DECLARE_ERROR(MalformedModel);
// harness
VLP_DECLARE_ERROR(InsufficientRows);
VLP_DECLARE_ERROR(EmptyTestSet);
VLP_DECLARE_ERROR(ConfigError);
VLP_DECLARE_ERROR(MalformedCsv);

#undef VLP_DECLARE_ERROR

}  // namespace vlp
