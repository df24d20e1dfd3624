#pragma once

#include <stdexcept>
#include <string>

namespace dimrank {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error { public: using Error::Error; };
class StaleActivations : public Error { public: using Error::Error; };
class InvalidLabel : public Error { public: using Error::Error; };
class UnknownUser : public Error { public: using Error::Error; };
class UnknownPost : public Error { public: using Error::Error; };
class UnknownCursor : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class CorruptCheckpoint : public Error { public: using Error::Error; };
class VersionMismatch : public Error { public: using Error::Error; };
class EmptyQuery : public Error { public: using Error::Error; };
class InvalidConfig : public Error { public: using Error::Error; };
class InvalidArgument : public Error { public: using Error::Error; };

}  // namespace dimrank
