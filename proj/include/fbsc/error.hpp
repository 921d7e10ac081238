#pragma once

#include <stdexcept>
#include <string>

namespace fbsc {

// Every hard error raised by the library. Messages are meant for the CLI user.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fbsc
