#include "annstat/error.hpp"

#include <sstream>

namespace annstat {

Error::Error(std::string module, const std::string& message)
    : std::runtime_error("[" + module + "] " + message), module_(std::move(module)) {}

ParseError::ParseError(std::string module, const std::string& message, std::string location)
    : Error(std::move(module), message + " (at " + location + ")"), location_(std::move(location)) {}

namespace {
std::string divergence_message(int epoch, double loss) {
    std::ostringstream os;
    os << "training diverged at epoch " << epoch << " (loss = " << loss << ")";
    return os.str();
}
}  // namespace

DivergenceError::DivergenceError(std::string module, int epoch, double loss)
    : Error(std::move(module), divergence_message(epoch, loss)), epoch_(epoch) {}

}  // namespace annstat
