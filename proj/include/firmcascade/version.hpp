#ifndef FIRMCASCADE_VERSION_HPP
#define FIRMCASCADE_VERSION_HPP

namespace firmcascade {

inline constexpr const char* kToolkitVersion = "0.1.0";

}

#endif
