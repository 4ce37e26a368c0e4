#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "mapo/error.hpp"

namespace mapo {

/// Lower-case hex SHA-256 of `data`.
inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex.append(buf, 2);
    }
    return hex;
}

}  // namespace mapo
