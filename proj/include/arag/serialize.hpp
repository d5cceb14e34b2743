#pragma once

#include "arag/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace arag {

// Minimal little-endian binary serialization for model/index files. Readers
// throw SchemaMismatch on truncation so corrupt files fail loudly.

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) raise(Errc::IoFailure, "cannot open for write: " + path);
    }

    void magic(const char tag[8]) { out_.write(tag, 8); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }

    void finish(const std::string& path) {
        out_.flush();
        if (!out_) raise(Errc::IoFailure, "write failed: " + path);
    }

private:
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    std::ofstream out_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) raise(Errc::IoFailure, "cannot open for read: " + path);
    }

    void expect_magic(const char tag[8]) {
        char got[8] = {};
        raw(got, 8);
        if (std::memcmp(got, tag, 8) != 0)
            raise(Errc::SchemaMismatch, path_ + ": not a " + std::string(tag, 7) + " file");
    }
    void expect_version(std::uint32_t expected) {
        std::uint32_t got = u32();
        if (got != expected)
            raise(Errc::SchemaMismatch, path_ + ": file version " + std::to_string(got) +
                                            " unsupported (expected " + std::to_string(expected) + ")");
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        raw(&v, sizeof v);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v = 0;
        raw(&v, sizeof v);
        return v;
    }
    std::string str() {
        std::uint64_t n = u64();
        check_size(n);
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    std::vector<double> f64s() {
        std::uint64_t n = u64();
        check_size(n * sizeof(double));
        std::vector<double> v(n);
        raw(v.data(), n * sizeof(double));
        return v;
    }

private:
    void check_size(std::uint64_t n) {
        // Guards against absurd length fields from corrupt files.
        if (n > (1ull << 33))
            raise(Errc::SchemaMismatch, path_ + ": corrupt length field");
    }
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            raise(Errc::SchemaMismatch, path_ + ": truncated file");
    }
    std::ifstream in_;
    std::string path_;
};

} // namespace arag
