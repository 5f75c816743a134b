#pragma once

// Little-endian container primitives shared by checkpoints and dataset caches.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace moesurv::binio {

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    void u32(std::uint32_t v) { raw_le(v); }
    void u64(std::uint64_t v) { raw_le(v); }
    void i64(std::int64_t v) { raw_le(static_cast<std::uint64_t>(v)); }
    void f64(double v) { raw_le(std::bit_cast<std::uint64_t>(v)); }

    void str(const std::string& s) {
        u64(s.size());
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void magic(const char (&tag)[9]) { os_.write(tag, 8); }

    /// rows, cols, then row-major payload.
    void matrix(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }

    void f64s(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }

    void i64s(const std::vector<std::int64_t>& v) {
        u64(v.size());
        for (auto x : v) i64(x);
    }

    void strs(const std::vector<std::string>& v) {
        u64(v.size());
        for (const auto& s : v) str(s);
    }

private:
    void raw_le(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        os_.write(reinterpret_cast<const char*>(b), 8);
    }
    void raw_le(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        os_.write(reinterpret_cast<const char*>(b), 4);
    }

    std::ostream& os_;
};

class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}

    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        unsigned char b[8];
        read(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string str() {
        const auto n = checked_size(u64());
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }

    void expect_magic(const char (&tag)[9]) {
        char got[8];
        read(got, 8);
        if (std::memcmp(got, tag, 8) != 0)
            throw std::runtime_error(std::string("bad container magic, expected ") + tag);
    }

    Eigen::MatrixXd matrix() {
        const auto rows = checked_size(u64());
        const auto cols = checked_size(u64());
        Eigen::MatrixXd m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) m(r, c) = f64();
        return m;
    }

    std::vector<double> f64s() {
        std::vector<double> v(checked_size(u64()));
        for (auto& x : v) x = f64();
        return v;
    }
    std::vector<std::int64_t> i64s() {
        std::vector<std::int64_t> v(checked_size(u64()));
        for (auto& x : v) x = i64();
        return v;
    }
    std::vector<std::string> strs() {
        std::vector<std::string> v(checked_size(u64()));
        for (auto& x : v) x = str();
        return v;
    }

private:
    template <class P>
    void read(P* dst, std::size_t n) {
        is_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n)
            throw std::runtime_error("truncated container");
    }
    static std::size_t checked_size(std::uint64_t n) {
        if (n > (std::uint64_t{1} << 40)) throw std::runtime_error("corrupt container length");
        return static_cast<std::size_t>(n);
    }

    std::istream& is_;
};

}  // namespace moesurv::binio
