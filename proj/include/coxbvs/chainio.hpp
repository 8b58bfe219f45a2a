#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <openssl/evp.h>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coxbvs/sampler.hpp"

namespace coxbvs {

// Hex SHA-256 of a byte string; the content hash carried by manifests and
// compared by the determinism checks.
inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("sha256: cannot create digest context");
    if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256: digest computation failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(detail::str("sha256_file: cannot open '", path, "'"));
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

namespace detail {

// Native-endian columnar blobs; chains are machine-local artifacts.
class ByteWriter {
public:
    void raw(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void matrix(const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
    void matrix_u8(const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const std::uint8_t v = m(r, c);
                raw(&v, 1);
            }
    }
    void vector(const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string bytes) : buf_(std::move(bytes)) {}
    void raw(void* data, std::size_t n) {
        if (pos_ + n > buf_.size()) throw std::runtime_error("chain file truncated");
        std::memcpy(data, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::int32_t i32() {
        std::int32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    Eigen::MatrixXd matrix(int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = f64();
        return m;
    }
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> matrix_u8(int rows, int cols) {
        Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                std::uint8_t v;
                raw(&v, 1);
                m(r, c) = v;
            }
        return m;
    }
    Eigen::VectorXd vector(int n) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    std::string buf_;
    std::size_t pos_ = 0;
};

inline constexpr char chain_magic[9] = "CBVSCH01";

}  // namespace detail

inline std::string serialize_chain(const ChainSamples& s) {
    detail::ByteWriter w;
    w.raw(detail::chain_magic, 8);
    w.i32(s.S);
    w.i32(s.p);
    w.i32(static_cast<std::int32_t>(s.model));
    w.i32(s.iterations);
    w.i32(s.burn_in);
    w.i32(s.thin);
    w.i32(s.omega_thin);
    w.u64(s.seed);
    w.i32(s.draws());
    const int omega_rows = s.omega_tri.empty() ? 0 : static_cast<int>(s.omega_tri[0].rows());
    const int within_cols = s.edges_within.empty() ? 0 : static_cast<int>(s.edges_within[0].cols());
    const int tri_cols = s.omega_tri.empty() ? 0 : static_cast<int>(s.omega_tri[0].cols());
    w.i32(omega_rows);
    w.i32(within_cols);
    w.i32(tri_cols);
    w.i32(static_cast<std::int32_t>(s.edges_between.size()));
    for (int J : s.intervals) w.i32(J);
    for (int sub = 0; sub < s.S; ++sub) {
        w.matrix(s.beta[sub]);
        w.matrix_u8(s.gamma[sub]);
        w.matrix(s.hazard[sub]);
        w.vector(s.loglik[sub]);
        w.matrix_u8(s.edges_within[sub]);
        w.matrix(s.omega_tri[sub]);
        w.vector(s.mh_accept_rate[sub]);
    }
    for (const auto& eb : s.edges_between) w.matrix_u8(eb);
    for (int r : s.omega_draw_rows) w.i32(r);
    return w.bytes();
}

inline ChainSamples deserialize_chain(std::string bytes) {
    detail::ByteReader r(std::move(bytes));
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, detail::chain_magic, 8) != 0)
        throw std::runtime_error("not a chain file (bad magic)");
    ChainSamples s;
    s.S = r.i32();
    s.p = r.i32();
    s.model = static_cast<ModelKind>(r.i32());
    s.iterations = r.i32();
    s.burn_in = r.i32();
    s.thin = r.i32();
    s.omega_thin = r.i32();
    s.seed = r.u64();
    const int draws = r.i32();
    const int omega_rows = r.i32();
    const int within_cols = r.i32();
    const int tri_cols = r.i32();
    const int n_between = r.i32();
    if (s.S < 1 || s.p < 1 || draws < 0)
        throw std::runtime_error("chain file has inconsistent dimensions");
    s.intervals.resize(s.S);
    for (int& J : s.intervals) J = r.i32();
    for (int sub = 0; sub < s.S; ++sub) {
        s.beta.push_back(r.matrix(draws, s.p));
        s.gamma.push_back(r.matrix_u8(draws, s.p));
        s.hazard.push_back(r.matrix(draws, s.intervals[sub]));
        s.loglik.push_back(r.vector(draws));
        s.edges_within.push_back(r.matrix_u8(draws, within_cols));
        s.omega_tri.push_back(r.matrix(omega_rows, tri_cols));
        s.mh_accept_rate.push_back(r.vector(s.p));
    }
    for (int q = 0; q < n_between; ++q) s.edges_between.push_back(r.matrix_u8(draws, s.p));
    s.omega_draw_rows.resize(omega_rows);
    for (int& v : s.omega_draw_rows) v = r.i32();
    if (!r.at_end()) throw std::runtime_error("chain file has trailing bytes");
    return s;
}

// Writes <stem>.bin plus <stem>_manifest.json carrying the configuration echo
// and the content hash of the binary.
inline nlohmann::json save_chain(const ChainSamples& s, const std::string& stem,
                                 const nlohmann::json& config_echo = {}) {
    const std::string bytes = serialize_chain(s);
    const std::string bin_path = stem + ".bin";
    {
        std::ofstream out(bin_path, std::ios::binary);
        if (!out) throw std::runtime_error(detail::str("cannot write '", bin_path, "'"));
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error(detail::str("write failed for '", bin_path, "'"));
    }
    nlohmann::json manifest;
    manifest["format"] = "coxbvs-chain-v1";
    manifest["chain_file"] = bin_path.substr(bin_path.find_last_of('/') + 1);
    manifest["content_hash"] = sha256_hex(bytes);
    manifest["model"] = model_name(s.model);
    manifest["p"] = s.p;
    manifest["S"] = s.S;
    manifest["intervals"] = s.intervals;
    manifest["iterations"] = s.iterations;
    manifest["burn_in"] = s.burn_in;
    manifest["thin"] = s.thin;
    manifest["omega_thin"] = s.omega_thin;
    manifest["seed"] = s.seed;
    manifest["draws"] = s.draws();
    if (!config_echo.is_null() && !config_echo.empty()) manifest["config"] = config_echo;
    const std::string manifest_path = stem + "_manifest.json";
    std::ofstream mout(manifest_path);
    if (!mout) throw std::runtime_error(detail::str("cannot write '", manifest_path, "'"));
    mout << manifest.dump(2) << '\n';
    return manifest;
}

inline ChainSamples load_chain(const std::string& bin_path) {
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw std::runtime_error(detail::str("cannot open '", bin_path, "'"));
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_chain(ss.str());
}

}  // namespace coxbvs
