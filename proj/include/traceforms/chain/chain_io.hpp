#pragma once

// Plain-text chain files:
//
//   # comment
//   states 3
//   m: 1 1 1
//   Q:
//   -3 1 2
//   1 -1 0
//   2 0 -2
//   F: 1 2
//
// Whitespace separated; `#` starts a comment that runs to end of line.
// `labels:` may optionally follow the `m:` line. `F:` is optional.

#include <traceforms/chain/chain.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

namespace traceforms::chain {

struct ChainFile {
    SymmetricChain chain;
    std::optional<std::vector<std::size_t>> trace_set;
};

namespace detail {

inline std::vector<std::string> tokenize(std::istream& in) {
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
    }
    return tokens;
}

inline double parse_double(const std::string& tok) {
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    const auto res = std::from_chars(tok.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ParseError("expected a number, got '" + tok + "'");
    }
    return v;
}

inline std::size_t parse_index(const std::string& tok) {
    std::size_t v = 0;
    const auto* end = tok.data() + tok.size();
    const auto res = std::from_chars(tok.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ParseError("expected a nonnegative integer, got '" + tok + "'");
    }
    return v;
}

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_exact(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace detail

[[nodiscard]] inline ChainFile parse_chain(std::istream& in) {
    const auto tokens = detail::tokenize(in);
    std::size_t pos = 0;
    auto next = [&](const char* what) -> const std::string& {
        if (pos >= tokens.size()) throw ParseError(std::string("unexpected end of input, expected ") + what);
        return tokens[pos++];
    };
    auto expect = [&](const std::string& keyword) {
        const auto& tok = next(keyword.c_str());
        if (tok != keyword) throw ParseError("expected '" + keyword + "', got '" + tok + "'");
    };

    expect("states");
    const std::size_t n = detail::parse_index(next("state count"));
    if (n == 0) throw ParseError("state count must be positive");
    const auto ni = static_cast<Eigen::Index>(n);

    expect("m:");
    Vector m(ni);
    for (Eigen::Index i = 0; i < ni; ++i) m(i) = detail::parse_double(next("weight"));

    std::vector<std::string> labels;
    if (pos < tokens.size() && tokens[pos] == "labels:") {
        ++pos;
        for (std::size_t i = 0; i < n; ++i) labels.push_back(next("label"));
    }

    expect("Q:");
    Matrix q(ni, ni);
    for (Eigen::Index i = 0; i < ni; ++i)
        for (Eigen::Index j = 0; j < ni; ++j) q(i, j) = detail::parse_double(next("rate"));

    std::optional<std::vector<std::size_t>> f;
    if (pos < tokens.size()) {
        expect("F:");
        f.emplace();
        while (pos < tokens.size()) f->push_back(detail::parse_index(tokens[pos++]));
    }
    return {validate_chain(q, m, std::move(labels)), std::move(f)};
}

[[nodiscard]] inline ChainFile read_chain_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open chain file '" + path + "'");
    try {
        return parse_chain(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_chain(std::ostream& out, const SymmetricChain& chain,
                        const std::optional<std::vector<std::size_t>>& trace_set = std::nullopt) {
    const auto n = static_cast<Eigen::Index>(chain.size());
    out << "states " << n << "\n";
    out << "m:";
    for (Eigen::Index i = 0; i < n; ++i) out << ' ' << detail::format_exact(chain.weights()(i));
    out << "\n";
    bool default_labels = true;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (chain.labels()[static_cast<std::size_t>(i)] != std::to_string(i)) default_labels = false;
    }
    if (!default_labels) {
        out << "labels:";
        for (const auto& l : chain.labels()) out << ' ' << l;
        out << "\n";
    }
    out << "Q:\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) out << (j ? " " : "") << detail::format_exact(chain.rates()(i, j));
        out << "\n";
    }
    if (trace_set) {
        out << "F:";
        for (auto x : *trace_set) out << ' ' << x;
        out << "\n";
    }
}

} // namespace traceforms::chain
