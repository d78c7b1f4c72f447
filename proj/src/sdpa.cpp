#include "css/errors.hpp"
#include "css/sdprelax.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace css {

SdpaData to_sdpa(const ReducedRelaxation& red) {
    if (!red.full) throw std::invalid_argument("reduced relaxation detached from its source");
    const Eigen::Index G = static_cast<Eigen::Index>(red.full->gram_size);
    SdpaData out;
    out.m = static_cast<int>(red.retained_rows.size());
    for (size_t k = 0; k < red.U.size(); ++k) out.block_sizes.push_back(static_cast<int>(G));
    const Eigen::Index kf = red.VN.cols();
    if (kf > 0) out.block_sizes.push_back(-static_cast<int>(2 * kf));
    out.c = red.rhs;
    for (size_t k = 0; k < red.U.size(); ++k)
        for (Eigen::Index t = 0; t < red.U[k].outerSize(); ++t)
            for (RowSparse::InnerIterator it(red.U[k], t); it; ++it) {
                Eigen::Index r = it.col() / G, s = it.col() % G;
                if (r > s) continue;
                out.entries.push_back({static_cast<int>(t + 1), static_cast<int>(k + 1), static_cast<int>(r + 1),
                                       static_cast<int>(s + 1), it.value()});
            }
    if (kf > 0) {
        const int blk = static_cast<int>(red.U.size()) + 1;
        for (Eigen::Index t = 0; t < red.VN.rows(); ++t)
            for (Eigen::Index c = 0; c < kf; ++c) {
                double v = red.VN(t, c);
                if (v == 0.0) continue;
                int i = static_cast<int>(c + 1);
                out.entries.push_back({static_cast<int>(t + 1), blk, i, i, v});
                out.entries.push_back({static_cast<int>(t + 1), blk, i + static_cast<int>(kf), i + static_cast<int>(kf), -v});
            }
    }
    return out;
}

void write_sdpa(const SdpaData& data, std::ostream& out) {
    char buf[64];
    out << data.m << "\n" << data.block_sizes.size() << "\n";
    for (size_t k = 0; k < data.block_sizes.size(); ++k) out << (k ? " " : "") << data.block_sizes[k];
    out << "\n";
    for (Eigen::Index i = 0; i < data.c.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", data.c(i));
        out << (i ? " " : "") << buf;
    }
    out << "\n";
    for (const auto& e : data.entries) {
        std::snprintf(buf, sizeof buf, "%.17g", e.value);
        out << e.matrix << " " << e.block << " " << e.i << " " << e.j << " " << buf << "\n";
    }
    if (!out) throw IoError("failed writing sparse SDP file");
}

void export_sdpa(const ReducedRelaxation& rel, std::ostream& out) { write_sdpa(to_sdpa(rel), out); }

namespace {

std::string next_data_line(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        size_t p = line.find_first_not_of(" \t\r");
        if (p == std::string::npos) continue;
        if (line[p] == '"' || line[p] == '*') continue;
        for (char& ch : line)
            if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
        return line;
    }
    throw ParseError("sparse SDP file truncated");
}

} // namespace

SdpaData parse_sdpa(std::istream& in) {
    SdpaData d;
    int nblocks = 0;
    {
        std::istringstream s(next_data_line(in));
        if (!(s >> d.m)) throw ParseError("sparse SDP: bad constraint count");
    }
    {
        std::istringstream s(next_data_line(in));
        if (!(s >> nblocks)) throw ParseError("sparse SDP: bad block count");
    }
    {
        std::istringstream s(next_data_line(in));
        for (int k = 0; k < nblocks; ++k) {
            int b;
            if (!(s >> b)) throw ParseError("sparse SDP: bad block sizes");
            d.block_sizes.push_back(b);
        }
    }
    {
        d.c.resize(d.m);
        std::istringstream s(d.m ? next_data_line(in) : std::string());
        for (int i = 0; i < d.m; ++i) {
            std::string tok;
            if (!(s >> tok)) throw ParseError("sparse SDP: short right-hand vector");
            d.c(i) = std::stod(tok);
        }
    }
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream s(line);
        SdpaData::Entry e;
        std::string tok;
        if (!(s >> e.matrix)) continue;
        if (!(s >> e.block >> e.i >> e.j >> tok)) throw ParseError("sparse SDP: malformed entry line");
        e.value = std::stod(tok);
        d.entries.push_back(e);
    }
    return d;
}

} // namespace css
