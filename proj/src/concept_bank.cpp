#include "ddif/concept_bank.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace ddif {

Polarity polarity_of(std::string_view concept_label) {
    return concept_label == "benign" ? Polarity::benign : Polarity::malicious;
}

void ConceptBank::add(std::string concept_label, Embedding embedding) {
    if (concept_label.empty()) throw ParamError("bank: empty concept label");
    if (entries.empty() && dim == 0) {
        dim = static_cast<int>(embedding.size());
    }
    if (static_cast<int>(embedding.size()) != dim) {
        throw ShapeError("bank: entry dim " + std::to_string(embedding.size()) +
                         ", bank dim " + std::to_string(dim));
    }
    Polarity pol = polarity_of(concept_label);
    entries.push_back(ConceptEntry{std::move(embedding), std::move(concept_label), pol});
}

std::size_t ConceptBank::count(Polarity p) const {
    std::size_t n = 0;
    for (const auto& e : entries) {
        if (e.polarity == p) ++n;
    }
    return n;
}

std::vector<Neighbor> topk_neighbors(const ConceptBank& bank, const Embedding& query,
                                     Polarity polarity, int k,
                                     const Embedding* exclude_exact) {
    if (k <= 0) throw ParamError("topk_neighbors: k must be >= 1");
    if (static_cast<int>(query.size()) != bank.dim) {
        throw ShapeError("topk_neighbors: query dim " + std::to_string(query.size()) +
                         ", bank dim " + std::to_string(bank.dim));
    }

    std::vector<Neighbor> scored;
    scored.reserve(bank.entries.size());
    for (std::size_t i = 0; i < bank.entries.size(); ++i) {
        const ConceptEntry& e = bank.entries[i];
        if (e.polarity != polarity) continue;
        if (exclude_exact != nullptr && e.embedding == *exclude_exact) continue;
        scored.push_back(Neighbor{i, cosine_similarity(query, e.embedding)});
    }
    if (scored.empty()) {
        throw DegenerateError("topk_neighbors: bank has no entries of requested polarity");
    }

    auto better = [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.index < b.index;
    };
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);
    scored.resize(take);
    return scored;
}

const char* aggregator_name(Aggregator a) {
    switch (a) {
        case Aggregator::mean: return "mean";
        case Aggregator::max: return "max";
        case Aggregator::softmax_weighted: return "softmax_weighted";
    }
    return "mean";
}

Aggregator aggregator_from_name(const std::string& name) {
    if (name == "mean") return Aggregator::mean;
    if (name == "max") return Aggregator::max;
    if (name == "softmax_weighted") return Aggregator::softmax_weighted;
    throw ParamError("unknown aggregator '" + name + "'");
}

double set_distance(std::span<const Neighbor> neighbors, Aggregator agg) {
    if (neighbors.empty()) throw DegenerateError("set_distance: empty neighbor set");
    switch (agg) {
        case Aggregator::mean: {
            double acc = 0.0;
            for (const Neighbor& n : neighbors) acc += n.similarity;
            return acc / static_cast<double>(neighbors.size());
        }
        case Aggregator::max: {
            double best = neighbors[0].similarity;
            for (const Neighbor& n : neighbors) best = std::max(best, n.similarity);
            return best;
        }
        case Aggregator::softmax_weighted: {
            std::vector<double> sims(neighbors.size());
            for (std::size_t i = 0; i < neighbors.size(); ++i) sims[i] = neighbors[i].similarity;
            std::vector<double> w = softmax(sims, 1.0);
            double acc = 0.0;
            for (std::size_t i = 0; i < sims.size(); ++i) acc += w[i] * sims[i];
            return acc;
        }
    }
    throw ParamError("set_distance: bad aggregator");
}

Embedding reference_embedding(const ConceptBank& bank, std::span<const Neighbor> neighbors,
                              double gamma) {
    if (neighbors.empty()) throw DegenerateError("reference_embedding: empty neighbor set");
    if (!(gamma > 0.0)) throw ParamError("reference_embedding: gamma must be > 0");

    std::vector<double> sims(neighbors.size());
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        if (neighbors[i].index >= bank.entries.size()) {
            throw ShapeError("reference_embedding: neighbor index out of range");
        }
        sims[i] = neighbors[i].similarity;
    }
    std::vector<double> w = softmax(sims, gamma);

    Embedding out(static_cast<std::size_t>(bank.dim), 0.0);
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        const Embedding& z = bank.entries[neighbors[i].index].embedding;
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += w[i] * z[d];
    }
    return out;
}

void bank_save(const ConceptBank& bank, const std::string& path) {
    std::string body = "DDIF-BANK v1 dim=" + std::to_string(bank.dim) + " n=" +
                       std::to_string(bank.entries.size()) + "\n";
    char buf[40];
    for (const auto& e : bank.entries) {
        body += e.concept_label;
        body += '\t';
        for (std::size_t d = 0; d < e.embedding.size(); ++d) {
            if (d) body += ' ';
            std::snprintf(buf, sizeof(buf), "%.17g", e.embedding[d]);
            body += buf;
        }
        body += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << body;
    if (!f) throw IoError("write failed: " + path);
}

ConceptBank bank_load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);

    std::string line;
    if (!std::getline(f, line)) throw ParseError("bank " + path + ": empty file");

    int dim = 0;
    std::size_t n = 0;
    {
        int got = std::sscanf(line.c_str(), "DDIF-BANK v1 dim=%d n=%zu", &dim, &n);
        if (got != 2 || dim <= 0) {
            throw ParseError("bank " + path + " line 1: bad header '" + line + "'");
        }
    }

    ConceptBank bank;
    bank.dim = dim;
    bank.version = 1;
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty() && bank.entries.size() == n) break;  // trailing newline
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("bank " + path + " line " + std::to_string(line_no) +
                             ": missing tab separator");
        }
        std::string label = line.substr(0, tab);
        if (label.empty() || label.find_first_of(" \t\r\n") != std::string::npos) {
            throw ParseError("bank " + path + " line " + std::to_string(line_no) +
                             ": bad concept label");
        }
        Embedding z;
        z.reserve(static_cast<std::size_t>(dim));
        const char* p = line.c_str() + tab + 1;
        char* end = nullptr;
        while (*p != '\0') {
            double v = std::strtod(p, &end);
            if (end == p) break;
            z.push_back(v);
            p = end;
        }
        if (static_cast<int>(z.size()) != dim) {
            throw ParseError("bank " + path + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " values, got " + std::to_string(z.size()));
        }
        bank.add(std::move(label), std::move(z));
    }
    if (bank.entries.size() != n) {
        throw ParseError("bank " + path + ": header says n=" + std::to_string(n) + " but file has " +
                         std::to_string(bank.entries.size()) + " entries");
    }
    return bank;
}

}  // namespace ddif
