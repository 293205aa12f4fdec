#include "ddif/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace ddif {

std::vector<PromptRecord> load_dataset_tsv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);

    std::vector<PromptRecord> records;
    std::string line;
    int line_no = 0;
    std::size_t dim = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::size_t tab1 = line.find('\t');
        std::size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos) {
            throw ParseError("dataset " + path + " line " + std::to_string(line_no) +
                             ": expected 3 tab-separated fields");
        }

        PromptRecord rec;
        rec.prompt_id = line.substr(0, tab1);
        if (rec.prompt_id.empty()) {
            throw ParseError("dataset " + path + " line " + std::to_string(line_no) +
                             ": empty prompt id");
        }
        std::string label_field = line.substr(tab1 + 1, tab2 - tab1 - 1);
        if (label_field == "0") {
            rec.label = Label::malicious;
        } else if (label_field == "1") {
            rec.label = Label::benign;
        } else {
            throw ParseError("dataset " + path + " line " + std::to_string(line_no) +
                             ": label must be 0 or 1, got '" + label_field + "'");
        }

        const char* p = line.c_str() + tab2 + 1;
        char* end = nullptr;
        while (*p != '\0') {
            double v = std::strtod(p, &end);
            if (end == p) break;
            rec.raw_embedding.push_back(v);
            p = end;
        }
        if (rec.raw_embedding.empty()) {
            throw ParseError("dataset " + path + " line " + std::to_string(line_no) +
                             ": no embedding values");
        }
        if (dim == 0) {
            dim = rec.raw_embedding.size();
        } else if (rec.raw_embedding.size() != dim) {
            throw ParseError("dataset " + path + " line " + std::to_string(line_no) +
                             ": dim mismatch (" + std::to_string(rec.raw_embedding.size()) +
                             " vs " + std::to_string(dim) + ")");
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw ParseError("dataset " + path + ": no records");
    return records;
}

void save_dataset_tsv(const std::vector<PromptRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    char buf[40];
    for (const auto& rec : records) {
        f << rec.prompt_id << '\t' << (rec.label == Label::benign ? 1 : 0) << '\t';
        for (std::size_t d = 0; d < rec.raw_embedding.size(); ++d) {
            if (d) f << ' ';
            std::snprintf(buf, sizeof(buf), "%.17g", rec.raw_embedding[d]);
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace ddif
