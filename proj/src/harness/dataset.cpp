#include "vlp/harness/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "vlp/errors.hpp"

namespace vlp::harness {

namespace {

const char* kHeader = "x,y,z,roll,pitch,yaw,grid_i,grid_j,height,u1,v1,u2,v2,u3,v3,u4,v4,source,sample";
constexpr std::size_t kColumns = 19;

void put(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        cells.push_back(cell);
    }
    return cells;
}

double parse_number(const std::string& s, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw MalformedCsv("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
    }
}

int parse_index(const std::string& s, int line_no) {
    const double v = parse_number(s, line_no);
    if (v != std::floor(v)) throw MalformedCsv("line " + std::to_string(line_no) + ": '" + s + "' is not an integer");
    return static_cast<int>(v);
}

}  // namespace

std::string to_string(SourceTag tag) {
    return tag == SourceTag::CleanSim ? "clean-sim" : "noisy-sim";
}

SourceTag parse_source_tag(const std::string& text) {
    if (text == "clean-sim") return SourceTag::CleanSim;
    if (text == "noisy-sim") return SourceTag::NoisySim;
    throw MalformedCsv("unknown source tag '" + text + "'");
}

learn::TrainingSet Dataset::training_set() const {
    learn::TrainingSet ts;
    for (const auto& r : rows) ts.add(r.features, r.target);
    return ts;
}

Dataset Dataset::filter_heights(const std::vector<double>& heights) const {
    Dataset out;
    for (const auto& r : rows)
        for (double h : heights)
            if (std::abs(r.height_m - h) < 1e-9) {
                out.rows.push_back(r);
                break;
            }
    return out;
}

std::string dataset_to_csv(const Dataset& ds) {
    std::string out = kHeader;
    out += '\n';
    for (const auto& r : ds.rows) {
        const double lead[] = {r.target.x, r.target.y, r.target.z, r.attitude.roll(), r.attitude.pitch(),
                               r.attitude.yaw()};
        for (double v : lead) {
            put(out, v);
            out += ',';
        }
        out += std::to_string(r.grid_i) + ',' + std::to_string(r.grid_j) + ',';
        put(out, r.height_m);
        for (double f : r.features) {
            out += ',';
            put(out, f);
        }
        out += ',' + to_string(r.source) + ',' + std::to_string(r.sample) + '\n';
    }
    return out;
}

Dataset dataset_from_csv(const std::string& text) {
    Dataset ds;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::map<LocationKey, int> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line.rfind("x,y,z", 0) != 0) throw MalformedCsv("missing dataset header");
            continue;
        }
        const auto c = split_cells(line);
        if (c.size() != kColumns && c.size() != kColumns - 1)
            throw MalformedCsv("line " + std::to_string(line_no) + ": expected " + std::to_string(kColumns) +
                               " columns, got " + std::to_string(c.size()));
        DatasetRow r;
        r.target = {parse_number(c[0], line_no), parse_number(c[1], line_no), parse_number(c[2], line_no)};
        r.attitude = geom::Attitude(parse_number(c[3], line_no), parse_number(c[4], line_no),
                                    parse_number(c[5], line_no));
        r.grid_i = parse_index(c[6], line_no);
        r.grid_j = parse_index(c[7], line_no);
        r.height_m = parse_number(c[8], line_no);
        for (std::size_t k = 0; k < 8; ++k) r.features[k] = parse_number(c[9 + k], line_no);
        r.source = parse_source_tag(c[17]);
        int& next = seen[{r.height_m, r.grid_i, r.grid_j}];
        r.sample = c.size() == kColumns ? parse_index(c[18], line_no) : next;
        ++next;
        ds.rows.push_back(r);
    }
    return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << dataset_to_csv(ds);
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return dataset_from_csv(ss.str());
}

std::string features_to_csv(const std::vector<vision::FeatureVector>& rows) {
    std::string out = "u1,v1,u2,v2,u3,v3,u4,v4\n";
    for (const auto& f : rows) {
        for (std::size_t k = 0; k < 8; ++k) {
            if (k) out += ',';
            put(out, f[k]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace vlp::harness
