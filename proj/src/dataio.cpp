#include "sgmix/dataio.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "sgmix/error.hpp"
#include "sgmix/linalg.hpp"
#include "sgmix/random.hpp"

namespace sgmix {

namespace {

constexpr const char* kHeader = "ct,mask,mr1,mr2,mr3,mr4";

std::string location(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

double parse_field(const std::string& field, const std::filesystem::path& path,
                   std::size_t line) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && *end && std::isspace(static_cast<unsigned char>(*end))) ++end;
    if (end == begin || (end && *end != '\0')) {
        throw input_error(location(path, line) + ": malformed numeric field '" +
                          field + "'");
    }
    return v;
}

std::vector<std::string> split_csv(const std::string& row) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = row.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(row.substr(start));
            break;
        }
        out.push_back(row.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::string HuInterval::to_string() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%c%g, %g%c", lo_closed ? '[' : '(', lo, hi,
                  hi_closed ? ']' : ')');
    return buf;
}

Eigen::MatrixXd VoxelTable::joint() const {
    Eigen::MatrixXd out(ct.size(), 1 + kMrChannels);
    out.col(0) = ct;
    out.rightCols(kMrChannels) = mr;
    return out;
}

VoxelTable load_table(const std::filesystem::path& path, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) {
        throw input_error("cannot open '" + path.string() + "'");
    }
    std::string row;
    if (!std::getline(in, row)) {
        throw input_error(path.string() + ": empty file");
    }
    if (strip_cr(row) != kHeader) {
        throw input_error(path.string() + ": header must be exactly '" +
                          std::string(kHeader) + "'");
    }

    std::vector<double> ct;
    std::vector<std::array<double, kMrChannels>> mr;
    std::size_t line = 1;
    while (std::getline(in, row)) {
        ++line;
        row = strip_cr(row);
        if (row.empty()) continue;
        const std::vector<std::string> fields = split_csv(row);
        if (fields.size() != 2 + kMrChannels) {
            throw input_error(location(path, line) + ": expected 6 fields, got " +
                              std::to_string(fields.size()));
        }
        double c = parse_field(fields[0], path, line);
        const double mask = parse_field(fields[1], path, line);
        if (mask != 0.0 && mask != 1.0) {
            throw input_error(location(path, line) + ": mask must be 0 or 1");
        }
        std::array<double, kMrChannels> m{};
        for (int j = 0; j < kMrChannels; ++j) {
            m[j] = parse_field(fields[2 + j], path, line);
            if (!std::isfinite(m[j]) || m[j] < 0.0) {
                throw input_error(location(path, line) +
                                  ": MR intensity must be finite and non-negative");
            }
        }
        if (!std::isfinite(c)) {
            throw input_error(location(path, line) + ": CT value is not finite");
        }
        if (opts.check_ct_range && (c < kCtMin || c > kCtMax)) {
            if (opts.clamp) {
                c = std::min(std::max(c, kCtMin), kCtMax);
            } else {
                char buf[96];
                std::snprintf(buf, sizeof(buf),
                              ": CT value %g outside [%g, %g] (use clamp to force)",
                              c, kCtMin, kCtMax);
                throw input_error(location(path, line) + buf);
            }
        }
        if (mask == 0.0) continue;  // surrounding air is excluded here
        ct.push_back(c);
        mr.push_back(m);
    }

    VoxelTable t;
    t.patient_id = path.stem().string();
    const std::size_t n = ct.size();
    t.ct.resize(n);
    t.mask = Eigen::VectorXi::Ones(n);
    t.mr.resize(n, kMrChannels);
    for (std::size_t i = 0; i < n; ++i) {
        t.ct(i) = ct[i];
        for (int j = 0; j < kMrChannels; ++j) t.mr(i, j) = mr[i][j];
    }
    return t;
}

void save_table(const std::filesystem::path& path, const VoxelTable& t) {
    std::ofstream out(path);
    if (!out) {
        throw input_error("cannot write '" + path.string() + "'");
    }
    out << kHeader << "\n";
    char buf[256];
    for (std::size_t i = 0; i < t.rows(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g,1,%.10g,%.10g,%.10g,%.10g\n",
                      t.ct(i), t.mr(i, 0), t.mr(i, 1), t.mr(i, 2), t.mr(i, 3));
        out << buf;
    }
    if (!out) {
        throw input_error("failed while writing '" + path.string() + "'");
    }
}

VoxelTable extract_partition(const VoxelTable& t, const HuInterval& interval) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (interval.contains(t.ct(i))) keep.push_back(i);
    }
    VoxelTable out;
    out.patient_id = t.patient_id;
    out.ct.resize(keep.size());
    out.mask = Eigen::VectorXi::Ones(keep.size());
    out.mr.resize(keep.size(), kMrChannels);
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.ct(j) = t.ct(keep[j]);
        out.mr.row(j) = t.mr.row(keep[j]);
    }
    return out;
}

VoxelTable concat_tables(const std::vector<VoxelTable>& tables) {
    std::size_t n = 0;
    for (const VoxelTable& t : tables) n += t.rows();
    VoxelTable out;
    out.patient_id = "concat";
    out.ct.resize(n);
    out.mask = Eigen::VectorXi::Ones(n);
    out.mr.resize(n, kMrChannels);
    std::size_t at = 0;
    for (const VoxelTable& t : tables) {
        out.ct.segment(at, t.rows()) = t.ct;
        out.mr.middleRows(at, t.rows()) = t.mr;
        at += t.rows();
    }
    return out;
}

SynthResult synth_generate(const SynthSpec& s) {
    s.truth.validate();
    if (s.n < 1) {
        throw input_error("synthetic sample size must be >= 1");
    }
    if (s.truth.dim() != 1 + kMrChannels) {
        throw input_error("synthetic truth model must have dimension " +
                          std::to_string(1 + kMrChannels) +
                          " (CT plus MR channels)");
    }
    const int K = s.truth.num_components();
    const int d = s.truth.dim();

    struct Sampler {
        Eigen::VectorXd location, delta;
        Eigen::MatrixXd root, residual_root;
    };
    std::vector<Sampler> samplers(K);
    for (int k = 0; k < K; ++k) {
        const SkewNormalParams& p = s.truth.components[k];
        const CanonicalParams c = reparam_forward(p);
        samplers[k].location = p.location;
        samplers[k].delta = c.delta;
        samplers[k].root = SpdEigen(p.dispersion).sqrt();
        samplers[k].residual_root =
            SpdEigen(Eigen::MatrixXd::Identity(d, d) -
                     c.delta * c.delta.transpose())
                .sqrt();
    }

    RandomStream rng(s.seed);
    SynthResult out;
    out.labels.resize(s.n);
    out.table.patient_id = "synthetic";
    out.table.ct.resize(s.n);
    out.table.mask = Eigen::VectorXi::Ones(s.n);
    out.table.mr.resize(s.n, kMrChannels);
    Eigen::VectorXd v(d), y(d);
    for (std::size_t i = 0; i < s.n; ++i) {
        const int k = rng.categorical(s.truth.weights);
        out.labels[i] = k;
        const double u = std::abs(rng.normal());
        for (int j = 0; j < d; ++j) v(j) = rng.normal();
        y = samplers[k].location +
            samplers[k].root * (samplers[k].delta * u + samplers[k].residual_root * v);
        out.table.ct(i) = y(0);
        out.table.mr.row(i) = y.tail(kMrChannels).transpose();
    }
    return out;
}

void save_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) {
        throw input_error("cannot write '" + path.string() + "'");
    }
    out << "component\n";
    for (int k : labels) out << k << "\n";
}

std::vector<int> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw input_error("cannot open '" + path.string() + "'");
    }
    std::string row;
    if (!std::getline(in, row) || strip_cr(row) != "component") {
        throw input_error(path.string() + ": labels header must be 'component'");
    }
    std::vector<int> out;
    std::size_t line = 1;
    while (std::getline(in, row)) {
        ++line;
        row = strip_cr(row);
        if (row.empty()) continue;
        out.push_back(static_cast<int>(parse_field(row, path, line)));
    }
    return out;
}

MixtureModel example_truth_model(int K, int d, std::uint64_t seed, Variant variant) {
    if (K < 1 || d < 2) {
        throw input_error("example truth model needs K >= 1 and d >= 2");
    }
    RandomStream rng(seed ^ 0x9e3779b97f4a7c15ull);
    MixtureModel m;
    m.variant = variant;
    m.weights.resize(K);
    m.components.resize(K);
    double wsum = 0.0;
    for (int k = 0; k < K; ++k) {
        m.weights[k] = 1.0 + rng.uniform();
        wsum += m.weights[k];
    }
    for (double& w : m.weights) w /= wsum;

    for (int k = 0; k < K; ++k) {
        Eigen::VectorXd loc(d);
        // CT spread across the HU range, MR channels positive and separated.
        const double step = K > 1 ? static_cast<double>(k) / (K - 1) : 0.5;
        loc(0) = -500.0 + 1700.0 * step + rng.uniform(-40.0, 40.0);
        for (int j = 1; j < d; ++j) {
            loc(j) = 700.0 + 1800.0 * rng.uniform() + 150.0 * k;
        }

        // Correlation from a jittered identity keeps the matrix SPD.
        Eigen::MatrixXd b = Eigen::MatrixXd::Identity(d, d);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) {
                b(r, c) += 0.35 * rng.uniform(-1.0, 1.0);
            }
        }
        Eigen::MatrixXd s = b * b.transpose();
        Eigen::VectorXd sd(d);
        sd(0) = rng.uniform(70.0, 140.0);
        for (int j = 1; j < d; ++j) sd(j) = rng.uniform(35.0, 75.0);
        Eigen::MatrixXd sigma(d, d);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) {
                sigma(r, c) = s(r, c) / std::sqrt(s(r, r) * s(c, c)) * sd(r) * sd(c);
            }
        }

        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(d);
        if (variant == Variant::skew) {
            for (int j = 0; j < d; ++j) lambda(j) = rng.uniform(-1.0, 2.0);
        }
        m.components[k] = {loc, sigma, lambda};
    }
    return m;
}

}  // namespace sgmix
