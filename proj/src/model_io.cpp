#include "sgmix/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sgmix/error.hpp"

namespace sgmix {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class TokenReader {
public:
    TokenReader(std::istream& in, std::string path)
        : in_(in), path_(std::move(path)) {}

    std::string word() {
        std::string t;
        if (!(in_ >> t)) {
            throw input_error(path_ + ": truncated model file");
        }
        return t;
    }

    void expect(const std::string& want) {
        const std::string got = word();
        if (got != want) {
            throw input_error(path_ + ": expected '" + want + "', found '" + got +
                              "'");
        }
    }

    double number() {
        const std::string t = word();
        const char* begin = t.c_str();
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin || *end != '\0') {
            throw input_error(path_ + ": expected a number, found '" + t + "'");
        }
        return v;
    }

    long integer() { return static_cast<long>(number()); }

private:
    std::istream& in_;
    std::string path_;
};

void write_interval(std::ostream& out, const char* name, const HuInterval& iv) {
    out << name << ' ' << fmt(iv.lo) << ' ' << fmt(iv.hi) << ' '
        << (iv.lo_closed ? "closed" : "open") << ' '
        << (iv.hi_closed ? "closed" : "open") << '\n';
}

HuInterval read_interval(TokenReader& r, const std::string& name) {
    r.expect(name);
    HuInterval iv;
    iv.lo = r.number();
    iv.hi = r.number();
    iv.lo_closed = r.word() == "closed";
    iv.hi_closed = r.word() == "closed";
    return iv;
}

void write_mixture(std::ostream& out, const char* role, const StoredMixture& sm) {
    const MixtureModel& m = sm.model;
    const int K = m.num_components();
    const int d = m.dim();
    out << "model " << role << '\n';
    out << "variant " << to_string(m.variant) << '\n';
    out << "K " << K << '\n';
    out << "d " << d << '\n';
    out << "seed " << sm.meta.seed << '\n';
    out << "iterations " << sm.meta.iterations << '\n';
    out << "final_delta " << fmt(sm.meta.final_delta) << '\n';
    out << "converged " << (sm.meta.converged ? 1 : 0) << '\n';
    out << "restart " << sm.meta.restart << '\n';
    out << "weights";
    for (double w : m.weights) out << ' ' << fmt(w);
    out << '\n';
    for (int k = 0; k < K; ++k) {
        const SkewNormalParams& p = m.components[k];
        out << "component " << k << '\n';
        out << "location";
        for (int j = 0; j < d; ++j) out << ' ' << fmt(p.location(j));
        out << '\n';
        out << "skewness";
        for (int j = 0; j < d; ++j) out << ' ' << fmt(p.skewness(j));
        out << '\n';
        out << "dispersion\n";
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) {
                out << (c ? " " : "") << fmt(p.dispersion(r, c));
            }
            out << '\n';
        }
    }
    out << "end\n";
}

StoredMixture read_mixture(TokenReader& r, const std::string& role) {
    r.expect("model");
    r.expect(role);
    StoredMixture sm;
    r.expect("variant");
    sm.model.variant = variant_from_string(r.word());
    r.expect("K");
    const int K = static_cast<int>(r.integer());
    r.expect("d");
    const int d = static_cast<int>(r.integer());
    if (K < 1 || d < 1) {
        throw input_error("model file declares invalid K or d");
    }
    r.expect("seed");
    sm.meta.seed = static_cast<std::uint64_t>(r.number());
    r.expect("iterations");
    sm.meta.iterations = static_cast<int>(r.integer());
    r.expect("final_delta");
    sm.meta.final_delta = r.number();
    r.expect("converged");
    sm.meta.converged = r.integer() != 0;
    r.expect("restart");
    sm.meta.restart = static_cast<int>(r.integer());
    r.expect("weights");
    sm.model.weights.resize(K);
    for (int k = 0; k < K; ++k) sm.model.weights[k] = r.number();
    sm.model.components.resize(K);
    for (int k = 0; k < K; ++k) {
        r.expect("component");
        if (r.integer() != k) {
            throw input_error("model file components out of order");
        }
        SkewNormalParams& p = sm.model.components[k];
        p.location.resize(d);
        p.skewness.resize(d);
        p.dispersion.resize(d, d);
        r.expect("location");
        for (int j = 0; j < d; ++j) p.location(j) = r.number();
        r.expect("skewness");
        for (int j = 0; j < d; ++j) p.skewness(j) = r.number();
        r.expect("dispersion");
        for (int row = 0; row < d; ++row) {
            for (int col = 0; col < d; ++col) p.dispersion(row, col) = r.number();
        }
    }
    r.expect("end");
    sm.model.validate();
    return sm;
}

}  // namespace

FitMeta FitMeta::from_trace(const FitTrace& t, std::uint64_t seed) {
    FitMeta m;
    m.seed = seed;
    m.iterations = static_cast<int>(t.entries.size());
    m.final_delta = t.final_delta();
    m.converged = t.converged;
    m.restart = t.restart_index;
    return m;
}

PartitionedModel ModelFile::to_partitioned() const {
    if (!partitioned) {
        throw input_error("model file holds a single mixture, not a partitioned model");
    }
    PartitionedModel pm;
    pm.full = primary.model;
    pm.nonbone = nonbone.model;
    pm.bone = bone.model;
    pm.spec = spec;
    return pm;
}

void save_model_file(const std::filesystem::path& path, const ModelFile& mf) {
    std::ostringstream out;
    out << "sgmix-model " << kModelFormatVersion << '\n';
    out << "kind " << (mf.partitioned ? "partitioned" : "mixture") << '\n';
    if (mf.partitioned) {
        write_interval(out, "train_nonbone", mf.spec.train_nonbone);
        write_interval(out, "train_bone", mf.spec.train_bone);
        out << "threshold " << fmt(mf.spec.predict_threshold) << '\n';
        write_mixture(out, "full", mf.primary);
        write_mixture(out, "nonbone", mf.nonbone);
        write_mixture(out, "bone", mf.bone);
    } else {
        write_mixture(out, "single", mf.primary);
    }
    std::ofstream f(path);
    if (!f) {
        throw input_error("cannot write '" + path.string() + "'");
    }
    f << out.str();
    if (!f) {
        throw input_error("failed while writing '" + path.string() + "'");
    }
}

ModelFile load_model_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw input_error("cannot open '" + path.string() + "'");
    }
    TokenReader r(f, path.string());
    r.expect("sgmix-model");
    const long version = r.integer();
    if (version > kModelFormatVersion) {
        throw input_error(path.string() + ": format version " +
                          std::to_string(version) +
                          " is newer than this build supports (" +
                          std::to_string(kModelFormatVersion) + ")");
    }
    if (version < 1) {
        throw input_error(path.string() + ": invalid format version");
    }
    ModelFile mf;
    r.expect("kind");
    const std::string kind = r.word();
    if (kind == "partitioned") {
        mf.partitioned = true;
        mf.spec.train_nonbone = read_interval(r, "train_nonbone");
        mf.spec.train_bone = read_interval(r, "train_bone");
        r.expect("threshold");
        mf.spec.predict_threshold = r.number();
        mf.spec.validate();
        mf.primary = read_mixture(r, "full");
        mf.nonbone = read_mixture(r, "nonbone");
        mf.bone = read_mixture(r, "bone");
    } else if (kind == "mixture") {
        mf.partitioned = false;
        mf.primary = read_mixture(r, "single");
    } else {
        throw input_error(path.string() + ": unknown model kind '" + kind + "'");
    }
    return mf;
}

}  // namespace sgmix
