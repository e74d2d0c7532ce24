#include "clasp/shape_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace clasp {

namespace {

// Smoothing of |d| so the decoder stays C1 when a voxel center meets a box center.
constexpr double kAbsSmoothing = 1e-2;

// Faces seen in a view are known to within a voxel.
constexpr double kFaceStddevFloor = 0.25;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void requireLength(const DecoderSpec &spec, const LatentShape &latent) {
    if (latent.size() != spec.latentSize()) {
        throw ShapeModelError("latent length " + std::to_string(latent.size()) + " does not match decoder (" +
                              std::to_string(spec.latentSize()) + ")");
    }
}

constexpr char kAffineMagic[4] = {'C', 'A', 'F', 'D'};

template <typename T>
void writeLe(std::ostream &out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T>
T readLe(std::istream &in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char *>(bytes), sizeof(T))) throw ShapeModelError("truncated decoder file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

LatentPrior::LatentPrior(std::vector<double> m, std::vector<double> s, std::vector<int> a)
    : mean(std::move(m)), stddev(std::move(s)), anchor(std::move(a)) {
    if (mean.size() != stddev.size()) throw ShapeModelError("prior mean/stddev length mismatch");
    if (!anchor.empty() && anchor.size() != mean.size()) throw ShapeModelError("prior anchor length mismatch");
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        if (anchor[i] < -1 || anchor[i] > 1) throw ShapeModelError("prior anchor must be -1, 0 or 1");
        if (anchor[i] != 0 && (i % kParamsPerBox >= 3 || i + 3 >= mean.size())) {
            throw ShapeModelError("only box center coordinates can be anchored");
        }
    }
    for (auto &v : stddev) {
        if (!std::isfinite(v)) throw ShapeModelError("non-finite prior stddev");
        v = std::max(v, kStddevFloor);
    }
}

std::vector<double> LatentPrior::toAnchored(const std::vector<double> &x) const {
    std::vector<double> u = x;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        if (anchor[i] != 0) u[i] += anchor[i] * std::exp(x[i + 3]);
    }
    return u;
}

std::vector<double> LatentPrior::fromAnchored(const std::vector<double> &u) const {
    std::vector<double> x = u;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        if (anchor[i] != 0) x[i] -= anchor[i] * std::exp(u[i + 3]);
    }
    return x;
}

LatentShape LatentPrior::mode() const { return LatentShape{fromAnchored(mean)}; }

LatentShape sampleLatent(const LatentPrior &prior, Rng &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> u(prior.size());
    for (std::size_t i = 0; i < prior.size(); ++i) u[i] = prior.mean[i] + prior.stddev[i] * normal(rng);
    return LatentShape{prior.fromAnchored(u)};
}

double logProb(const LatentPrior &prior, const LatentShape &latent) {
    if (latent.size() != prior.size()) throw ShapeModelError("latent length does not match prior");
    const auto u = prior.toAnchored(latent.params);
    const double log_sqrt_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double lp = 0.0;
    for (std::size_t i = 0; i < prior.size(); ++i) {
        const double z = (u[i] - prior.mean[i]) / prior.stddev[i];
        lp += -0.5 * z * z - std::log(prior.stddev[i]) - log_sqrt_2pi;
    }
    return lp;
}

std::vector<double> logProbGradient(const LatentPrior &prior, const LatentShape &latent) {
    if (latent.size() != prior.size()) throw ShapeModelError("latent length does not match prior");
    const auto u = prior.toAnchored(latent.params);
    std::vector<double> g(prior.size());
    for (std::size_t i = 0; i < prior.size(); ++i) g[i] = -(u[i] - prior.mean[i]) / (prior.stddev[i] * prior.stddev[i]);
    for (std::size_t i = 0; i < prior.anchor.size(); ++i) {
        if (prior.anchor[i] != 0) g[i + 3] += g[i] * prior.anchor[i] * std::exp(latent.params[i + 3]);
    }
    return g;
}

DecoderSpec DecoderSpec::softBox(Index3 dims, int boxes, double sharpness) {
    if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) throw ShapeModelError("decoder dims must be positive");
    if (boxes < 1) throw ShapeModelError("soft-box decoder needs at least one box");
    if (!(sharpness > 0.0)) throw ShapeModelError("sharpness must be positive");
    DecoderSpec spec;
    spec.kind_ = Kind::SoftBox;
    spec.dims_ = dims;
    spec.boxes_ = boxes;
    spec.sharpness_ = sharpness;
    spec.latent_size_ = static_cast<std::size_t>(boxes) * kParamsPerBox;
    return spec;
}

DecoderSpec DecoderSpec::withSharpness(double sharpness) const {
    if (kind_ != Kind::SoftBox) throw ShapeModelError("only soft-box decoders have a sharpness");
    if (!(sharpness > 0.0)) throw ShapeModelError("sharpness must be positive");
    DecoderSpec out = *this;
    out.sharpness_ = sharpness;
    return out;
}

DecoderSpec DecoderSpec::affine(Index3 dims, int latent_size, std::vector<double> weights, std::vector<double> bias) {
    if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) throw ShapeModelError("decoder dims must be positive");
    if (latent_size < 1) throw ShapeModelError("affine decoder needs a positive latent size");
    DecoderSpec spec;
    spec.kind_ = Kind::Affine;
    spec.dims_ = dims;
    spec.latent_size_ = static_cast<std::size_t>(latent_size);
    if (weights.size() != spec.voxelCount() * spec.latent_size_ || bias.size() != spec.voxelCount()) {
        throw ShapeModelError("affine decoder weight shape mismatch");
    }
    spec.weights_ = std::move(weights);
    spec.bias_ = std::move(bias);
    return spec;
}

std::vector<double> DecoderSpec::latentScale() const {
    if (kind_ == Kind::Affine) return std::vector<double>(latent_size_, 1.0);
    ShapeClass cls;
    cls.aux.resize(boxes_ - 1);
    return uninformedPrior(dims_, cls).stddev;
}

DecoderSpec::Evaluation DecoderSpec::prepare(const LatentShape &latent) const {
    requireLength(*this, latent);
    Evaluation ev;
    ev.spec_ = this;
    ev.latent_ = &latent;
    if (kind_ != Kind::SoftBox) return ev;
    const std::size_t tables = static_cast<std::size_t>(boxes_) * 3;
    ev.g_.resize(tables);
    ev.dgdc_.resize(tables);
    ev.dgds_.resize(tables);
    const double k = sharpness_;
    for (int b = 0; b < boxes_; ++b) {
        for (int a = 0; a < 3; ++a) {
            const double c = latent.params[b * kParamsPerBox + a];
            const double e = std::exp(latent.params[b * kParamsPerBox + 3 + a]);
            const std::size_t t = static_cast<std::size_t>(b) * 3 + a;
            const int n = dims_[a];
            ev.g_[t].resize(n);
            ev.dgdc_[t].resize(n);
            ev.dgds_[t].resize(n);
            for (int i = 0; i < n; ++i) {
                const double d = (i + 0.5) - c;
                const double r = std::sqrt(d * d + kAbsSmoothing * kAbsSmoothing);
                const double g = sigmoid(k * (e - r));
                const double dg = g * (1.0 - g) * k;
                ev.g_[t][i] = g;
                ev.dgdc_[t][i] = dg * d / r;
                ev.dgds_[t][i] = dg * e;
            }
        }
    }
    return ev;
}

double DecoderSpec::Evaluation::value(std::size_t flat) const {
    const auto &spec = *spec_;
    if (spec.kind_ == Kind::Affine) {
        const std::size_t L = spec.latent_size_;
        const double *row = spec.weights_.data() + flat * L;
        double acc = spec.bias_[flat];
        for (std::size_t j = 0; j < L; ++j) acc += row[j] * latent_->params[j];
        return sigmoid(acc);
    }
    const auto nx = static_cast<std::size_t>(spec.dims_[0]);
    const auto ny = static_cast<std::size_t>(spec.dims_[1]);
    const std::size_t x = flat % nx, y = (flat / nx) % ny, z = flat / (nx * ny);
    if (spec.boxes_ == 1) return g_[0][x] * g_[1][y] * g_[2][z];
    double empty = 1.0;
    for (int b = 0; b < spec.boxes_; ++b) {
        const std::size_t t = static_cast<std::size_t>(b) * 3;
        empty *= 1.0 - g_[t][x] * g_[t + 1][y] * g_[t + 2][z];
    }
    return 1.0 - empty;
}

void DecoderSpec::Evaluation::addGradient(std::size_t flat, double upstream, std::span<double> grad) const {
    const auto &spec = *spec_;
    if (spec.kind_ == Kind::Affine) {
        const double w = value(flat);
        const double s = upstream * w * (1.0 - w);
        const std::size_t L = spec.latent_size_;
        const double *row = spec.weights_.data() + flat * L;
        for (std::size_t j = 0; j < L; ++j) grad[j] += s * row[j];
        return;
    }
    const auto nx = static_cast<std::size_t>(spec.dims_[0]);
    const auto ny = static_cast<std::size_t>(spec.dims_[1]);
    const std::size_t idx[3] = {flat % nx, (flat / nx) % ny, flat / (nx * ny)};
    const int K = spec.boxes_;
    for (int b = 0; b < K; ++b) {
        double others = 1.0;
        for (int o = 0; o < K; ++o) {
            if (o == b) continue;
            const std::size_t t = static_cast<std::size_t>(o) * 3;
            others *= 1.0 - g_[t][idx[0]] * g_[t + 1][idx[1]] * g_[t + 2][idx[2]];
        }
        const double ub = upstream * others;
        if (ub == 0.0) continue;
        const std::size_t t = static_cast<std::size_t>(b) * 3;
        const double gv[3] = {g_[t][idx[0]], g_[t + 1][idx[1]], g_[t + 2][idx[2]]};
        for (int a = 0; a < 3; ++a) {
            const double rest = gv[(a + 1) % 3] * gv[(a + 2) % 3];
            grad[b * kParamsPerBox + a] += ub * dgdc_[t + a][idx[a]] * rest;
            grad[b * kParamsPerBox + 3 + a] += ub * dgds_[t + a][idx[a]] * rest;
        }
    }
}

VoxelGrid DecoderSpec::decode(const LatentShape &latent, double voxel_size, Vec3 origin) const {
    const Evaluation ev = prepare(latent);
    VoxelGrid grid(dims_, voxel_size, origin);
    for (std::size_t i = 0; i < grid.size(); ++i) grid.setFlat(i, std::clamp(ev.value(i), 0.0, 1.0));
    return grid;
}

LatentShape boxLatent(const std::vector<std::pair<Vec3, Vec3>> &boxes) {
    LatentShape out;
    for (const auto &[center, half] : boxes) {
        for (int a = 0; a < 3; ++a) out.params.push_back(center[a]);
        for (int a = 0; a < 3; ++a) {
            if (!(half[a] > 0.0)) throw ShapeModelError("half extent must be positive");
            out.params.push_back(std::log(half[a]));
        }
    }
    return out;
}

LatentShape boxLatent(const Box &box) {
    return boxLatent({{box.center, {0.5 * box.extents[0], 0.5 * box.extents[1], 0.5 * box.extents[2]}}});
}

void saveAffineDecoder(const DecoderSpec &spec, const std::string &path) {
    if (spec.kind() != DecoderSpec::Kind::Affine) throw ShapeModelError("only affine decoders have weight files");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ShapeModelError("cannot open " + path + " for writing");
    out.write(kAffineMagic, 4);
    for (int d : spec.dims()) writeLe<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    writeLe<std::uint32_t>(out, static_cast<std::uint32_t>(spec.latentSize()));
    for (double w : spec.weights()) writeLe<float>(out, static_cast<float>(w));
    for (double b : spec.bias()) writeLe<float>(out, static_cast<float>(b));
    if (!out) throw ShapeModelError("failed writing " + path);
}

DecoderSpec loadAffineDecoder(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ShapeModelError("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kAffineMagic, 4) != 0) {
        throw ShapeModelError("not an affine decoder file (bad magic)");
    }
    Index3 dims{};
    for (auto &d : dims) {
        const auto v = readLe<std::uint32_t>(in);
        if (v == 0 || v > 4096) throw ShapeModelError("invalid decoder dims");
        d = static_cast<int>(v);
    }
    const auto latent = readLe<std::uint32_t>(in);
    if (latent == 0 || latent > (1u << 20)) throw ShapeModelError("invalid latent size");
    const std::size_t voxels = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<double> weights(voxels * latent), bias(voxels);
    for (auto &w : weights) w = readLe<float>(in);
    for (auto &b : bias) b = readLe<float>(in);
    return DecoderSpec::affine(dims, static_cast<int>(latent), std::move(weights), std::move(bias));
}

BoxFaceBounds viewFaceBounds(const DepthView &view) {
    const auto &occ = view.known_occupied;
    const auto &free = view.known_free;
    if (occ.dims() != free.dims()) throw DimensionMismatch("view grids differ in size");
    const auto indices = occ.occupiedIndices();
    if (indices.empty()) throw ShapeModelError("view has no occupied voxels");
    Index3 lo = occ.coord(indices.front()), hi = lo;
    for (auto flat : indices) {
        const Index3 c = occ.coord(flat);
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    }
    // Does the slice at coordinate t of axis a, restricted to the observed
    // bounding box on the other axes, contain known free space?
    auto sliceHasFree = [&](int a, int t) {
        const int b = (a + 1) % 3, c = (a + 2) % 3;
        Index3 v{};
        v[a] = t;
        for (int i = lo[b]; i <= hi[b]; ++i) {
            for (int j = lo[c]; j <= hi[c]; ++j) {
                v[b] = i;
                v[c] = j;
                if (free.occupied(v)) return true;
            }
        }
        return false;
    };
    BoxFaceBounds bounds;
    const Index3 &dims = occ.dims();
    for (int a = 0; a < 3; ++a) {
        int lower_limit = 0;
        for (int t = lo[a] - 1; t >= 0; --t) {
            if (sliceHasFree(a, t)) {
                lower_limit = t + 1;
                break;
            }
        }
        int upper_limit = dims[a];
        for (int t = hi[a] + 1; t < dims[a]; ++t) {
            if (sliceHasFree(a, t)) {
                upper_limit = t;
                break;
            }
        }
        bounds.lower[a] = {double(lower_limit), double(lo[a])};
        bounds.upper[a] = {double(hi[a] + 1), double(upper_limit)};
    }
    if (view.depth_noise_voxels > 0.0) {
        const double slack = 2.0 * view.depth_noise_voxels;
        const double n = dims[0];
        auto widen = [&](FaceInterval &f) {
            f.lo = std::clamp(f.lo - slack, 0.0, n);
            f.hi = std::clamp(f.hi + slack, 0.0, n);
        };
        widen(bounds.lower[0]);
        widen(bounds.upper[0]);
    }
    return bounds;
}

LatentPrior uninformedPrior(Index3 dims, const ShapeClass &shape_class) {
    std::vector<double> mean, stddev;
    for (int b = 0; b < shape_class.boxes(); ++b) {
        for (int a = 0; a < 3; ++a) {
            mean.push_back(0.5 * dims[a]);
            stddev.push_back(0.25 * dims[a]);
        }
        for (int a = 0; a < 3; ++a) {
            // half extent ranges over [0.5, n/2]
            const double log_lo = std::log(0.5), log_hi = std::log(0.5 * dims[a]);
            mean.push_back(0.5 * (log_lo + log_hi));
            stddev.push_back(0.25 * (log_hi - log_lo));
        }
    }
    return LatentPrior(std::move(mean), std::move(stddev));
}

LatentPrior priorFromView(const DepthView &view, const ShapeClass &shape_class) {
    if (view.known_occupied.occupiedCount() == 0) return uninformedPrior(view.known_occupied.dims(), shape_class);
    const BoxFaceBounds bounds = viewFaceBounds(view);
    std::vector<double> mean(6), stddev(6);
    std::vector<int> anchor(6, 0);
    for (int a = 0; a < 3; ++a) {
        const FaceInterval &lo = bounds.lower[a];
        const FaceInterval &hi = bounds.upper[a];
        const double e_mid = std::max(0.5, 0.5 * (hi.mid() - lo.mid()));
        if (std::abs(lo.width() - hi.width()) <= 1.0) {
            mean[a] = 0.5 * (lo.mid() + hi.mid());
            stddev[a] = 0.25 * 0.5 * (lo.width() + hi.width());
        } else {
            // the better observed face carries the position, the extent reaches the other one
            const bool lower = lo.width() < hi.width();
            const FaceInterval &pinned = lower ? lo : hi;
            anchor[a] = lower ? -1 : 1;
            mean[a] = pinned.mid();
            stddev[a] = 0.25 * pinned.width();
        }
        // e = (upper - lower) / 2 with face stddevs width / 4, carried to log e to first order
        mean[3 + a] = std::log(e_mid);
        stddev[3 + a] = std::hypot(lo.width(), hi.width()) / (8.0 * e_mid);
        stddev[a] = std::max(stddev[a], kFaceStddevFloor);
        stddev[3 + a] = std::max(stddev[3 + a], kFaceStddevFloor / e_mid);
    }
    Vec3 main_center{};
    for (int a = 0; a < 3; ++a) main_center[a] = mean[a] - anchor[a] * std::exp(mean[3 + a]);
    for (const auto &aux : shape_class.aux) {
        for (int a = 0; a < 3; ++a) {
            mean.push_back(main_center[a] + aux.center_offset[a]);
            stddev.push_back(aux.center_stddev[a]);
        }
        for (int a = 0; a < 3; ++a) {
            mean.push_back(std::log(aux.half_extent[a]));
            stddev.push_back(aux.log_extent_stddev[a]);
        }
        anchor.insert(anchor.end(), 6, 0);
    }
    return LatentPrior(std::move(mean), std::move(stddev), std::move(anchor));
}

}  // namespace clasp
