#include "hrex/sampler.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <mutex>
#include <string>

#include "hrex/error.hpp"
#include "hrex/logging.hpp"
#include "hrex/rng.hpp"

namespace hrex {

// ---------------------------------------------------------------------------
// BlockCovariance

BlockCovariance::BlockCovariance(std::size_t n, std::size_t d, std::vector<Eigen::MatrixXd> lag_blocks)
    : n_(n), d_(d), blocks_(std::move(lag_blocks)) {
    require(n_ >= 1 && d_ >= 1, ErrorCode::InvalidArgument, "covariance needs n >= 1 and d >= 1");
    require(!blocks_.empty(), ErrorCode::InvalidArgument, "covariance needs at least the lag-0 block");
    if (blocks_.size() > n_) blocks_.resize(n_);
    for (const auto& b : blocks_) {
        require(b.rows() == static_cast<Eigen::Index>(d_) && b.cols() == static_cast<Eigen::Index>(d_),
                ErrorCode::DimensionMismatch, "lag blocks must be d x d");
    }
}

std::size_t BlockCovariance::bandwidth() const { return std::min(blocks_.size() * d_ - 1, size() - 1); }

double BlockCovariance::operator()(std::size_t row, std::size_t col) const {
    const std::size_t k = row / d_;
    const std::size_t l = col / d_;
    const std::size_t lag = k > l ? k - l : l - k;
    if (lag >= blocks_.size()) return 0.0;
    // Block (k, l) with k <= l is C(l - k); the lower triangle is its transpose.
    const std::size_t i = row % d_;
    const std::size_t j = col % d_;
    return k <= l ? blocks_[lag](i, j) : blocks_[lag](j, i);
}

Eigen::MatrixXd BlockCovariance::dense() const {
    const auto size_i = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd m(size_i, size_i);
    for (Eigen::Index r = 0; r < size_i; ++r)
        for (Eigen::Index c = 0; c < size_i; ++c) m(r, c) = (*this)(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    return m;
}

BlockCovariance assemble_covariance(const CorrelationModel& model, std::size_t n, std::optional<SampleSize> model_n) {
    require(n >= 1, ErrorCode::InvalidArgument, "path length must be >= 1");
    const SampleSize size = model_n.value_or(SampleSize::of(n));
    const std::size_t d = model.dim();
    std::size_t lags = n;
    if (model.max_lag()) lags = std::min<std::size_t>(lags, static_cast<std::size_t>(*model.max_lag()) + 1);
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(lags);
    for (std::size_t h = 0; h < lags; ++h) {
        Eigen::MatrixXd b(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i; j < d; ++j) {
                const double v = model.rho(i, j, h, size);
                b(i, j) = v;
                b(j, i) = v;
            }
        }
        blocks.push_back(std::move(b));
    }
    return BlockCovariance(n, d, std::move(blocks));
}

// ---------------------------------------------------------------------------
// Cholesky

CholeskyFactor::CholeskyFactor(std::size_t size, std::size_t bandwidth, std::vector<double> band, bool jittered,
                               double jitter)
    : size_(size), bandwidth_(bandwidth), band_(std::move(band)), jittered_(jittered), jitter_(jitter) {}

double CholeskyFactor::at(std::size_t row, std::size_t col) const {
    if (col > row || row - col > bandwidth_) return 0.0;
    return band_[row * (bandwidth_ + 1) + bandwidth_ - (row - col)];
}

void CholeskyFactor::multiply(std::span<const double> z, std::span<double> out) const {
    const std::size_t w = bandwidth_ + 1;
    for (std::size_t r = 0; r < size_; ++r) {
        const std::size_t first = r >= bandwidth_ ? r - bandwidth_ : 0;
        const double* row = band_.data() + r * w + (bandwidth_ - (r - first));
        double acc = 0.0;
        for (std::size_t c = first; c <= r; ++c) acc += row[c - first] * z[c];
        out[r] = acc;
    }
}

namespace {

// Dense problems above this bandwidth go through Eigen's blocked LLT.
constexpr std::size_t kDenseCutoff = 256;

std::optional<std::vector<double>> band_cholesky(const BlockCovariance& cov, std::size_t b, double shift) {
    const std::size_t size = cov.size();
    const std::size_t w = b + 1;
    std::vector<double> band(size * w, 0.0);
    auto at = [&](std::size_t r, std::size_t c) -> double& { return band[r * w + b - (r - c)]; };
    for (std::size_t r = 0; r < size; ++r) {
        const std::size_t lo = r >= b ? r - b : 0;
        for (std::size_t c = lo; c <= r; ++c) {
            double s = cov(r, c) + (r == c ? shift : 0.0);
            for (std::size_t k = lo; k < c; ++k) s -= at(r, k) * at(c, k);
            if (c == r) {
                if (!(s > 0.0)) return std::nullopt;
                at(r, r) = std::sqrt(s);
            } else {
                at(r, c) = s / at(c, c);
            }
        }
    }
    return band;
}

std::optional<std::vector<double>> dense_cholesky(const BlockCovariance& cov, double shift) {
    Eigen::MatrixXd a = cov.dense();
    a.diagonal().array() += shift;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Eigen::MatrixXd l = llt.matrixL();
    const std::size_t size = cov.size();
    const std::size_t b = size - 1;
    std::vector<double> band(size * size, 0.0);
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c <= r; ++c)
            band[r * size + b - (r - c)] = l(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return band;
}

}  // namespace

CholeskyFactor validate_psd(const BlockCovariance& cov, double jitter) {
    require(jitter >= 0.0, ErrorCode::InvalidArgument, "jitter must be nonnegative");
    const std::size_t size = cov.size();
    const std::size_t b = cov.bandwidth();
    require(size * (b + 1) <= kMaxBandStorage, ErrorCode::InvalidArgument,
            "covariance too large for the Cholesky sampler (n*d=" + std::to_string(size) + ", band " +
                std::to_string(b) + "); use the circulant sampler");
    const bool dense = b >= kDenseCutoff;
    auto attempt = [&](double shift) { return dense ? dense_cholesky(cov, shift) : band_cholesky(cov, b, shift); };
    if (auto band = attempt(0.0)) return CholeskyFactor(size, b, std::move(*band), false, 0.0);
    if (auto band = attempt(jitter)) return CholeskyFactor(size, b, std::move(*band), true, jitter);
    fail(ErrorCode::NotPositiveSemidefinite,
         "Cholesky factorization failed with and without jitter " + number(jitter) +
             "; the correlation model is not a valid covariance at this n");
}

// ---------------------------------------------------------------------------
// Samplers

std::vector<SamplePath> PathSampler::sample(std::uint64_t first, std::uint64_t count) const {
    std::vector<SamplePath> out;
    out.reserve(count);
    generate(first, count, [&](std::uint64_t r, std::span<const double> values) {
        out.push_back({path_length(), dim(), std::vector<double>(values.begin(), values.end()), provenance(r)});
    });
    return out;
}

CholeskySampler::CholeskySampler(std::shared_ptr<const CholeskyFactor> factor, std::size_t n, std::size_t d,
                                 std::uint64_t seed, std::uint64_t domain)
    : factor_(std::move(factor)), n_(n), d_(d), seed_(seed), domain_(domain) {
    require(factor_ && factor_->size() == n * d, ErrorCode::DimensionMismatch, "factor size must equal n * d");
}

void CholeskySampler::generate(std::uint64_t first, std::uint64_t count, const PathSink& sink) const {
    const std::size_t size = n_ * d_;
    std::vector<double> z(size);
    std::vector<double> x(size);
    for (std::uint64_t r = first; r < first + count; ++r) {
        Stream stream(seed_, domain_, r);
        for (auto& v : z) v = stream.normal();
        factor_->multiply(z, x);
        sink(r, x);
    }
}

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftwBuffer fftw_buffer(std::size_t m) {
    auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * m));
    if (p == nullptr) throw std::bad_alloc();
    return FftwBuffer(p);
}

struct PlanHandle {
    fftw_plan plan = nullptr;
    PlanHandle(std::size_t m, int sign) {
        auto in = fftw_buffer(m);
        auto out = fftw_buffer(m);
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(m), in.get(), out.get(), sign, FFTW_ESTIMATE);
        if (plan == nullptr) fail(ErrorCode::InvalidArgument, "FFTW planning failed");
    }
    ~PlanHandle() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    PlanHandle(const PlanHandle&) = delete;
    PlanHandle& operator=(const PlanHandle&) = delete;
};

std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v) p <<= 1;
    return p;
}

}  // namespace

struct CirculantSampler::Plan {
    explicit Plan(std::size_t m) : backward(m, FFTW_BACKWARD) {}
    PlanHandle backward;
};

CirculantSampler::CirculantSampler(const CorrelationModel& model, std::size_t n, SampleSize model_n,
                                   std::uint64_t seed, std::uint64_t domain, int max_doublings)
    : n_(n), d_(model.dim()), seed_(seed), domain_(domain) {
    require(n_ >= 1, ErrorCode::InvalidArgument, "path length must be >= 1");
    const std::size_t base = next_pow2(std::max<std::size_t>(1, 2 * (n_ - 1)));
    const std::size_t d = d_;

    for (int attempt = 0; attempt <= max_doublings; ++attempt) {
        const std::size_t m = base << attempt;
        const std::size_t half = m / 2;

        // Lag blocks C(0..M/2); the embedding reflects them around M/2.
        std::vector<Eigen::MatrixXd> blocks(half + 1, Eigen::MatrixXd::Zero(d, d));
        for (std::size_t h = 0; h <= half; ++h) {
            if (model.max_lag() && h > *model.max_lag()) break;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = i; j < d; ++j) blocks[h](i, j) = blocks[h](j, i) = model.rho(i, j, h, model_n);
        }

        // Spectrum of every entry sequence; real because each is symmetric in k <-> M-k.
        std::vector<double> spectrum(m * d * d);
        {
            PlanHandle forward(m, FFTW_FORWARD);
            auto in = fftw_buffer(m);
            auto out = fftw_buffer(m);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = i; j < d; ++j) {
                    for (std::size_t k = 0; k < m; ++k) {
                        in[k][0] = blocks[std::min(k, m - k)](i, j);
                        in[k][1] = 0.0;
                    }
                    fftw_execute_dft(forward.plan, in.get(), out.get());
                    for (std::size_t f = 0; f < m; ++f) {
                        spectrum[f * d * d + i * d + j] = out[f][0];
                        spectrum[f * d * d + j * d + i] = out[f][0];
                    }
                }
            }
        }

        double scale = 0.0;
        for (std::size_t f = 0; f < m; ++f)
            for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, std::fabs(spectrum[f * d * d + i * d + i]));
        const double tolerance = 1e-9 * std::max(1.0, scale);

        std::vector<double> factors(m * d * d);
        bool psd = true;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        for (std::size_t f = 0; f < m && psd; ++f) {
            Eigen::Map<const Eigen::MatrixXd> lambda(spectrum.data() + f * d * d, d, d);
            solver.compute(lambda);
            const Eigen::VectorXd ev = solver.eigenvalues();
            if (ev.minCoeff() < -tolerance) {
                psd = false;
                break;
            }
            const Eigen::MatrixXd a = solver.eigenvectors() *
                                      ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() / std::sqrt(static_cast<double>(m));
            std::copy(a.data(), a.data() + d * d, factors.begin() + static_cast<std::ptrdiff_t>(f * d * d));
        }
        if (psd) {
            m_ = m;
            factors_ = std::move(factors);
            plan_ = std::make_unique<Plan>(m);
            return;
        }
    }
    fail(ErrorCode::EmbeddingNotPSD, "circulant embedding spectrum is not PSD up to size " +
                                         std::to_string(base << max_doublings) + " for model '" + model.name() + "'");
}

CirculantSampler::~CirculantSampler() = default;

void CirculantSampler::generate(std::uint64_t first, std::uint64_t count, const PathSink& sink) const {
    if (count == 0) return;
    const std::size_t m = m_;
    const std::size_t d = d_;
    std::vector<FftwBuffer> spectral;
    std::vector<FftwBuffer> temporal;
    for (std::size_t i = 0; i < d; ++i) {
        spectral.push_back(fftw_buffer(m));
        temporal.push_back(fftw_buffer(m));
    }
    std::vector<double> xi_re(d), xi_im(d);
    std::vector<double> real_path(n_ * d), imag_path(n_ * d);

    const std::uint64_t last = first + count - 1;
    for (std::uint64_t pair = first / 2; pair <= last / 2; ++pair) {
        Stream stream(seed_, domain_, pair);
        for (std::size_t f = 0; f < m; ++f) {
            for (std::size_t j = 0; j < d; ++j) {
                xi_re[j] = stream.normal();
                xi_im[j] = stream.normal();
            }
            const double* a = factors_.data() + f * d * d;  // column-major
            for (std::size_t i = 0; i < d; ++i) {
                double re = 0.0, im = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    re += a[j * d + i] * xi_re[j];
                    im += a[j * d + i] * xi_im[j];
                }
                spectral[i][f][0] = re;
                spectral[i][f][1] = im;
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            fftw_execute_dft(plan_->backward.plan, spectral[i].get(), temporal[i].get());
            for (std::size_t t = 0; t < n_; ++t) {
                real_path[t * d + i] = temporal[i][t][0];
                imag_path[t * d + i] = temporal[i][t][1];
            }
        }
        if (2 * pair >= first) sink(2 * pair, real_path);
        if (2 * pair + 1 <= last) sink(2 * pair + 1, imag_path);
    }
}

std::unique_ptr<PathSampler> make_sampler(const CorrelationModel& model, std::size_t n, SamplerKind kind,
                                          std::uint64_t seed, std::uint64_t domain, const CirculantOptions& options) {
    const SampleSize size = SampleSize::of(n);
    if (kind == SamplerKind::Circulant) {
        try {
            return std::make_unique<CirculantSampler>(model, n, size, seed, domain, options.max_doublings);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmbeddingNotPSD || !options.allow_fallback) throw;
            log_warning(std::string(e.what()) + "; falling back to the Cholesky sampler");
        }
    }
    auto factor = std::make_shared<const CholeskyFactor>(validate_psd(assemble_covariance(model, n, size), options.jitter));
    return std::make_unique<CholeskySampler>(std::move(factor), n, model.dim(), seed, domain);
}

std::vector<SamplePath> cholesky_sample(const BlockCovariance& cov, std::uint64_t seed, std::uint64_t count) {
    auto factor = std::make_shared<const CholeskyFactor>(validate_psd(cov));
    CholeskySampler sampler(std::move(factor), cov.path_length(), cov.dim(), seed, domains::cholesky_path);
    return sampler.sample(0, count);
}

std::vector<SamplePath> circulant_sample(const CorrelationModel& model, std::size_t n, std::uint64_t seed,
                                         std::uint64_t count, const CirculantOptions& options) {
    return make_sampler(model, n, SamplerKind::Circulant, seed, domains::circulant_path, options)->sample(0, count);
}

std::vector<double> componentwise_maxima(std::span<const double> path, std::size_t d) {
    require(d >= 1 && !path.empty() && path.size() % d == 0, ErrorCode::DimensionMismatch,
            "path must hold n >= 1 rows of d values");
    std::vector<double> maxima(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(d));
    for (std::size_t offset = d; offset < path.size(); offset += d)
        for (std::size_t i = 0; i < d; ++i) maxima[i] = std::max(maxima[i], path[offset + i]);
    return maxima;
}

// ---------------------------------------------------------------------------
// Path dump

namespace {

constexpr char kMagic[8] = {'H', 'R', 'E', 'X', 'P', 'A', 'T', 'H'};

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(v >> (8 * b));
    os.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char bytes[8];
    is.read(reinterpret_cast<char*>(bytes), 8);
    require(static_cast<bool>(is), ErrorCode::Io, "truncated path file");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    return v;
}

}  // namespace

void write_path(const SamplePath& path, const std::filesystem::path& file) {
    require(path.values.size() == path.n * path.d, ErrorCode::DimensionMismatch, "path values must be n * d");
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + file.string() + " for writing");
    os.write(kMagic, sizeof kMagic);
    put_u64(os, path.n);
    put_u64(os, path.d);
    for (double v : path.values) put_u64(os, std::bit_cast<std::uint64_t>(v));
    require(static_cast<bool>(os), ErrorCode::Io, "write failed for " + file.string());
}

SamplePath read_path(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + file.string());
    char magic[8];
    is.read(magic, sizeof magic);
    require(static_cast<bool>(is) && std::memcmp(magic, kMagic, sizeof kMagic) == 0, ErrorCode::Parse,
            file.string() + " is not an HREXPATH file");
    SamplePath path;
    path.n = get_u64(is);
    path.d = get_u64(is);
    path.values.resize(path.n * path.d);
    for (auto& v : path.values) v = std::bit_cast<double>(get_u64(is));
    return path;
}

}  // namespace hrex
