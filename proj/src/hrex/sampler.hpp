#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hrex/correlation.hpp"

namespace hrex {

/// Covariance of (X_1, ..., X_n) stacked time-major: row k*d + i is component
/// i at time k (0-based). Stored as its lag blocks C(0..L), where
/// C(h)_ij = rho_ij(h, n) and blocks beyond L are zero.
class BlockCovariance {
  public:
    BlockCovariance(std::size_t n, std::size_t d, std::vector<Eigen::MatrixXd> lag_blocks);

    std::size_t path_length() const { return n_; }
    std::size_t dim() const { return d_; }
    std::size_t size() const { return n_ * d_; }

    /// Half-width of the nonzero band of the stacked matrix.
    std::size_t bandwidth() const;

    double operator()(std::size_t row, std::size_t col) const;
    const std::vector<Eigen::MatrixXd>& lag_blocks() const { return blocks_; }
    Eigen::MatrixXd dense() const;

  private:
    std::size_t n_;
    std::size_t d_;
    std::vector<Eigen::MatrixXd> blocks_;
};

/// `model_n` is the sample size the correlations are evaluated at; it
/// defaults to the path length.
BlockCovariance assemble_covariance(const CorrelationModel& model, std::size_t n,
                                    std::optional<SampleSize> model_n = std::nullopt);

/// Lower Cholesky factor in band storage. Immutable once built.
class CholeskyFactor {
  public:
    CholeskyFactor(std::size_t size, std::size_t bandwidth, std::vector<double> band, bool jittered, double jitter);

    std::size_t size() const { return size_; }
    std::size_t bandwidth() const { return bandwidth_; }
    bool jittered() const { return jittered_; }
    double jitter() const { return jitter_; }

    /// L(row, col); zero outside the band and above the diagonal.
    double at(std::size_t row, std::size_t col) const;

    /// out = L z.
    void multiply(std::span<const double> z, std::span<double> out) const;

  private:
    std::size_t size_;
    std::size_t bandwidth_;
    std::vector<double> band_;  // row r: L(r, r - bandwidth .. r), left-padded for r < bandwidth
    bool jittered_;
    double jitter_;
};

inline constexpr double kDefaultJitter = 1e-10;

/// Largest band storage (in doubles) attempted; dense matrices up to
/// n*d = 8192 fit.
inline constexpr std::size_t kMaxBandStorage = std::size_t{8192} * 8192;

/// Cholesky factorization, retried once with jitter * I on failure. Throws
/// NotPositiveSemidefinite when both attempts fail.
CholeskyFactor validate_psd(const BlockCovariance& cov, double jitter = kDefaultJitter);

struct StreamTag {
    std::uint64_t seed = 0;
    std::uint64_t domain = 0;
    std::uint64_t index = 0;
};

struct SamplePath {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> values;  ///< row-major n x d; row k is X_{n,k}
    StreamTag provenance;

    double at(std::size_t k, std::size_t i) const { return values[k * d + i]; }
};

using PathSink = std::function<void(std::uint64_t replicate, std::span<const double> path)>;

/// Source of independent replicate paths. Replicate r is a pure function of
/// (seed, r), so any partition of the replicate range across workers yields
/// the same paths.
class PathSampler {
  public:
    virtual ~PathSampler() = default;

    virtual std::size_t path_length() const = 0;
    virtual std::size_t dim() const = 0;

    /// Calls sink for replicates first .. first + count - 1 in increasing order.
    virtual void generate(std::uint64_t first, std::uint64_t count, const PathSink& sink) const = 0;

    virtual StreamTag provenance(std::uint64_t replicate) const = 0;

    std::vector<SamplePath> sample(std::uint64_t first, std::uint64_t count) const;
};

class CholeskySampler final : public PathSampler {
  public:
    CholeskySampler(std::shared_ptr<const CholeskyFactor> factor, std::size_t n, std::size_t d, std::uint64_t seed,
                    std::uint64_t domain);

    std::size_t path_length() const override { return n_; }
    std::size_t dim() const override { return d_; }
    void generate(std::uint64_t first, std::uint64_t count, const PathSink& sink) const override;
    StreamTag provenance(std::uint64_t replicate) const override { return {seed_, domain_, replicate}; }

    const CholeskyFactor& factor() const { return *factor_; }

  private:
    std::shared_ptr<const CholeskyFactor> factor_;
    std::size_t n_;
    std::size_t d_;
    std::uint64_t seed_;
    std::uint64_t domain_;
};

struct CirculantOptions {
    /// Retries with doubled padding after the minimal embedding fails.
    int max_doublings = 3;
    /// Fall back to Cholesky (with a logged warning) when no embedding is PSD.
    bool allow_fallback = true;
    double jitter = kDefaultJitter;
};

/// Exact stationary sampler via block-circulant embedding. Replicates 2p and
/// 2p+1 are the real and imaginary parts of one complex draw from substream p.
class CirculantSampler final : public PathSampler {
  public:
    /// Throws EmbeddingNotPSD when no embedding size up to the retry limit
    /// has a PSD spectrum.
    CirculantSampler(const CorrelationModel& model, std::size_t n, SampleSize model_n, std::uint64_t seed,
                     std::uint64_t domain, int max_doublings = 3);
    ~CirculantSampler() override;

    std::size_t path_length() const override { return n_; }
    std::size_t dim() const override { return d_; }
    std::size_t embedding_size() const { return m_; }
    void generate(std::uint64_t first, std::uint64_t count, const PathSink& sink) const override;
    StreamTag provenance(std::uint64_t replicate) const override { return {seed_, domain_, replicate / 2}; }

  private:
    struct Plan;
    std::size_t n_;
    std::size_t d_;
    std::size_t m_ = 0;
    std::uint64_t seed_;
    std::uint64_t domain_;
    std::vector<double> factors_;  // per frequency: d x d column-major A(f) / sqrt(M)
    std::unique_ptr<Plan> plan_;
};

enum class SamplerKind { Cholesky, Circulant };

/// Builds the sampler for `model` at path length n (correlations evaluated at
/// sample size n). Circulant construction falls back to Cholesky per options.
std::unique_ptr<PathSampler> make_sampler(const CorrelationModel& model, std::size_t n, SamplerKind kind,
                                          std::uint64_t seed, std::uint64_t domain,
                                          const CirculantOptions& options = {});

/// `count` paths N(0, cov) from replicates 0 .. count-1 of stream (seed, cholesky domain).
std::vector<SamplePath> cholesky_sample(const BlockCovariance& cov, std::uint64_t seed, std::uint64_t count);

std::vector<SamplePath> circulant_sample(const CorrelationModel& model, std::size_t n, std::uint64_t seed,
                                         std::uint64_t count, const CirculantOptions& options = {});

std::vector<double> componentwise_maxima(std::span<const double> path, std::size_t d);

inline std::vector<double> componentwise_maxima(const SamplePath& path) {
    return componentwise_maxima(path.values, path.d);
}

/// Binary dump: "HREXPATH", u64 n, u64 d, then n*d f64 row-major, all little-endian.
void write_path(const SamplePath& path, const std::filesystem::path& file);
SamplePath read_path(const std::filesystem::path& file);

}  // namespace hrex
