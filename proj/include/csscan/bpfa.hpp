#ifndef CSSCAN_BPFA_HPP
#define CSSCAN_BPFA_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "csscan/image.hpp"
#include "csscan/patches.hpp"
#include "csscan/rng.hpp"

namespace csscan {

/// Beta-Bernoulli process and gamma hyper-prior parameters.
/// K atoms; pi_k ~ Beta(a/K, b(K-1)/K); gamma_n ~ Gamma(c, d) and
/// gamma_w ~ Gamma(e, f) in shape/rate form.
struct BpfaHyperparams {
    int atom_count = 64;
    double a = 1.0;
    double b = 1.0;
    double c = 1e-6;
    double d = 1e-6;
    double e = 1e-6;
    double f = 1e-6;

    void validate() const;
};

/// Mini-batch schedule for stochastic inference.
struct BatchSchedule {
    int batch_size = 0;  // 0 = full batch
    int epochs = 60;
    std::uint64_t shuffle_seed = 0;

    void validate(std::size_t patch_count) const;
};

enum class InferenceMode { Em, Gibbs };

std::string inference_mode_name(InferenceMode m);
InferenceMode inference_mode_from_name(const std::string& name);

/// Knobs beyond the schedule. gibbs_warmup_epochs applies in EM mode only:
/// that many leading epochs run sampled updates before switching to
/// posterior means/modes (deterministic EM from a cold start deactivates
/// every atom and stays there; a sampled warm-up escapes that fixed point).
struct InferenceOptions {
    InferenceMode mode = InferenceMode::Em;
    std::uint64_t seed = 0;
    int gibbs_warmup_epochs = 0;
    /// Noise-precision ceiling during the sampled warm-up epochs (EM mode
    /// only; 0 disables). On clean data gamma_n can diverge within a few
    /// epochs, freezing whatever redundant atoms the first sweeps recruited;
    /// holding it at a moderate value keeps support moves reversible until
    /// the dictionary has settled, after which the EM phase releases it.
    double warmup_gamma_n_max = 400.0;
    bool subtract_patch_means = false;
    /// Robbins-Monro averaging of sufficient statistics across batches:
    /// step size rho_t = (t0 + t)^(-kappa) at global batch t. Off by default
    /// (plain stochastic EM: each batch's scaled statistics replace the old).
    bool stat_averaging = false;
    double stat_t0 = 1.0;
    double stat_kappa = 0.6;
    /// Early stop when the objective changes by less than early_stop_rel_tol
    /// (relative) over early_stop_patience consecutive epochs. 0 disables.
    double early_stop_rel_tol = 0.0;
    int early_stop_patience = 5;
    int threads = 1;
};

/// Inference state: dictionary, supports, weights, atom probabilities and
/// precisions. The coefficient vector exposed downstream is always
/// alpha_i = z_i .* w_i.
struct BpfaState {
    Eigen::MatrixXd dictionary;                      // B^2 x K
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> supports;  // K x N_p
    Eigen::MatrixXd weights;                         // K x N_p
    Eigen::VectorXd pi;                              // K
    double gamma_n = 1.0;
    double gamma_w = 1.0;

    int patch_pixels() const { return static_cast<int>(dictionary.rows()); }
    int atom_count() const { return static_cast<int>(dictionary.cols()); }
    std::size_t patch_count() const { return static_cast<std::size_t>(weights.cols()); }
};

struct TraceRow {
    int epoch = 0;
    double objective = 0.0;
    int active_atoms = 0;
    double mean_pi = 0.0;
    double wall_ms = 0.0;
};

using Trace = std::vector<TraceRow>;

/// Conditional posterior of one (support, weight) pair, as used by both the
/// sampler and the EM updates. With dk_masked = atom k restricted to the
/// observed pixels of patch i and r the residual excluding atom k:
///   weight | z=1  ~  N(mean, 1/precision),
///   precision = gamma_w + gamma_n * |dk_masked|^2,
///   mean = gamma_n * <dk_masked, r> / precision,
///   log_odds = log(pi/(1-pi)) + log(gamma_w/precision)/2
///              + (gamma_n <dk_masked, r>)^2 / (2 precision),
/// the collapsed Bernoulli log odds with the weight integrated out. Gibbs
/// mode samples from it, EM mode takes its mode.
struct SupportWeightPosterior {
    double precision = 0.0;
    double mean = 0.0;
    double log_odds_sampled = 0.0;
    double masked_norm2 = 0.0;
    double residual_dot = 0.0;
};

/// BPFA model bound to a fixed set of masked patches. Owns the state and the
/// update steps; run() drives the stochastic EM / Gibbs loop.
class BpfaModel {
public:
    BpfaModel(const std::vector<Patch>& patches, int patch_size, const BpfaHyperparams& hyper);

    /// Draws the initial state: atoms i.i.d. N(0, 1/B^2), pi at the prior
    /// mean a/(a + b(K-1)), supports all off, weights zero, precisions at
    /// the prior means c/d and e/f.
    void init_state(std::uint64_t seed);

    /// Residual y_i - P_i D (z_i .* w_i) for patch i (zero at unobserved
    /// pixels, like everything patch-shaped here).
    Eigen::VectorXd residual(std::size_t patch) const;

    SupportWeightPosterior support_weight_posterior(std::size_t patch, int atom,
                                                    const Eigen::VectorXd& resid) const;

    /// One (z_ik, w_ik) update. `resid` is maintained incrementally. In EM
    /// mode takes the block mode; in Gibbs mode samples z from the collapsed
    /// conditional, then w from its conditional (prior draw when z = 0).
    void update_support_weight(std::size_t patch, int atom, Eigen::VectorXd& resid,
                               InferenceMode mode, Rng* rng);

    /// Full E-step sweep over one patch: refreshes the residual, then visits
    /// atoms in `atom_order` (defaults to 0..K-1).
    Eigen::VectorXd e_step_patch(std::size_t patch, InferenceMode mode, Rng* rng,
                                 const std::vector<int>& atom_order = {});

    /// M-step atom update over `batch` with sufficient-statistic scale s:
    /// per-pixel posterior precision B^2 + gamma_n * s * sum (z w)^2 over
    /// batch patches observing the pixel, mean accordingly. Residual columns
    /// in `resid` correspond to `batch` and are kept in sync.
    void update_dictionary(const std::vector<std::size_t>& batch, Eigen::MatrixXd& resid,
                           double scale, InferenceMode mode, Rng* rng,
                           const std::vector<int>& atom_order = {});

    /// Conjugate Beta update of pi from the batch support counts.
    void update_pi(const std::vector<std::size_t>& batch, double scale, InferenceMode mode,
                   Rng* rng);

    /// Conjugate Gamma updates of gamma_n (from residuals over observed
    /// pixels) and gamma_w (from active weights).
    void update_precisions(const std::vector<std::size_t>& batch, const Eigen::MatrixXd& resid,
                           double scale, InferenceMode mode, Rng* rng);

    /// Joint log-posterior surrogate over all patches: the Gaussian data
    /// term -gamma_n/2 sum |r_i|^2 + 1/2 sum |Omega_i| log(gamma_n/2pi)
    /// plus the log priors of the current supports, active weights,
    /// dictionary, pi and precisions.
    double objective() const;

    /// Runs scheduled inference. Throws NumericalError with the offending
    /// epoch/batch if the objective turns non-finite.
    Trace run(const BatchSchedule& schedule, const InferenceOptions& options);

    /// Reconstructed patch matrix D (z .* w), one column per patch, with
    /// subtracted patch means added back when that option was active.
    Eigen::MatrixXd reconstruct_patch_values() const;

    const BpfaState& state() const { return state_; }
    BpfaState& state() { return state_; }
    const BpfaHyperparams& hyper() const { return hyper_; }
    int patch_size() const { return patch_size_; }
    std::size_t patch_count() const { return static_cast<std::size_t>(values_.cols()); }
    const Eigen::MatrixXd& patch_values() const { return values_; }
    const Eigen::MatrixXd& visibility() const { return visible_; }

private:
    void apply_mean_subtraction();
    double batch_objective_term(std::size_t patch, const Eigen::VectorXd& resid) const;

    int patch_size_ = 0;
    BpfaHyperparams hyper_;
    Eigen::MatrixXd values_;    // B^2 x N_p, zero-filled at unobserved pixels
    Eigen::MatrixXd visible_;   // B^2 x N_p, 0/1
    Eigen::VectorXd patch_means_;  // per-patch observed mean (mean subtraction)
    bool means_subtracted_ = false;
    BpfaState state_;
    bool initialized_ = false;
};

/// patches -> inference -> state + trace, in one call.
struct InferenceResult {
    BpfaState state;
    Trace trace;
    Eigen::MatrixXd reconstructed;  // B^2 x N_p
};

InferenceResult run_inference(const std::vector<Patch>& patches, int patch_size,
                              const BpfaHyperparams& hyper, const BatchSchedule& schedule,
                              const InferenceOptions& options);

/// Reassembles reconstructed patch values into an image and clamps to [0,1].
Image reconstruct_image(const Eigen::MatrixXd& patch_values, const PatchGrid& grid);

}  // namespace csscan

#endif
