#include "csscan/bpfa.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "csscan/errors.hpp"
#include "csscan/parallel.hpp"

namespace csscan {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_sigmoid(double x) {
    // log(1/(1+e^-x)) without overflow.
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double clamp_probability(double p) {
    return std::clamp(p, 1e-300, 1.0 - 1e-15);
}

}  // namespace

void BpfaHyperparams::validate() const {
    if (atom_count < 2)
        throw ValidationError(
            "atom count K must be >= 2 (the Beta parameter b(K-1)/K is improper at K=1)");
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("Beta parameters a, b must be > 0");
    if (!(c > 0.0) || !(d > 0.0) || !(e > 0.0) || !(f > 0.0))
        throw ValidationError("gamma hyper-prior parameters must be > 0");
}

void BatchSchedule::validate(std::size_t patch_count) const {
    if (epochs < 1) throw ValidationError("schedule must run at least one epoch");
    if (batch_size < 0) throw ValidationError("batch size must be >= 0");
    if (batch_size > 0 && static_cast<std::size_t>(batch_size) > patch_count)
        throw ValidationError("batch size exceeds patch count");
}

std::string inference_mode_name(InferenceMode m) {
    return m == InferenceMode::Em ? "em" : "gibbs";
}

InferenceMode inference_mode_from_name(const std::string& name) {
    if (name == "em") return InferenceMode::Em;
    if (name == "gibbs") return InferenceMode::Gibbs;
    throw ValidationError("unknown inference mode: " + name);
}

BpfaModel::BpfaModel(const std::vector<Patch>& patches, int patch_size,
                     const BpfaHyperparams& hyper)
    : patch_size_(patch_size), hyper_(hyper) {
    hyper_.validate();
    if (patches.empty()) throw ValidationError("no patches given");
    const int px = patch_size * patch_size;
    const std::size_t np = patches.size();
    values_.resize(px, np);
    visible_.resize(px, np);
    for (std::size_t i = 0; i < np; ++i) {
        const Patch& p = patches[i];
        if (p.values.size() != static_cast<std::size_t>(px) ||
            p.observed.size() != static_cast<std::size_t>(px))
            throw ValidationError("patch " + std::to_string(i) + " does not match patch size");
        for (int j = 0; j < px; ++j) {
            const double vis = p.observed[j] ? 1.0 : 0.0;
            visible_(j, i) = vis;
            values_(j, i) = vis * p.values[j];  // unobserved entries cannot leak in
        }
    }
    patch_means_ = Eigen::VectorXd::Zero(np);
}

void BpfaModel::apply_mean_subtraction() {
    if (means_subtracted_) return;
    const auto np = values_.cols();
    for (Eigen::Index i = 0; i < np; ++i) {
        const double nobs = visible_.col(i).sum();
        const double mean = nobs > 0.0 ? values_.col(i).sum() / nobs : 0.0;
        patch_means_[i] = mean;
        values_.col(i) -= mean * visible_.col(i);
    }
    means_subtracted_ = true;
}

void BpfaModel::init_state(std::uint64_t seed) {
    const int px = patch_size_ * patch_size_;
    const int K = hyper_.atom_count;
    const auto np = values_.cols();

    Rng rng(seed);
    state_.dictionary.resize(px, K);
    const double atom_sd = 1.0 / patch_size_;  // sqrt of the N(0, B^-2) prior variance
    for (int k = 0; k < K; ++k)
        for (int p = 0; p < px; ++p) state_.dictionary(p, k) = atom_sd * rng.normal();

    state_.supports = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(K, np);
    state_.weights = Eigen::MatrixXd::Zero(K, np);
    state_.pi =
        Eigen::VectorXd::Constant(K, hyper_.a / (hyper_.a + hyper_.b * (K - 1)));
    state_.gamma_n = hyper_.c / hyper_.d;
    state_.gamma_w = hyper_.e / hyper_.f;
    initialized_ = true;
}

Eigen::VectorXd BpfaModel::residual(std::size_t patch) const {
    const int K = hyper_.atom_count;
    Eigen::VectorXd xhat = Eigen::VectorXd::Zero(values_.rows());
    for (int k = 0; k < K; ++k)
        if (state_.supports(k, patch))
            xhat += state_.weights(k, patch) * state_.dictionary.col(k);
    return values_.col(patch) - visible_.col(patch).cwiseProduct(xhat);
}

SupportWeightPosterior BpfaModel::support_weight_posterior(std::size_t patch, int atom,
                                                           const Eigen::VectorXd& resid) const {
    SupportWeightPosterior post;
    const auto d = state_.dictionary.col(atom);
    post.masked_norm2 = visible_.col(patch).cwiseProduct(d).squaredNorm();
    const double current =
        state_.supports(atom, patch) ? state_.weights(atom, patch) : 0.0;
    // resid is masked, so a plain dot product equals the masked one.
    post.residual_dot = d.dot(resid) + current * post.masked_norm2;
    if (!std::isfinite(post.residual_dot))
        throw NumericalError("non-finite residual in support/weight update");

    const double gn = state_.gamma_n;
    const double gw = state_.gamma_w;
    post.precision = gw + gn * post.masked_norm2;
    const double q = gn * post.residual_dot;
    post.mean = q / post.precision;
    const double gauss_gain = q * q / (2.0 * post.precision);
    const double pi = state_.pi[atom];
    const double base = std::log(pi) - std::log1p(-pi);
    post.log_odds_sampled = base + 0.5 * std::log(gw / post.precision) + gauss_gain;
    return post;
}

void BpfaModel::update_support_weight(std::size_t patch, int atom, Eigen::VectorXd& resid,
                                      InferenceMode mode, Rng* rng) {
    const SupportWeightPosterior post = support_weight_posterior(patch, atom, resid);
    const double old_contrib =
        state_.supports(atom, patch) ? state_.weights(atom, patch) : 0.0;

    bool z_new;
    double w_new;
    if (mode == InferenceMode::Em) {
        // Mode of the collapsed Bernoulli conditional, then the conditional
        // mean for the weight. The Occam term in the odds is what keeps the
        // support sparse once gamma_n grows large.
        z_new = post.log_odds_sampled > 0.0;
        w_new = z_new ? post.mean : 0.0;
    } else {
        const double p = std::exp(log_sigmoid(post.log_odds_sampled));
        z_new = rng->bernoulli(p);
        w_new = z_new ? post.mean + rng->normal() / std::sqrt(post.precision)
                      : rng->normal() / std::sqrt(state_.gamma_w);
    }

    const double new_contrib = z_new ? w_new : 0.0;
    if (new_contrib != old_contrib)
        resid += (old_contrib - new_contrib) *
                 visible_.col(patch).cwiseProduct(state_.dictionary.col(atom));
    state_.supports(atom, patch) = z_new ? 1 : 0;
    state_.weights(atom, patch) = w_new;
}

Eigen::VectorXd BpfaModel::e_step_patch(std::size_t patch, InferenceMode mode, Rng* rng,
                                        const std::vector<int>& atom_order) {
    Eigen::VectorXd resid = residual(patch);
    const int K = hyper_.atom_count;
    if (atom_order.empty()) {
        for (int k = 0; k < K; ++k) update_support_weight(patch, k, resid, mode, rng);
    } else {
        for (int k : atom_order) update_support_weight(patch, k, resid, mode, rng);
    }
    return resid;
}

void BpfaModel::update_dictionary(const std::vector<std::size_t>& batch, Eigen::MatrixXd& resid,
                                  double scale, InferenceMode mode, Rng* rng,
                                  const std::vector<int>& atom_order) {
    if (batch.empty()) throw ValidationError("update_dictionary: empty batch");
    const int px = patch_size_ * patch_size_;
    const int K = hyper_.atom_count;
    const double prior_prec = static_cast<double>(px);  // B^2
    const double gn = state_.gamma_n;

    std::vector<int> order(atom_order);
    if (order.empty()) {
        order.resize(K);
        std::iota(order.begin(), order.end(), 0);
    }

    Eigen::VectorXd prec(px), num(px);
    for (int k : order) {
        prec.setZero();
        num.setZero();
        // Add atom k's contribution back, accumulate its sufficient
        // statistics, then subtract the refreshed atom.
        for (std::size_t li = 0; li < batch.size(); ++li) {
            const std::size_t gi = batch[li];
            if (!state_.supports(k, gi)) continue;
            const double w = state_.weights(k, gi);
            resid.col(li) += w * visible_.col(gi).cwiseProduct(state_.dictionary.col(k));
            prec += (scale * w * w) * visible_.col(gi);
            num += (scale * w) * resid.col(li);
        }
        Eigen::VectorXd total_prec = (gn * prec).array() + prior_prec;
        Eigen::VectorXd atom = (gn * num.array() / total_prec.array()).matrix();
        if (mode == InferenceMode::Gibbs)
            for (int p = 0; p < px; ++p) atom[p] += rng->normal() / std::sqrt(total_prec[p]);
        state_.dictionary.col(k) = atom;
        for (std::size_t li = 0; li < batch.size(); ++li) {
            const std::size_t gi = batch[li];
            if (!state_.supports(k, gi)) continue;
            resid.col(li) -=
                state_.weights(k, gi) * visible_.col(gi).cwiseProduct(atom);
        }
    }
}

void BpfaModel::update_pi(const std::vector<std::size_t>& batch, double scale,
                          InferenceMode mode, Rng* rng) {
    const int K = hyper_.atom_count;
    const double np = static_cast<double>(values_.cols());
    const double alpha0 = hyper_.a / K;
    const double beta0 = hyper_.b * (K - 1) / K;
    for (int k = 0; k < K; ++k) {
        double cnt = 0.0;
        for (std::size_t gi : batch) cnt += state_.supports(k, gi) ? 1.0 : 0.0;
        cnt *= scale;
        const double alpha = alpha0 + cnt;
        const double beta = beta0 + std::max(0.0, np - cnt);
        const double value = mode == InferenceMode::Em ? alpha / (alpha + beta)
                                                       : rng->beta(alpha, beta);
        state_.pi[k] = clamp_probability(value);
    }
}

void BpfaModel::update_precisions(const std::vector<std::size_t>& batch,
                                  const Eigen::MatrixXd& resid, double scale,
                                  InferenceMode mode, Rng* rng) {
    double obs = 0.0, ssr = 0.0, zcnt = 0.0, zw2 = 0.0;
    for (std::size_t li = 0; li < batch.size(); ++li) {
        const std::size_t gi = batch[li];
        obs += visible_.col(gi).sum();
        ssr += resid.col(li).squaredNorm();
        for (int k = 0; k < hyper_.atom_count; ++k) {
            if (!state_.supports(k, gi)) continue;
            const double w = state_.weights(k, gi);
            zcnt += 1.0;
            zw2 += w * w;
        }
    }
    const double shape_n = hyper_.c + 0.5 * scale * obs;
    const double rate_n = hyper_.d + 0.5 * scale * ssr;
    const double shape_w = hyper_.e + 0.5 * scale * zcnt;
    const double rate_w = hyper_.f + 0.5 * scale * zw2;
    if (mode == InferenceMode::Em) {
        state_.gamma_n = shape_n / rate_n;
        state_.gamma_w = shape_w / rate_w;
    } else {
        state_.gamma_n = rng->gamma(shape_n, rate_n);
        state_.gamma_w = rng->gamma(shape_w, rate_w);
    }
    if (!std::isfinite(state_.gamma_n) || !std::isfinite(state_.gamma_w))
        throw NumericalError("non-finite precision update");
}

double BpfaModel::objective() const {
    const int K = hyper_.atom_count;
    const int px = patch_size_ * patch_size_;
    const auto np = values_.cols();
    const double gn = state_.gamma_n;
    const double gw = state_.gamma_w;

    double total_obs = 0.0, data_sse = 0.0;
    double active = 0.0, active_w2 = 0.0;
    for (Eigen::Index i = 0; i < np; ++i) {
        data_sse += residual(i).squaredNorm();
        total_obs += visible_.col(i).sum();
        for (int k = 0; k < K; ++k) {
            if (!state_.supports(k, i)) continue;
            active += 1.0;
            active_w2 += state_.weights(k, i) * state_.weights(k, i);
        }
    }

    double J = -0.5 * gn * data_sse + 0.5 * total_obs * (std::log(gn) - kLog2Pi);
    J += 0.5 * active * (std::log(gw) - kLog2Pi) - 0.5 * gw * active_w2;

    for (int k = 0; k < K; ++k) {
        double cnt = 0.0;
        for (Eigen::Index i = 0; i < np; ++i) cnt += state_.supports(k, i) ? 1.0 : 0.0;
        const double lp = std::log(state_.pi[k]);
        const double lq = std::log1p(-state_.pi[k]);
        J += cnt * lp + (static_cast<double>(np) - cnt) * lq;
        J += (hyper_.a / K - 1.0) * lp + (hyper_.b * (K - 1) / K - 1.0) * lq;
    }

    const double prior_prec = static_cast<double>(px);
    J += 0.5 * static_cast<double>(K) * px * (std::log(prior_prec) - kLog2Pi) -
         0.5 * prior_prec * state_.dictionary.squaredNorm();
    J += (hyper_.c - 1.0) * std::log(gn) - hyper_.d * gn;
    J += (hyper_.e - 1.0) * std::log(gw) - hyper_.f * gw;
    return J;
}

Trace BpfaModel::run(const BatchSchedule& schedule, const InferenceOptions& options) {
    schedule.validate(patch_count());
    const std::size_t np = patch_count();
    const std::size_t nb =
        schedule.batch_size == 0 ? np : static_cast<std::size_t>(schedule.batch_size);

    if (options.subtract_patch_means) apply_mean_subtraction();
    if (!initialized_) init_state(options.seed);

    std::vector<std::size_t> perm(np);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle_rng(schedule.shuffle_seed);

    // Running sufficient statistics for the optional Robbins-Monro averaging.
    const int K = hyper_.atom_count;
    Eigen::VectorXd avg_cnt = Eigen::VectorXd::Zero(K);
    Eigen::Vector4d avg_gamma = Eigen::Vector4d::Zero();  // obs, ssr, zcnt, zw2
    bool avg_primed = false;

    Trace trace;
    trace.reserve(schedule.epochs);
    double prev_obj = 0.0;
    int quiet_epochs = 0;
    std::size_t global_batch = 0;

    Eigen::MatrixXd resid(values_.rows(), nb);
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const bool in_warmup =
            options.mode == InferenceMode::Em && epoch < options.gibbs_warmup_epochs;
        const InferenceMode mode = in_warmup ? InferenceMode::Gibbs : options.mode;
        const double gamma_n_cap =
            (in_warmup && options.warmup_gamma_n_max > 0.0) ? options.warmup_gamma_n_max : 0.0;
        shuffle_rng.shuffle(perm);

        for (std::size_t start = 0; start < np; start += nb) {
            const std::size_t count = std::min(nb, np - start);
            std::vector<std::size_t> batch(perm.begin() + start, perm.begin() + start + count);
            const double scale = static_cast<double>(np) / static_cast<double>(count);

            // E-step: per-patch sweeps are independent given (D, pi, gamma);
            // each patch gets its own derived RNG stream, so the result does
            // not depend on the thread count.
            parallel_for(0, count, options.threads, [&](std::size_t li) {
                const std::size_t gi = batch[li];
                if (mode == InferenceMode::Gibbs) {
                    Rng patch_rng(derive_seed(options.seed,
                                              0xe57e9000u + static_cast<std::uint64_t>(epoch),
                                              gi));
                    resid.col(li) = e_step_patch(gi, mode, &patch_rng);
                } else {
                    resid.col(li) = e_step_patch(gi, mode, nullptr);
                }
            });

            Rng mstep_rng(derive_seed(options.seed, 0x357e9000u + global_batch, 0));
            const bool averaging = options.stat_averaging;
            const double rho =
                averaging ? std::pow(options.stat_t0 + static_cast<double>(global_batch),
                                     -options.stat_kappa)
                          : 1.0;

            if (!averaging) {
                update_dictionary(batch, resid, scale, mode, &mstep_rng);
                update_pi(batch, scale, mode, &mstep_rng);
                update_precisions(batch, resid, scale, mode, &mstep_rng);
            } else {
                update_dictionary(batch, resid, scale, mode, &mstep_rng);
                // pi and gamma keep interpolated full-data statistics.
                Eigen::VectorXd cnt = Eigen::VectorXd::Zero(K);
                Eigen::Vector4d g = Eigen::Vector4d::Zero();
                for (std::size_t li = 0; li < batch.size(); ++li) {
                    const std::size_t gi = batch[li];
                    g[0] += visible_.col(gi).sum();
                    g[1] += resid.col(li).squaredNorm();
                    for (int k = 0; k < K; ++k) {
                        if (!state_.supports(k, gi)) continue;
                        cnt[k] += 1.0;
                        g[2] += 1.0;
                        g[3] += state_.weights(k, gi) * state_.weights(k, gi);
                    }
                }
                cnt *= scale;
                g *= scale;
                if (!avg_primed) {
                    avg_cnt = cnt;
                    avg_gamma = g;
                    avg_primed = true;
                } else {
                    avg_cnt = (1.0 - rho) * avg_cnt + rho * cnt;
                    avg_gamma = (1.0 - rho) * avg_gamma + rho * g;
                }
                const double npd = static_cast<double>(np);
                for (int k = 0; k < K; ++k) {
                    const double alpha = hyper_.a / K + avg_cnt[k];
                    const double beta =
                        hyper_.b * (K - 1) / K + std::max(0.0, npd - avg_cnt[k]);
                    const double value = mode == InferenceMode::Em
                                             ? alpha / (alpha + beta)
                                             : mstep_rng.beta(alpha, beta);
                    state_.pi[k] = clamp_probability(value);
                }
                const double shape_n = hyper_.c + 0.5 * avg_gamma[0];
                const double rate_n = hyper_.d + 0.5 * avg_gamma[1];
                const double shape_w = hyper_.e + 0.5 * avg_gamma[2];
                const double rate_w = hyper_.f + 0.5 * avg_gamma[3];
                if (mode == InferenceMode::Em) {
                    state_.gamma_n = shape_n / rate_n;
                    state_.gamma_w = shape_w / rate_w;
                } else {
                    state_.gamma_n = mstep_rng.gamma(shape_n, rate_n);
                    state_.gamma_w = mstep_rng.gamma(shape_w, rate_w);
                }
            }
            if (gamma_n_cap > 0.0 && state_.gamma_n > gamma_n_cap)
                state_.gamma_n = gamma_n_cap;
            ++global_batch;
        }

        TraceRow row;
        row.epoch = epoch;
        row.objective = objective();
        if (!std::isfinite(row.objective))
            throw NumericalError("non-finite objective at epoch " + std::to_string(epoch) +
                                 " (batch " + std::to_string(global_batch) + ")");
        int active_atoms = 0;
        for (int k = 0; k < K; ++k) {
            bool used = false;
            for (Eigen::Index i = 0; i < values_.cols() && !used; ++i)
                used = state_.supports(k, i) != 0;
            active_atoms += used ? 1 : 0;
        }
        row.active_atoms = active_atoms;
        row.mean_pi = state_.pi.mean();
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        trace.push_back(row);

        if (options.early_stop_rel_tol > 0.0 && epoch > 0) {
            const double rel = std::abs(row.objective - prev_obj) /
                               std::max(1.0, std::abs(row.objective));
            quiet_epochs = rel < options.early_stop_rel_tol ? quiet_epochs + 1 : 0;
            if (quiet_epochs >= options.early_stop_patience) break;
        }
        prev_obj = row.objective;
    }
    return trace;
}

Eigen::MatrixXd BpfaModel::reconstruct_patch_values() const {
    const int K = hyper_.atom_count;
    Eigen::MatrixXd out(values_.rows(), values_.cols());
    for (Eigen::Index i = 0; i < values_.cols(); ++i) {
        Eigen::VectorXd xhat = Eigen::VectorXd::Zero(values_.rows());
        for (int k = 0; k < K; ++k)
            if (state_.supports(k, i)) xhat += state_.weights(k, i) * state_.dictionary.col(k);
        if (means_subtracted_) xhat.array() += patch_means_[i];
        out.col(i) = xhat;
    }
    return out;
}

InferenceResult run_inference(const std::vector<Patch>& patches, int patch_size,
                              const BpfaHyperparams& hyper, const BatchSchedule& schedule,
                              const InferenceOptions& options) {
    BpfaModel model(patches, patch_size, hyper);
    model.init_state(options.seed);
    InferenceResult result;
    result.trace = model.run(schedule, options);
    result.state = model.state();
    result.reconstructed = model.reconstruct_patch_values();
    return result;
}

Image reconstruct_image(const Eigen::MatrixXd& patch_values, const PatchGrid& grid) {
    if (static_cast<std::size_t>(patch_values.cols()) != grid.patch_count())
        throw ValidationError("reconstruct_image: patch count mismatch");
    const int px = grid.patch_size * grid.patch_size;
    if (patch_values.rows() != px)
        throw ValidationError("reconstruct_image: patch size mismatch");

    std::vector<Patch> patches(grid.patch_count());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        patches[i].row = grid.origins[i].first;
        patches[i].col = grid.origins[i].second;
        patches[i].values.assign(patch_values.col(i).data(), patch_values.col(i).data() + px);
        patches[i].observed.assign(px, 1);
    }
    Image img = reassemble(patches, grid);
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

}  // namespace csscan
