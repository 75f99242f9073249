#pragma once

#include <algorithm>
#include <cmath>

#include "gankd/patch_disc.hpp"
#include "gankd/tensor.hpp"

namespace gankd::loss {

// Trade-off weights. lambda_sup is the supervised L1 weight of the base
// objective; beta1/gamma1 weight the generator-side distillation terms,
// beta2/gamma2 the discriminator-side ones; gamma_g is the standalone
// trade-off of the combined generator distillation loss.
struct LossWeights {
    double lambda_sup = 1.0;
    double gamma_g = 1.0;
    double beta1 = 1.0;
    double gamma1 = 1.0;
    double beta2 = 1.0;
    double gamma2 = 1.0;
    double alpha_margin = 1.0;
    bool square_l1 = false;   // squared per-sample l1 means in the pixel/perceptual distillation terms

    void validate() const {
        const double vals[] = {lambda_sup, gamma_g, beta1, gamma1, beta2, gamma2, alpha_margin};
        const char* names[] = {"lambda_sup", "gamma_g", "beta1", "gamma1", "beta2", "gamma2", "alpha_margin"};
        for (int i = 0; i < 7; ++i) {
            if (!std::isfinite(vals[i]) || vals[i] < 0)
                throw gankd::ConfigError(std::string("loss weight ") + names[i] + " must be finite and >= 0");
        }
    }
};

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
    if (!all_finite(t)) throw NumericError(std::string(what) + ": non-finite values");
}

// Mean binary cross-entropy with logits against a constant target grid.
template <typename T>
T bce_with_logits(const Tensor<T>& logits, double target) {
    require_finite(logits, "bce_with_logits");
    double acc = 0;
    for (size_t i = 0; i < logits.numel(); ++i) acc += softplus(static_cast<double>(logits.data[i])) - target * logits.data[i];
    return static_cast<T>(acc / static_cast<double>(logits.numel()));
}

// d(mean BCE)/d(logits), scaled.
template <typename T>
Tensor<T> bce_with_logits_grad(const Tensor<T>& logits, double target, double scale = 1.0) {
    Tensor<T> g = Tensor<T>::zeros_like(logits);
    const double inv = scale / static_cast<double>(logits.numel());
    for (size_t i = 0; i < logits.numel(); ++i)
        g.data[i] = static_cast<T>((sigmoid(static_cast<double>(logits.data[i])) - target) * inv);
    return g;
}

template <typename T>
T mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mean_abs_diff");
    double acc = 0;
    for (size_t i = 0; i < a.numel(); ++i) acc += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
    return static_cast<T>(acc / static_cast<double>(a.numel()));
}

// d(mean|a - b|)/db, scaled.
template <typename T>
Tensor<T> mean_abs_diff_grad_b(const Tensor<T>& a, const Tensor<T>& b, double scale = 1.0) {
    Tensor<T> g = Tensor<T>::zeros_like(b);
    const double inv = scale / static_cast<double>(a.numel());
    for (size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(b.data[i]) - a.data[i];
        g.data[i] = static_cast<T>((d > 0 ? inv : d < 0 ? -inv : 0.0));
    }
    return g;
}

// Per-sample mean-abs distance, squared per sample when `square` is set,
// then averaged over the batch. Plain mean_abs_diff when square is off.
template <typename T>
T sample_l1(const Tensor<T>& a, const Tensor<T>& b, bool square) {
    if (!square) return mean_abs_diff(a, b);
    require_same_shape(a, b, "sample_l1");
    const size_t m = a.numel() / a.n();
    double acc = 0;
    for (int n = 0; n < a.n(); ++n) {
        double d = 0;
        for (size_t i = 0; i < m; ++i) {
            const size_t k = n * m + i;
            d += std::abs(static_cast<double>(a.data[k]) - b.data[k]);
        }
        d /= static_cast<double>(m);
        acc += d * d;
    }
    return static_cast<T>(acc / a.n());
}

template <typename T>
Tensor<T> sample_l1_grad_b(const Tensor<T>& a, const Tensor<T>& b, bool square, double scale = 1.0) {
    if (!square) return mean_abs_diff_grad_b(a, b, scale);
    Tensor<T> g = Tensor<T>::zeros_like(b);
    const size_t m = b.numel() / b.n();
    for (int n = 0; n < b.n(); ++n) {
        double d = 0;
        for (size_t i = 0; i < m; ++i) {
            const size_t k = n * m + i;
            d += std::abs(static_cast<double>(a.data[k]) - b.data[k]);
        }
        d /= static_cast<double>(m);
        const double coef = scale * 2.0 * d / (static_cast<double>(m) * b.n());
        for (size_t i = 0; i < m; ++i) {
            const size_t k = n * m + i;
            const double diff = static_cast<double>(b.data[k]) - a.data[k];
            g.data[k] = static_cast<T>(diff > 0 ? coef : diff < 0 ? -coef : 0.0);
        }
    }
    return g;
}

// --- GAN objective, sigmoid cross-entropy form ---

template <typename T>
T gan_loss_d(const Tensor<T>& logits_real, const Tensor<T>& logits_fake) {
    require_same_shape(logits_real, logits_fake, "gan_loss_d");
    return bce_with_logits(logits_real, 1.0) + bce_with_logits(logits_fake, 0.0);
}

template <typename T>
T gan_loss_g(const Tensor<T>& logits_fake) {
    return bce_with_logits(logits_fake, 1.0);
}

// --- supervised and distillation terms ---

template <typename T>
T supervised_l1(const Tensor<T>& y, const Tensor<T>& g_x) {
    return mean_abs_diff(y, g_x);
}

template <typename T>
T kd_pixel_loss(const Tensor<T>& z_t, const Tensor<T>& z_s, bool square = false) {
    return sample_l1(z_t, z_s, square);
}

template <typename T>
T kd_perceptual_loss(const nn::PatchDiscriminator<T>& d_t, const Tensor<T>& x, const Tensor<T>& z_t,
                     const Tensor<T>& z_s, int tap, bool square = false) {
    Tensor<T> f_t = d_t.forward_features(z_t, x, tap);
    Tensor<T> f_s = d_t.forward_features(z_s, x, tap);
    return sample_l1(f_t, f_s, square);
}

// Gradient of the perceptual term wrt the student image; the teacher
// discriminator parameters stay constant.
template <typename T>
Tensor<T> kd_perceptual_grad_zs(nn::PatchDiscriminator<T>& d_t, const Tensor<T>& x, const Tensor<T>& z_t,
                                const Tensor<T>& z_s, int tap, bool square = false, double scale = 1.0) {
    Tensor<T> f_t = d_t.forward_features(z_t, x, tap);
    typename nn::PatchDiscriminator<T>::Ctx ctx;
    Tensor<T> f_s = d_t.forward_features(z_s, x, tap, &ctx);
    Tensor<T> gf = sample_l1_grad_b(f_t, f_s, square, scale);
    Tensor<T> gin = d_t.backward(ctx, {{tap, &gf}}, /*accum=*/false);
    return slice_channels(gin, x.c(), gin.c());
}

template <typename T>
T kd_generator_loss(const LossWeights& w, const Tensor<T>& z_t, const Tensor<T>& z_s,
                    const nn::PatchDiscriminator<T>& d_t, const Tensor<T>& x, int tap) {
    return static_cast<T>(kd_pixel_loss(z_t, z_s, w.square_l1) +
                          w.gamma_g * kd_perceptual_loss(d_t, x, z_t, z_s, tap, w.square_l1));
}

template <typename T>
T teacher_as_real_loss(const nn::PatchDiscriminator<T>& d_s, const Tensor<T>& x, const Tensor<T>& z_t) {
    return bce_with_logits(d_s.forward(concat_channels(x, z_t)), 1.0);
}

// Triplet hinge on per-sample feature distances.
template <typename T>
T triplet_from_features(const Tensor<T>& f_real, const Tensor<T>& f_teacher, const Tensor<T>& f_student,
                        double alpha) {
    if (alpha < 0) throw ConfigError("triplet margin alpha must be >= 0");
    require_same_shape(f_real, f_teacher, "triplet_from_features");
    require_same_shape(f_real, f_student, "triplet_from_features");
    const size_t m = f_real.numel() / f_real.n();
    double acc = 0;
    for (int n = 0; n < f_real.n(); ++n) {
        double dt = 0, ds = 0;
        for (size_t i = 0; i < m; ++i) {
            const size_t k = n * m + i;
            dt += std::abs(static_cast<double>(f_real.data[k]) - f_teacher.data[k]);
            ds += std::abs(static_cast<double>(f_real.data[k]) - f_student.data[k]);
        }
        acc += std::max(0.0, (dt - ds) / static_cast<double>(m) + alpha);
    }
    return static_cast<T>(acc / f_real.n());
}

template <typename T>
struct TripletGrads {
    T value;
    Tensor<T> g_real, g_teacher, g_student;
};

template <typename T>
TripletGrads<T> triplet_feature_grads(const Tensor<T>& f_real, const Tensor<T>& f_teacher,
                                      const Tensor<T>& f_student, double alpha, double scale = 1.0) {
    if (alpha < 0) throw ConfigError("triplet margin alpha must be >= 0");
    require_same_shape(f_real, f_teacher, "triplet_feature_grads");
    require_same_shape(f_real, f_student, "triplet_feature_grads");
    TripletGrads<T> out;
    out.g_real = Tensor<T>::zeros_like(f_real);
    out.g_teacher = Tensor<T>::zeros_like(f_real);
    out.g_student = Tensor<T>::zeros_like(f_real);
    const size_t m = f_real.numel() / f_real.n();
    const int n_batch = f_real.n();
    double acc = 0;
    for (int n = 0; n < n_batch; ++n) {
        double dt = 0, ds = 0;
        for (size_t i = 0; i < m; ++i) {
            const size_t k = n * m + i;
            dt += std::abs(static_cast<double>(f_real.data[k]) - f_teacher.data[k]);
            ds += std::abs(static_cast<double>(f_real.data[k]) - f_student.data[k]);
        }
        const double hinge = (dt - ds) / static_cast<double>(m) + alpha;
        if (hinge > 0) {
            acc += hinge;
            const double c = scale / (static_cast<double>(m) * n_batch);
            for (size_t i = 0; i < m; ++i) {
                const size_t k = n * m + i;
                const double st = f_real.data[k] > f_teacher.data[k] ? 1.0 : f_real.data[k] < f_teacher.data[k] ? -1.0 : 0.0;
                const double ss = f_real.data[k] > f_student.data[k] ? 1.0 : f_real.data[k] < f_student.data[k] ? -1.0 : 0.0;
                out.g_real.data[k] = static_cast<T>(c * (st - ss));
                out.g_teacher.data[k] = static_cast<T>(-c * st);
                out.g_student.data[k] = static_cast<T>(c * ss);
            }
        }
    }
    out.value = static_cast<T>(acc / n_batch);
    return out;
}

template <typename T>
T triplet_feature_loss(const nn::PatchDiscriminator<T>& d_s, const Tensor<T>& x, const Tensor<T>& y,
                       const Tensor<T>& z_t, const Tensor<T>& z_s, double alpha, int tap) {
    Tensor<T> f_real = d_s.forward_features(y, x, tap);
    Tensor<T> f_teacher = d_s.forward_features(z_t, x, tap);
    Tensor<T> f_student = d_s.forward_features(z_s, x, tap);
    return triplet_from_features(f_real, f_teacher, f_student, alpha);
}

// Eq-(9)-style split by updated parameter set: generator-side terms and
// discriminator-side terms of the student objective (no D halving here; the
// trainer halves the adversarial D term).
template <typename T>
struct StudentObjective {
    T g_loss;
    T d_loss;
};

template <typename T>
StudentObjective<T> student_total_objective(const LossWeights& w, const nn::PatchDiscriminator<T>& d_s,
                                            const nn::PatchDiscriminator<T>& d_t, const Tensor<T>& x,
                                            const Tensor<T>& y, const Tensor<T>& z_t, const Tensor<T>& z_s,
                                            int tap_teacher, int tap_student) {
    w.validate();
    Tensor<T> logits_fake = d_s.forward(concat_channels(x, z_s));
    Tensor<T> logits_real = d_s.forward(concat_channels(x, y));
    StudentObjective<T> out;
    double g = gan_loss_g(logits_fake);
    if (w.beta1 != 0) g += w.beta1 * kd_pixel_loss(z_t, z_s, w.square_l1);
    if (w.gamma1 != 0) g += w.gamma1 * kd_perceptual_loss(d_t, x, z_t, z_s, tap_teacher, w.square_l1);
    double d = gan_loss_d(logits_real, logits_fake);
    if (w.beta2 != 0) d += w.beta2 * teacher_as_real_loss(d_s, x, z_t);
    if (w.gamma2 != 0) d += w.gamma2 * triplet_feature_loss(d_s, x, y, z_t, z_s, w.alpha_margin, tap_student);
    out.g_loss = static_cast<T>(g);
    out.d_loss = static_cast<T>(d);
    return out;
}

} // namespace gankd::loss
