#pragma once

#include <cmath>
#include <vector>

#include "gankd/config.hpp"
#include "gankd/model.hpp"

namespace gankd::train {

// Adam with bias correction. Moment buffers align with the parameter list
// order, which is fixed per model, so updates are deterministic.
struct AdamState {
    long long t = 0;
    std::vector<Tensor<float>> m, v;

    void init(std::vector<nn::ParamRef<float>>& params) {
        m.clear();
        v.clear();
        for (auto& p : params) {
            m.push_back(Tensor<float>::zeros_like(*p.value));
            v.push_back(Tensor<float>::zeros_like(*p.value));
        }
        t = 0;
    }

    void step(std::vector<nn::ParamRef<float>> params, const OptimConfig& opt) {
        if (m.size() != params.size()) init(params);
        ++t;
        const double b1 = opt.beta1, b2 = opt.beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor<float>& p = *params[i].value;
            Tensor<float>& g = *params[i].grad;
            if (g.numel() != p.numel()) continue; // grads never allocated: nothing to apply
            float* pm = m[i].data.data();
            float* pv = v[i].data.data();
            const float* pg = g.data.data();
            float* pp = p.data.data();
            const long long n = static_cast<long long>(p.numel());
#pragma omp parallel for schedule(static)
            for (long long k = 0; k < n; ++k) {
                const double gk = pg[k];
                const double mk = b1 * pm[k] + (1.0 - b1) * gk;
                const double vk = b2 * pv[k] + (1.0 - b2) * gk * gk;
                pm[k] = static_cast<float>(mk);
                pv[k] = static_cast<float>(vk);
                pp[k] = static_cast<float>(pp[k] - opt.lr * (mk / bc1) / (std::sqrt(vk / bc2) + opt.eps));
            }
        }
    }
};

} // namespace gankd::train
