// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "llast/graph.hpp"

namespace llast {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
};

// Central-difference verification oracle. Runs in 64-bit mode only: the
// builder constructs a scalar loss on a fresh graph each call, and the
// analytic gradients from one backward pass are compared elementwise against
// (f(p + h e) - f(p - h e)) / 2h.
inline GradCheckResult finite_difference_check(const std::vector<Parameter<double>*>& params,
                                               const std::function<Graph<double>::Ref(Graph<double>&)>& build,
                                               double h = 1e-4) {
    auto eval = [&]() {
        Graph<double> g(/*record_tape=*/false);
        return g.value(build(g)).at(0);
    };

    for (auto* p : params) p->zero_grad();
    {
        Graph<double> g;
        auto loss = build(g);
        g.backward(loss);
    }

    GradCheckResult res;
    for (auto* p : params) {
        if (!p->trainable) continue;
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            double saved = p->value.at(i);
            p->value.at(i) = saved + h;
            double fp = eval();
            p->value.at(i) = saved - h;
            double fm = eval();
            p->value.at(i) = saved;
            double fd = (fp - fm) / (2.0 * h);
            double ad = p->has_grad() ? p->grad.at(i) : 0.0;
            double rel = std::fabs(ad - fd) / std::max({std::fabs(ad), std::fabs(fd), 1.0});
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = p->name;
                res.worst_index = i;
            }
        }
    }
    return res;
}

}  // namespace llast
