#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "error.hpp"

namespace varaudit {

// Misclassification costs: c01 for a false positive (truth 0, predicted 1),
// c10 for a false negative. Correct predictions cost 0.
class CostModel {
public:
    CostModel() = default;
    CostModel(double c01, double c10) : c01_(c01), c10_(c10) {
        if (!(c01 > 0.0) || !(c10 > 0.0) || !std::isfinite(c01) || !std::isfinite(c10))
            throw InputError("costs must be positive and finite, got (" + std::to_string(c01) + ", " +
                             std::to_string(c10) + ")");
    }

    double c01() const noexcept { return c01_; }
    double c10() const noexcept { return c10_; }

    // Loss of predicting `predicted` when the observed label is `observed`.
    double loss(std::uint8_t observed, std::uint8_t predicted) const noexcept {
        if (observed == predicted) return 0.0;
        return observed == 0 ? c01_ : c10_;
    }

    friend bool operator==(const CostModel&, const CostModel&) = default;

private:
    double c01_ = 1.0;
    double c10_ = 1.0;
};

// Decision threshold minimizing expected cost: predict 1 iff P(o=1|x) >= tau.
inline double cost_threshold(const CostModel& costs) noexcept {
    return costs.c01() / (costs.c01() + costs.c10());
}

}  // namespace varaudit
