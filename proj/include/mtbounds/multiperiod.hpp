#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtbounds/dual_hedge.hpp"
#include "mtbounds/lower_coupling.hpp"
#include "mtbounds/pair.hpp"

namespace mtbounds {

/// A consecutive pair failed validation; `step` is 1-based.
struct SequenceStepError : std::runtime_error {
    SequenceStepError(std::size_t step_, const std::string& what_)
        : std::runtime_error("step " + std::to_string(step_) + ": " + what_),
          step(step_) {}
    std::size_t step;
};

struct SequenceStep {
    std::size_t index = 0;  // 1-based step number
    double price = 0.0;
    double dual = 0.0;
    double kappa = 0.0;
    std::unique_ptr<CouplingMap> map;
};

struct SequenceBound {
    double total = 0.0;
    std::vector<SequenceStep> steps;
};

/// Lower bound for the sum of per-step straddles over a marginal sequence:
/// per-step prices added up (tight when every consecutive pair satisfies
/// the dispersion assumption).
inline SequenceBound bound_sequence(const std::vector<Measure>& marginals,
                                    bool with_dual = false) {
    if (marginals.size() < 2) {
        throw std::invalid_argument("bound_sequence: need at least 2 marginals");
    }
    SequenceBound out;
    for (std::size_t i = 0; i + 1 < marginals.size(); ++i) {
        SequenceStep step;
        step.index = i + 1;
        try {
            MarginalPair pair = decompose(marginals[i], marginals[i + 1]);
            step.kappa = pair.kappa;
            step.map = std::make_unique<CouplingMap>(std::move(pair));
            step.price = step.map->primal_price();
            if (with_dual && !step.map->identical()) {
                step.dual = HedgePair(*step.map).dual_value();
            }
        } catch (const std::exception& e) {
            throw SequenceStepError(i + 1, e.what());
        }
        out.total += step.price;
        out.steps.push_back(std::move(step));
    }
    return out;
}

}  // namespace mtbounds
