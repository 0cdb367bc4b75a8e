#pragma once

#include <cstdint>

#include "svflow/errors.hpp"

namespace svf {

enum class TrainMode { supervised, unsupervised };

struct TrainConfig {
    TrainMode mode = TrainMode::unsupervised;
    double lambda = 0.1;
    int smooth_order = 1;
    double lr0 = 1e-2;
    double momentum = 0.9;
    double plateau_factor = 0.5;
    int plateau_patience = 10;
    double plateau_rel_threshold = 1e-4;
    double lr_stop = 1e-6;
    int batch_size = 8;
    std::uint64_t seed = 1;
    int max_epochs = 500;    // hard stop in addition to the lr stop
    bool deterministic = true;

    void validate() const {
        if (lambda < 0.0 || lambda > 1.0) throw DataError("lambda must be in [0,1]");
        if (smooth_order != 1 && smooth_order != 2) throw DataError("smooth_order must be 1 or 2");
        if (!(lr_stop < lr0)) throw DataError("lr_stop must be below lr0");
        if (batch_size < 1) throw DataError("batch_size must be >= 1");
        if (plateau_patience < 1) throw DataError("plateau_patience must be >= 1");
        if (max_epochs < 1) throw DataError("max_epochs must be >= 1");
        if (!(plateau_factor > 0.0 && plateau_factor < 1.0))
            throw DataError("plateau_factor must be in (0,1)");
    }
};

}  // namespace svf
