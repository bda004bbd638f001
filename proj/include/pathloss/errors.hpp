#pragma once

#include <stdexcept>
#include <string>

namespace pathloss {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define PATHLOSS_DEFINE_ERROR(NAME)                    \
    struct NAME : Error {                              \
        using Error::Error;                            \
        explicit NAME() : Error(#NAME) {}              \
    }

// campaign_data
PATHLOSS_DEFINE_ERROR(MissingColumn);
PATHLOSS_DEFINE_ERROR(EmptyFile);
PATHLOSS_DEFINE_ERROR(AllRowsDropped);
PATHLOSS_DEFINE_ERROR(DeviceTooSmall);

// feature_map
PATHLOSS_DEFINE_ERROR(NonPositiveDistance);
PATHLOSS_DEFINE_ERROR(InconsistentFrequency);

// regression_core
PATHLOSS_DEFINE_ERROR(RankDeficient);
PATHLOSS_DEFINE_ERROR(NotConverged);
PATHLOSS_DEFINE_ERROR(SingularPrior);
PATHLOSS_DEFINE_ERROR(SingularGram);
PATHLOSS_DEFINE_ERROR(ColumnMismatch);

// cross_validation
PATHLOSS_DEFINE_ERROR(DeviceSpanTooShort);
PATHLOSS_DEFINE_ERROR(ZeroVariance);

// anova_inference
PATHLOSS_DEFINE_ERROR(LeverageOne);
PATHLOSS_DEFINE_ERROR(PenalizedModelRejected);
PATHLOSS_DEFINE_ERROR(NotNested);
PATHLOSS_DEFINE_ERROR(PerfectCollinearity);

// residual_distributions
PATHLOSS_DEFINE_ERROR(OptimizerDiverged);
PATHLOSS_DEFINE_ERROR(DegenerateSample);
PATHLOSS_DEFINE_ERROR(EMNotConverged);

// nonparametric_diagnostics
PATHLOSS_DEFINE_ERROR(BandwidthNonPositive);
PATHLOSS_DEFINE_ERROR(AllBandwidthsDegenerate);
PATHLOSS_DEFINE_ERROR(BisectionFailed);
PATHLOSS_DEFINE_ERROR(GroupTooSmall);

// fade_margin
PATHLOSS_DEFINE_ERROR(EmptySample);
PATHLOSS_DEFINE_ERROR(BracketFailure);
PATHLOSS_DEFINE_ERROR(InsufficientReplicates);

// synthetic_oracle
PATHLOSS_DEFINE_ERROR(InvalidTruth);

#undef PATHLOSS_DEFINE_ERROR

} // namespace pathloss
