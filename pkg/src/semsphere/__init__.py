"""Admissibility-first interpretation on the unit sphere.

Evidence is a set of unit-vector witnesses. Their spherical convex hull is
the admissible region; a policy prior may choose a point inside it but can
never widen it, and contradictory evidence yields a refusal rather than an
answer.
"""

from .admissibility import (
    AdmissibleRegion,
    CapRegion,
    FeasibilityCertificate,
    RegionSample,
    Status,
    VolumeEstimate,
    WitnessSet,
    ambiguity,
    build_region,
    cap_contains,
    cap_region_from,
    cap_volume,
    check_feasibility,
    contains,
    contains_many,
    sample_region,
)
from .errors import (
    BothEmpty,
    ConfigParseError,
    ContradictionError,
    DimensionMismatch,
    EmptySampleBudget,
    EmptySet,
    MissingExtractor,
    SemsphereError,
    ToleranceOutOfRange,
    UnreliableEstimate,
    ZeroVector,
)
from .interpret import (
    Generation,
    InterpretOptions,
    Interpretation,
    OptimizerTrace,
    Refusal,
    RefusalReason,
    generate,
    interpret,
    interpret_region,
    map_interpret,
    outcome_to_json,
)
from .policy import (
    Condition,
    Constant,
    FeatureExtractor,
    IndicatorThreshold,
    PolicyPrior,
    PolicyRegime,
    Product,
    RelaxationVerdict,
    SmoothCap,
    eval_prior,
    is_relaxation,
    parse_regime_config,
)
from .sphere import Rotation, geodesic_distance, normalize, random_rotation, sample_uniform_sphere
from .witness_info import (
    CapacityResult,
    WitnessSketch,
    capacity_experiment,
    estimate_overlap,
    jaccard,
    mutual_information,
    sketch,
)

__version__ = "0.1.0"
