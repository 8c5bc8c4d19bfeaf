"""RAID storage reliability modelling toolkit."""

__version__ = "0.1.0"

from .builder import (
    CorrelationSpec,
    DiskModelSpec,
    RebuildSpec,
    build_detailed_disk,
    build_raid_ctmc,
    build_system_ctmc,
    ddf_curve,
    default_detailed_spec,
)
from .ctmc import (
    Ctmc,
    SolveOptions,
    StateBudgetExceeded,
    absorption_probability,
    merge_absorbing,
    mtta,
    transient,
    transient_curve,
)
from .design import SpanPlan, compare_configs, correlated_span_rate, greedy_span
from .distributions import (
    ErlangK,
    Exponential,
    Moments,
    NoValidFit,
    PhaseType3,
    Weibull,
    fit_erlang,
    fit_phase3,
    ks_exponentiality,
    max_cdf_diff,
    raw_moments,
)
from .hierarchy import (
    DecompositionPlan,
    DiscretizationParams,
    decompose_solve,
    discretized_mean,
    equivalent_component,
    estimate_p,
    independent_scale,
)
from .simulate import (
    RawGroupSpec,
    SimEstimate,
    SimOptions,
    simulate_k_percent,
    simulate_min_of_subsystems,
    simulate_mtta,
    simulate_raw,
)
from .topology import ComponentSpec, EnclosurePolicy, RaidGroup, Topology, enclosure_rate
