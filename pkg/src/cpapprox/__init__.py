"""Exact discrete computations for compound Poisson approximation of
triangular-array row sums, with Levy, Prokhorov, Kolmogorov and total
variation distances."""

__version__ = "0.1.0"

from .lattice import (
    AtomBudgetExceeded,
    IncommensurableError,
    LatticeDistribution,
    LatticeError,
    binomial,
    cdf,
    convolve,
    delta,
    from_atoms,
    mix,
    power,
    reflect,
    scale,
    shift,
    use_limits,
)
from .compound import CompoundPoissonSpec, compound_poisson, poisson
from .metrics import (
    FlowCapExceeded,
    IntervalUnion,
    LatticeNeighborhood,
    MetricResult,
    certified_prokhorov_floor,
    kolmogorov_distance,
    levy_distance,
    prokhorov_distance,
    prokhorov_lower_bound,
    sup_shifted_lattice_mass,
    total_variation,
)
from .accompanying import (
    ArrayRow,
    CenteringRule,
    MixtureComponent,
    accompanying_law,
    bound_budget,
    row_convolution,
)
from .experiments import bound_ratio_sweep, lemma1_sweep, run_example1, run_example2

__all__ = [name for name in dir() if not name.startswith("_")]
