"""torusgas: interacting particle gases at high temperature on the torus.

Grid-sampled measures and kernels, thermal equilibrium solvers, Gibbs and
Poisson samplers, tagged empirical fields, and rate-function experiments.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    Box,
    GridMeasure,
    SignedGridField,
    TorusGeometry,
    centered_box,
    uniform_measure,
)
from .kernels import (  # noqa: F401
    KernelSpec,
    bernoulli_kernel,
    convolve,
    cosine_kernel,
    interaction_energy,
    riesz_kernel,
    validate_kernel,
    zero_kernel,
)
from .equilibrium import (  # noqa: F401
    ThermalSolution,
    entropy,
    relative_entropy_measures,
    solve_thermal_equilibrium,
    thermal_energy,
    zeta_thermal,
)
from .pointconfig import (  # noqa: F401
    ConfigTransform,
    PointConfig,
    apply_transform,
    config_distance,
    min_separation,
    regularize,
)
from .sampling import (  # noqa: F401
    GibbsSpec,
    SamplerConfig,
    condition_on_count,
    sample_gibbs,
    sample_iid,
    sample_poisson_box,
    sample_poisson_inhomogeneous,
)
from .fields import (  # noqa: F401
    TaggedFieldSample,
    empirical_measure,
    estimate_specific_entropy,
    field_pseudo_distance,
    intensity_profile,
    poisson_relative_entropy_rate,
    tagged_empirical_field,
)
from .experiments import (  # noqa: F401
    discrepancy,
    estimate_next_order_partition,
    estimate_rate,
    fn_energy,
    minimize_hamiltonian,
    riesz_midtemp_constants,
    split_hamiltonian,
)
