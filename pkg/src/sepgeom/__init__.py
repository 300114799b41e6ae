"""Metric volumes, separability probabilities and prior comparisons for few-level quantum states.

Modules:

* :mod:`sepgeom.states` – parameterised density-matrix families, Peres test
* :mod:`sepgeom.metrics` – Bures / monotone / Hilbert–Schmidt tensors, closed forms
* :mod:`sepgeom.husimi` – Husimi distributions and their Fisher metrics
* :mod:`sepgeom.integration` – volumes and separability probabilities
* :mod:`sepgeom.priors` – priors over the Bloch ball, relative entropy, comparative tests
* :mod:`sepgeom.acceptance` – the numbered acceptance criteria
* :mod:`sepgeom.cli` – command-line interface
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DegenerateState,
    DegenerateTotal,
    DimensionError,
    DivergenceError,
    DomainError,
    InfeasiblePoint,
    NonConvergence,
    NonHermitianInput,
    NormalizationFailure,
    SepGeomError,
    SupportMismatch,
    UndefinedBranch,
)
from .states import (  # noqa: E402
    DensityMatrix,
    FamilyChart,
    build_state,
    eigensystem,
    get_chart,
    is_separable,
    partial_transpose,
    reparameterize_ar,
)
from .metrics import (  # noqa: E402
    FFunction,
    MetricTensor,
    VolumeElement,
    bures_tensor,
    closed_form_tensor,
    f_eval,
    hs_tensor,
    monotone_tensor,
    nullity_check,
    numeric_differential,
    volume_element,
)
from .integration import (  # noqa: E402
    QuadratureResult,
    Region,
    closed_form_sepprob,
    integrate,
    scan,
    sep_probability,
    separable_volume,
    total_volume,
)
from .priors import (  # noqa: E402
    MeasurementRecord,
    PriorDensity,
    Verdict,
    biasedness_curve,
    clarke_compare,
    information_gain,
    kl,
    likelihood,
    posterior,
    prior_eval,
    q_truncated_prior,
)
