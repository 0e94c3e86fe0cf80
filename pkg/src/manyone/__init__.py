"""Secrecy sum-rate bounds and a layered nested-lattice scheme for the
Gaussian many-to-one interference channel with confidential messages."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ChannelConfig,
    GaussianNoiseSpec,
    ValidationError,
    cap,
    max_gain_c,
    validate,
)
from .bounds import (  # noqa: E402
    BoundsReport,
    dof_sweep,
    f_of_K,
    gap_report,
    layer_rate_caps,
    layer_sum_contributions,
    lower_bound,
    upper_bound,
)
from .layering import allocate_power, build_plan, check_alignment, compute_delimiters  # noqa: E402
from .lattice import NestedLatticePair, carry_reconstruct, encode, exact_leakage, wrap_probability  # noqa: E402
from .simulator import end_to_end_report  # noqa: E402
