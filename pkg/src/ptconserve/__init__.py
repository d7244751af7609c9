"""Conserved observables and non-unitary dynamics of PT-symmetric Hamiltonians."""

__version__ = "0.1.0"

from .conserved import (  # noqa: E402
    IntertwinerSet,
    eta1_nonlocal,
    eta_eigenbasis,
    expectation,
    intertwiner_space,
    recursive_intertwiners,
)
from .dynamics import (  # noqa: E402
    ObservableSeries,
    Trajectory,
    angle_series,
    conserved_series,
    evolve,
    norm_series,
    phase_diff_series,
    propagator,
)
from .model import PTModel, build_hpt, canonical_state, parity, spin_xz, to_lossy  # noqa: E402
