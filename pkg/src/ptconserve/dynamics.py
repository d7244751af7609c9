"""Non-unitary time evolution and the time series derived from it.

Every state is obtained from ``t = 0`` with its own matrix exponential, so
nothing accumulates from step to step and conservation checks measure the
physics rather than an integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .conserved import IntertwinerSet, expectation
from .model import PTModel

PHASE_MASK_TOL = 1e-12
NORM_CAP = 1e12
DEFAULT_SAMPLES = 400


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), d)
    model: PTModel

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]


@dataclass(frozen=True)
class ObservableSeries:
    """A real time series; ``values`` is 1-d, or 2-d with one column per component.

    ``mask`` marks undefined entries (True = undefined); those values are NaN.
    """

    times: np.ndarray
    values: np.ndarray
    label: str
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mask is None:
            object.__setattr__(self, "mask", np.zeros(self.values.shape, dtype=bool))
        if len(self.values) != len(self.times):
            raise ValueError("values and times differ in length")

    def column(self, k: int, label: str | None = None) -> "ObservableSeries":
        """One component of a multi-column series."""
        return ObservableSeries(
            self.times, self.values[:, k], label or f"{self.label}[{k}]", self.mask[:, k]
        )


def time_grid(t_max: float, samples: int = DEFAULT_SAMPLES, t_min: float = 0.0) -> np.ndarray:
    if samples < 2:
        raise ValueError("need at least two samples")
    if t_max <= t_min:
        raise ValueError("t_max must exceed t_min")
    return np.linspace(t_min, t_max, samples)


def propagator(model: PTModel, t: float, max_norm: float | None = linalg.MAX_EXPM_NORM) -> np.ndarray:
    """``G(t) = exp(-i H t)``."""
    return linalg.expm(-1j * t * model.H, max_norm=max_norm)


def evolve(
    model: PTModel,
    psi0,
    times,
    max_norm: float | None = linalg.MAX_EXPM_NORM,
) -> Trajectory:
    """States ``G(t) psi0`` on a strictly increasing time grid."""
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != (model.d,):
        raise ValueError(f"initial state must have {model.d} amplitudes")
    if not np.all(np.isfinite(psi0)) or np.linalg.norm(psi0) == 0:
        raise ValueError("initial state must be finite and non-zero")
    times = np.array(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be a strictly increasing 1-d grid")
    states = np.empty((times.size, model.d), dtype=np.complex128)
    for k, t in enumerate(times):
        states[k] = psi0 if t == 0 else propagator(model, t, max_norm) @ psi0
    times.setflags(write=False)
    states.setflags(write=False)
    return Trajectory(times, states, model)


def growth_rate(model: PTModel) -> float:
    """Largest imaginary part of the spectrum (amplitude growth rate)."""
    return float(max(linalg.eig(model.H).eigenvalues.imag.max(), 0.0))


def capped_t_max(model: PTModel, psi0, t_max: float, n_cap: float = NORM_CAP) -> float:
    """Largest time up to ``t_max`` for which ``N(t)`` stays below ``n_cap``.

    Only binds in the broken phase.  The estimate from the growth rate is
    refined by direct evaluation so the prefactor is accounted for.
    """
    rate = growth_rate(model)
    if rate <= 1e-8 * max(linalg.opnorm(model.H), 1.0):
        return t_max
    t = min(t_max, math.log(n_cap) / (2 * rate))
    psi0 = np.asarray(psi0, dtype=np.complex128)
    while t > 0 and np.linalg.norm(propagator(model, t, None) @ psi0) ** 2 > n_cap:
        t *= 0.99
    return t


def norm_series(traj: Trajectory) -> ObservableSeries:
    """``N(t) = <psi(t)|psi(t)>``."""
    n = np.sum(np.abs(traj.states) ** 2, axis=1)
    return ObservableSeries(traj.times, n, "norm")


def conserved_series(traj: Trajectory, etaset: IntertwinerSet) -> list[ObservableSeries]:
    """``eta_i(t) = <psi(t)|eta_i|psi(t)>`` for every member of the set."""
    out = []
    for i, eta in enumerate(etaset.etas, start=1):
        vals = np.array([expectation(eta, psi) for psi in traj.states])
        out.append(ObservableSeries(traj.times, vals, f"eta_{i}"))
    return out


def phase_diff_series(traj: Trajectory) -> ObservableSeries:
    """Adjacent-site phase differences ``theta_k = arg a_k - arg a_{k-1}``, k = 2..d.

    Values lie in (-pi, pi].  An entry is masked when either amplitude is
    below ``1e-12 * ||psi(t)||``.
    """
    a = traj.states
    theta = np.angle(a[:, 1:] * a[:, :-1].conj())
    theta = np.where(theta <= -np.pi, np.pi, theta)
    scale = np.linalg.norm(a, axis=1)[:, None]
    small = np.abs(a) < PHASE_MASK_TOL * scale
    mask = small[:, 1:] | small[:, :-1]
    theta = np.where(mask, np.nan, theta)
    return ObservableSeries(traj.times, theta, "theta", mask)


def angle_series(traj: Trajectory, basis) -> list[ObservableSeries]:
    """Angles ``Phi_j(t) = arccos(|<v_j|psi(t)>| / ||psi(t)||)`` in [0, pi/2].

    Evaluated as ``atan2(||psi_perp||, |<v_j|psi>|)``, which is the same angle
    but keeps full relative precision near 0 and pi/2.
    """
    V = np.stack([np.asarray(v, dtype=np.complex128) for v in basis], axis=1)
    gram = V.conj().T @ V
    if np.abs(gram - np.eye(V.shape[1])).max() > 1e-10:
        raise ValueError("basis must be orthonormal")
    out = []
    for j in range(V.shape[1]):
        v = V[:, j]
        overlap = traj.states @ v.conj()
        perp = traj.states - overlap[:, None] * v[None, :]
        phi = np.arctan2(np.linalg.norm(perp, axis=1), np.abs(overlap))
        out.append(ObservableSeries(traj.times, phi, f"phi_{j + 1}"))
    return out


def max_drift(series: ObservableSeries) -> float:
    """``max_t |x(t) - x(0)|``."""
    return float(np.max(np.abs(series.values - series.values[0])))
