"""PT-symmetric tight-binding models.

The reference family is ``H = -J Sx + i gamma Sz`` built from spin-``j``
matrices with ``j = (d - 1)/2``: nearest-neighbour hopping that is mirror
symmetric, and an imaginary on-site potential that runs linearly from gain
on site 1 to loss on site ``d``.  For ``d = 4`` this is the four-site chain
with eigenvalues ``{-3/2, -1/2, 1/2, 3/2} * sqrt(J**2 - gamma**2)`` and a
fourth-order exceptional point at ``gamma = J``.

Units: ``hbar = 1``, energies in units of ``J``, times in ``1/J``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DefectiveEigenbasis, DimensionTooSmall

SYMMETRY_TOL = 1e-12

CANONICAL_STATES = ("psi1", "psi2", "psi3", "psi4")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


def spin_xz(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Spin-``(d-1)/2`` matrices ``Sx`` and ``Sz`` in the ``Sz`` eigenbasis.

    ``Sz = diag(j, j-1, ..., -j)`` and ``Sx`` is real symmetric tridiagonal
    with ``Sx[k-1, k] = sqrt(k*(d-k))/2`` for ``k = 1..d-1``.
    """
    if d < 2:
        raise DimensionTooSmall(f"need d >= 2, got {d}")
    j = (d - 1) / 2
    k = np.arange(1, d)
    off = 0.5 * np.sqrt(k * (d - k))
    Sx = np.diag(off, 1) + np.diag(off, -1)
    Sz = np.diag(j - np.arange(d))
    return Sx.astype(np.complex128), Sz.astype(np.complex128)


def parity(d: int) -> np.ndarray:
    """Mirror operator: ones on the anti-diagonal."""
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    return np.fliplr(np.eye(d)).astype(np.complex128)


@dataclass(frozen=True)
class SymmetryReport:
    pt_residual: float
    transpose_residual: float
    hermitian_residual: float


def _rel(defect: np.ndarray, H: np.ndarray) -> float:
    scale = linalg.opnorm(H)
    d = linalg.opnorm(defect)
    return d / scale if scale > 0 else d


def check_symmetries(H, P) -> SymmetryReport:
    """Relative defects of ``P H* P = H``, ``H^T = H`` and ``H^dagger = H``."""
    H = linalg.as_matrix(H)
    P = linalg.as_matrix(P)
    if H.shape != P.shape:
        raise ValueError(f"shape mismatch: H {H.shape} vs P {P.shape}")
    return SymmetryReport(
        pt_residual=_rel(P @ H.conj() @ P - H, H),
        transpose_residual=_rel(H.T - H, H),
        hermitian_residual=_rel(H.conj().T - H, H),
    )


@dataclass(frozen=True)
class PTModel:
    """A PT-symmetric Hamiltonian together with its parity operator.

    ``J`` sets the unit of energy; for models that do not come from the spin
    family it is simply the normalization used by the recursive intertwiner
    construction.
    """

    d: int
    J: float
    gamma: float
    H: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "H", _frozen(self.H))
        object.__setattr__(self, "P", _frozen(self.P))
        if self.H.shape != (self.d, self.d) or self.P.shape != (self.d, self.d):
            raise ValueError("H and P must be d x d")

    def symmetries(self) -> SymmetryReport:
        return check_symmetries(self.H, self.P)

    def is_valid(self, tol: float = SYMMETRY_TOL) -> bool:
        """True when P**2 = 1, PH*P = H and H^T = H hold to ``tol``."""
        rep = self.symmetries()
        p2 = linalg.opnorm(self.P @ self.P - np.eye(self.d))
        return p2 <= tol and rep.pt_residual <= tol and rep.transpose_residual <= tol

    @property
    def transpose_symmetric(self) -> bool:
        return self.symmetries().transpose_residual <= SYMMETRY_TOL


def build_hpt(d: int, J: float = 1.0, gamma: float = 0.0) -> PTModel:
    """``H = -J Sx + i gamma Sz`` with anti-diagonal parity."""
    if J <= 0:
        raise ValueError(f"J must be positive, got {J}")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    Sx, Sz = spin_xz(d)
    return PTModel(d, float(J), float(gamma), -J * Sx + 1j * gamma * Sz, parity(d))


def random_pt_model(d: int, rng: np.random.Generator, J: float = 1.0) -> PTModel:
    """Random transpose-symmetric PT-symmetric Hamiltonian ``A + iC``.

    ``A`` and ``C`` are real symmetric with ``PAP = A`` and ``PCP = -C``;
    entries start uniform on [-1, 1] before symmetrization.
    """
    if d < 2:
        raise DimensionTooSmall(f"need d >= 2, got {d}")
    P = parity(d).real
    A = rng.uniform(-1.0, 1.0, (d, d))
    C = rng.uniform(-1.0, 1.0, (d, d))
    A = (A + A.T) / 2
    C = (C + C.T) / 2
    A = (A + P @ A @ P) / 2
    C = (C - P @ C @ P) / 2
    return PTModel(d, float(J), float("nan"), A + 1j * C, parity(d))


def min_spacing(values: np.ndarray) -> float:
    """Smallest distance between two entries of ``values``."""
    v = np.asarray(values)
    if v.size < 2:
        return np.inf
    diff = np.abs(v[:, None] - v[None, :])
    return float(diff[np.triu_indices(v.size, 1)].min())


def is_nondegenerate(model: PTModel, rel_gap: float = 1e-6) -> bool:
    """Whether all eigenvalues are separated by more than ``rel_gap * ||H||``."""
    res = linalg.eig(model.H)
    if res.defective_flag:
        return False
    return min_spacing(res.eigenvalues) > rel_gap * linalg.opnorm(model.H)


def to_lossy(model: PTModel) -> tuple[np.ndarray, float]:
    """Passive (all-loss) version of the Hamiltonian.

    Returns ``(H_L, shift)`` with ``shift`` the largest on-site gain and
    ``H_L = H - i*shift*1``, so that ``exp(-iHt) = exp(-iH_L t) * exp(shift*t)``.
    """
    shift = float(np.max(np.diag(model.H).imag))
    return model.H - 1j * shift * np.eye(model.d), shift


_NAME = re.compile(r"^(psi|E|v)(\d+)$")


def site_state(name: str, d: int) -> np.ndarray:
    """One of the four canonical site-basis initial states.

    For ``d != 4`` site 4 is read as the last site ``d`` and ``psi2`` is the
    uniform superposition.
    """
    e = np.eye(d, dtype=np.complex128)
    if name == "psi1":
        return e[0].copy()
    if name == "psi2":
        return np.ones(d, dtype=np.complex128) / np.sqrt(d)
    if name == "psi3":
        return (e[0] + np.sqrt(2) * e[-1]) / np.sqrt(3)
    if name == "psi4":
        return (e[0] + e[-1]) / np.sqrt(2)
    raise ValueError(f"unknown site state {name!r}")


def eigenmode(model: PTModel, j: int) -> np.ndarray:
    """Unit-normalized right eigenvector ``E_j`` (1-based, sorted by eigenvalue).

    At an exceptional point only a single eigenvector exists; it is returned
    for ``j = 1`` and every other index raises ``DefectiveEigenbasis``.
    """
    if not 1 <= j <= model.d:
        raise ValueError(f"eigenmode index {j} out of range 1..{model.d}")
    res = linalg.eig(model.H)
    if not res.defective_flag:
        return res.right_eigenvectors[:, j - 1].copy()
    if j != 1:
        raise DefectiveEigenbasis(
            f"E{j} requested but H is defective (eigvec condition "
            f"{res.eigvec_condition:.3g})"
        )
    lam = np.trace(model.H) / model.d
    null = linalg.nullspace(model.H - lam * np.eye(model.d))
    if len(null) != 1:
        raise DefectiveEigenbasis(
            f"expected a single eigenvector at the exceptional point, found {len(null)}"
        )
    v = null[0]
    return linalg.fix_phase(v / np.linalg.norm(v))


def canonical_state(name: str, model: PTModel) -> np.ndarray:
    """Resolve ``psi1..psi4``, ``E1..Ed`` or ``v1..vd`` to an amplitude vector."""
    m = _NAME.match(name)
    if m is None:
        raise ValueError(f"unknown state name {name!r}")
    kind, idx = m.group(1), int(m.group(2))
    if kind == "psi":
        if name not in CANONICAL_STATES:
            raise ValueError(f"unknown state name {name!r}")
        return site_state(name, model.d)
    if kind == "E":
        return eigenmode(model, idx)
    from .conserved import eta_eigenbasis, recursive_intertwiners

    if not 1 <= idx <= model.d:
        raise ValueError(f"v index {idx} out of range 1..{model.d}")
    basis = eta_eigenbasis(recursive_intertwiners(model), model)
    return basis[idx - 1].copy()
