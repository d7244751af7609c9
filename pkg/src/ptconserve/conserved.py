"""Conserved observables of PT-symmetric, transpose-symmetric Hamiltonians.

An observable ``eta`` is conserved under ``G(t) = exp(-iHt)`` exactly when it
intertwines ``H`` with its adjoint, ``eta H = H^dagger eta``.  For ``H = H^T``
with PT symmetry the parity operator is such an intertwiner, and every
product ``eta H / J`` of an intertwiner with the Hamiltonian is another one.
Starting from parity, ``d`` steps give a complete, linearly independent set
whenever the spectrum is non-degenerate.

:func:`intertwiner_space` solves the ``d**2`` linear equations directly and
serves as an independent check on the recursive construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .errors import NotHermitian, WrongDimension
from .model import PTModel, spin_xz

EXPECTATION_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class IntertwinerSet:
    etas: tuple[np.ndarray, ...]
    residuals: tuple[float, ...]
    independent: bool
    gram_rank: int
    # Completeness is only claimed for transpose-symmetric H.
    transpose_symmetric: bool = True

    def __len__(self):
        return len(self.etas)

    def __getitem__(self, i):
        return self.etas[i]


def intertwining_residual(eta, H) -> float:
    """``||eta H - H^dagger eta|| / (||eta|| ||H||)``."""
    eta = np.asarray(eta)
    H = np.asarray(H)
    scale = linalg.opnorm(eta) * linalg.opnorm(H)
    defect = linalg.opnorm(eta @ H - H.conj().T @ eta)
    return defect / scale if scale > 0 else defect


def gram_matrix(mats) -> np.ndarray:
    """Gram matrix under the trace inner product ``<A, B> = tr(A^dagger B)``."""
    X = np.stack([np.asarray(m).ravel() for m in mats], axis=1)
    return X.conj().T @ X


def recursive_intertwiners(model: PTModel, count: int | None = None) -> IntertwinerSet:
    """Parity followed by repeated right multiplication with ``H/J``.

    ``count`` defaults to ``d``; asking for more returns the redundant
    members beyond ``eta_d`` too, which is how termination is checked.
    """
    n = model.d if count is None else count
    Hn = model.H / model.J
    etas = [np.array(model.P)]
    for _ in range(1, n):
        etas.append(etas[-1] @ Hn)
    for e in etas:
        e.setflags(write=False)
    residuals = tuple(intertwining_residual(e, model.H) for e in etas)
    rank = linalg.numerical_rank(gram_matrix(etas[: model.d]))
    return IntertwinerSet(
        etas=tuple(etas),
        residuals=residuals,
        independent=rank == model.d,
        gram_rank=rank,
        transpose_symmetric=model.transpose_symmetric,
    )


def termination_defect(model: PTModel) -> float:
    """Relative distance of ``eta_{d+1}`` from its Cayley-Hamilton expansion.

    With ``p(x) = x**d + c[d-1] x**(d-1) + ... + c[0]`` the characteristic
    polynomial of ``H/J``, ``eta_{d+1} = -sum_k c[k] eta_{k+1}``.
    """
    ext = recursive_intertwiners(model, model.d + 1)
    coeffs = np.poly(model.H / model.J)  # highest power first, leading 1
    low = coeffs[::-1][: model.d]  # c[0] .. c[d-1]
    combo = -sum(c * e for c, e in zip(low, ext.etas[: model.d]))
    top = ext.etas[model.d]
    # At an exceptional point eta_{d+1} is pure rounding noise; measure it
    # against the natural size ||P|| ||H/J||**d instead.
    ref = max(linalg.opnorm(top), linalg.opnorm(model.H / model.J) ** model.d)
    return linalg.opnorm(top - combo) / ref


def intertwiner_space(H, tol: float = linalg.RANK_TOL) -> list[np.ndarray]:
    """Basis of all ``eta`` with ``eta H = H^dagger eta``, by brute force.

    The map ``eta -> eta H - H^dagger eta`` is written as a ``d**2 x d**2``
    matrix acting on row-major vectorized ``eta`` and its null space is taken
    by SVD.  The basis is orthonormal under the trace inner product.
    """
    H = linalg.as_matrix(H)
    d = H.shape[0]
    eye = np.eye(d)
    L = np.kron(eye, H.T) - np.kron(H.conj().T, eye)
    return [v.reshape(d, d) for v in linalg.nullspace(L, tol)]


def principal_angles(span_a, span_b) -> np.ndarray:
    """Principal angles between the spans of two lists of matrices.

    Members are normalized before comparison so that the very different
    magnitudes of ``eta_1 .. eta_d`` do not affect the orthogonalization.
    """

    def stack(mats):
        cols = [np.asarray(m).ravel() for m in mats]
        return np.stack([c / np.linalg.norm(c) for c in cols], axis=1)

    return scipy.linalg.subspace_angles(stack(span_a), stack(span_b))


def expectation(eta, psi) -> float:
    """Real expectation value ``<psi|eta|psi>`` of a Hermitian observable.

    Raises ``NotHermitian`` if the imaginary part exceeds
    ``1e-10 * ||eta|| * ||psi||**2``.
    """
    eta = np.asarray(eta)
    psi = np.asarray(psi, dtype=np.complex128)
    val = np.vdot(psi, eta @ psi)
    bound = EXPECTATION_IMAG_TOL * linalg.opnorm(eta) * np.vdot(psi, psi).real
    if abs(val.imag) > bound:
        raise NotHermitian(f"Im<psi|eta|psi> = {val.imag:.3e} exceeds {bound:.3e}")
    return float(val.real)


def eta1_nonlocal(psi) -> float:
    """Parity expectation on four sites, ``sum_k conj(a_{5-k}) a_k``."""
    a = np.asarray(psi, dtype=np.complex128)
    if a.shape != (4,):
        raise WrongDimension(f"the four-site form needs 4 amplitudes, got {a.shape}")
    return float(sum(np.conj(a[3 - k]) * a[k] for k in range(4)).real)


def eigenmode_expectations(etaset: IntertwinerSet, model: PTModel) -> np.ndarray:
    """``out[i, j] = <E_j|eta_i|E_j>`` for unit-normalized eigenmodes.

    At an exceptional point only the single eigenvector is available and the
    result has one column.
    """
    from .model import eigenmode

    res = linalg.eig(model.H)
    modes = [eigenmode(model, 1)] if res.defective_flag else [
        res.right_eigenvectors[:, j] for j in range(model.d)
    ]
    out = np.empty((len(etaset.etas), len(modes)))
    for i, eta in enumerate(etaset.etas):
        for j, v in enumerate(modes):
            out[i, j] = expectation(eta, v)
    return out


def eta_eigenbasis(etaset: IntertwinerSet, model: PTModel) -> list[np.ndarray]:
    """Orthonormal eigenvectors ``v_1 .. v_d`` of ``eta_1``.

    Parity eigenspaces are degenerate, so inside each one the basis is fixed
    by diagonalizing the Hermitian-limit Hamiltonian ``-J Sx`` (which commutes
    with parity).  Ordering: descending ``eta_1`` eigenvalue, then ascending
    ``Sx`` eigenvalue.
    """
    eta1 = np.asarray(etaset.etas[0])
    if linalg.opnorm(eta1 - eta1.conj().T) > 1e-12 * linalg.opnorm(eta1):
        raise NotHermitian("eta_1 is not Hermitian")
    Sx, _ = spin_xz(model.d)
    w, Q = np.linalg.eigh(eta1)
    groups: list[list[int]] = []
    for k in np.argsort(-w, kind="stable"):
        if groups and abs(w[groups[-1][0]] - w[k]) <= 1e-8 * max(1.0, abs(w[k])):
            groups[-1].append(int(k))
        else:
            groups.append([int(k)])
    basis = []
    for g in groups:
        B = Q[:, g]
        sw, U = np.linalg.eigh(B.conj().T @ Sx @ B)
        for k in np.argsort(sw, kind="stable"):
            v = B @ U[:, k]
            basis.append(linalg.fix_phase(v / np.linalg.norm(v)))
    return basis
