"""Dense complex linear algebra for small matrices, including defective ones.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  The
kernel is deliberately tiny: an eigen-solver with a defectiveness flag, a
scaling-and-squaring matrix exponential that never diagonalizes, an SVD null
space, and rank profiles of shifted matrix powers used to read off the size
of Jordan blocks at exceptional points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import NonConvergence, OverflowRisk

RANK_TOL = 1e-10
DEFECTIVE_COND = 1e8
MAX_EXPM_NORM = 200.0
# expm switches to the Schur-based path when ||A||_1 exceeds this multiple of
# the power-norm estimate; random dense matrices sit below 5.
NONNORMAL_RATIO = 8.0

# Higham (2005) backward-error bounds for the [m/m] Pade approximant, 1-norm.
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def as_matrix(M, *, square: bool = True) -> np.ndarray:
    """Return ``M`` as a finite complex128 array, validating its shape."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def opnorm(M) -> float:
    """Spectral (operator 2-) norm."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its largest-magnitude component is real and positive.

    Ties are broken towards the lowest index, counting components within a
    relative 1e-9 of the maximum as tied.
    """
    mag = np.abs(v)
    top = mag.max()
    if top == 0:
        return v
    k = int(np.flatnonzero(mag >= (1 - 1e-9) * top)[0])
    return v * (abs(v[k]) / v[k])


@dataclass(frozen=True)
class EigResult:
    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray  # columns, unit 2-norm
    eigvec_condition: float
    defective_flag: bool


def _sort_key(values: np.ndarray, scale: float):
    # Real parts that differ only by rounding noise must not reorder the
    # spectrum, so sort on a quantized real part.
    q = 1e-9 * max(scale, 1.0)
    return np.lexsort((values.imag, np.round(values.real / q)))


def eig(M) -> EigResult:
    """Eigen-decomposition sorted by real part, then imaginary part.

    Eigenvectors are unit-normalized with a deterministic global phase (see
    :func:`fix_phase`).  ``defective_flag`` is raised when the eigenvector
    matrix has condition number above ``1e8``; downstream code must not use
    the eigenvectors in that case.
    """
    A = as_matrix(M)
    try:
        w, V = scipy.linalg.eig(A)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NonConvergence(f"QR iteration failed to converge: {exc}") from exc
    order = _sort_key(w, opnorm(A))
    w = w[order]
    V = V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    V = np.column_stack([fix_phase(V[:, k]) for k in range(V.shape[1])])
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond):
        cond = np.inf
    return EigResult(w, V, cond, bool(cond > DEFECTIVE_COND))


@lru_cache(maxsize=None)
def _pade_coefficients(m: int) -> tuple[float, ...]:
    f = math.factorial
    return tuple(
        f(2 * m - j) * f(m) / (f(2 * m) * f(j) * f(m - j)) for j in range(m + 1)
    )


def _pade(A: np.ndarray, m: int) -> np.ndarray:
    b = _pade_coefficients(m)
    n = A.shape[0]
    eye = np.eye(n, dtype=A.dtype)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (
            A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
            + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * eye
        )
        V = (
            A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
            + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * eye
        )
    else:
        powers = [eye, A2]
        while len(powers) <= m // 2:
            powers.append(powers[-1] @ A2)
        U = A @ sum(b[2 * k + 1] * powers[k] for k in range(m // 2 + 1))
        V = sum(b[2 * k] * powers[k] for k in range(m // 2 + 1))
    return np.linalg.solve(V - U, V + U)


def expm(M, max_norm: float | None = MAX_EXPM_NORM) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade core.

    No eigen-decomposition is involved, so the result is reliable for
    defective matrices such as a Hamiltonian sitting on an exceptional point.

    Parameters
    ----------
    M : array_like
        Square complex matrix.
    max_norm : float or None
        Refuse (``OverflowRisk``) when the 1-norm of ``M`` exceeds this bound.
        ``None`` disables the check.
    """
    A = as_matrix(M)
    n1 = float(np.linalg.norm(A, 1)) if A.size else 0.0
    if max_norm is not None and n1 > max_norm:
        raise OverflowRisk(
            f"‖M‖₁ = {n1:.6g} exceeds the configured bound {max_norm:.6g}"
        )
    if n1 == 0.0:
        return np.eye(A.shape[0], dtype=np.complex128)
    # Scaling is chosen from ||A^k||^(1/k) rather than ||A||, which avoids
    # over-scaling (and the rounding it amplifies) for non-normal A.
    m, s, eta = _pade_parameters(A, n1)
    if n1 <= NONNORMAL_RATIO * eta:
        R = _pade(A / 2.0**s, m)
        for _ in range(s):
            R = R @ R
        return R
    # Strongly non-normal: ||A|| far exceeds ||A^k||^(1/k).  Work on the
    # unitary Schur form T = Q^H A Q and, along the squaring phase, restore
    # the diagonal and first superdiagonal of exp(2^-j T) from closed forms.
    # A Schur form exists and is well conditioned even when A is defective.
    T, Q = scipy.linalg.schur(A, output="complex")
    m, s, _ = _pade_parameters(T, float(np.linalg.norm(T, 1)))
    X = _pade(T / 2.0**s, m)
    _fix_triangle(X, T / 2.0**s)
    for j in range(s - 1, -1, -1):
        X = X @ X
        _fix_triangle(X, T / 2.0**j)
    return Q @ np.triu(X) @ Q.conj().T


def _pade_parameters(A: np.ndarray, n1: float) -> tuple[int, int, float]:
    """Pade degree, number of squarings, and the power-norm estimate used.

    Scaling is chosen from ``||A^k||^(1/k)`` rather than ``||A||``, which
    avoids over-scaling (and the rounding it amplifies) for non-normal A.
    """
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    d4 = _norm1(A4) ** 0.25
    d6 = _norm1(A6) ** (1 / 6)
    eta1 = max(d4, d6)
    for m in (3, 5):
        if eta1 <= _PADE_THETA[m] and _ell(A, n1, m) == 0:
            return m, 0, eta1
    A8 = A4 @ A4
    d8 = _norm1(A8) ** 0.125
    eta3 = max(d6, d8)
    for m in (7, 9):
        if eta3 <= _PADE_THETA[m] and _ell(A, n1, m) == 0:
            return m, 0, eta3
    d10 = _norm1(A8 @ A2) ** 0.1
    eta5 = min(eta3, max(d8, d10))
    s = max(0, math.ceil(math.log2(eta5 / _PADE_THETA[13]))) if eta5 > 0 else 0
    s += _ell(A / 2.0**s, n1 / 2.0**s, 13)
    return 13, s, eta5


def _fix_triangle(X: np.ndarray, T: np.ndarray) -> None:
    """Overwrite diag and superdiag of ``X ~ exp(T)`` (T upper triangular)."""
    a = np.diag(T)
    ea = np.exp(a)
    idx = np.arange(len(a))
    X[idx, idx] = ea
    if len(a) < 2:
        return
    lo, hi = a[:-1], a[1:]
    z = (hi - lo) / 2
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    sinhc = np.where(small, 1 + z * z / 6, np.sinh(zs) / zs)
    X[idx[:-1], idx[1:]] = np.diag(T, 1) * np.exp((lo + hi) / 2) * sinhc


def _norm1(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 1))


def _ell(A: np.ndarray, n1: float, m: int) -> int:
    """Extra squarings needed so the Pade truncation error stays below unit
    roundoff, judged from the leading term of the error series."""
    f = math.factorial
    c = f(m) ** 2 / (f(2 * m) * f(2 * m + 1))
    v = np.ones(A.shape[0])
    absA = np.abs(A)
    for _ in range(2 * m + 1):
        v = v @ absA
    alpha = c * float(v.max()) / n1
    if alpha == 0:
        return 0
    return max(0, math.ceil(math.log2(alpha / 2.0**-53) / (2 * m)))


def singular_values(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.complex128)
    if M.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(M)


def numerical_rank(M, tol: float = RANK_TOL, scale: float | None = None) -> int:
    """Number of singular values above ``tol * scale``.

    ``scale`` defaults to the largest singular value of ``M``; a matrix whose
    scale is zero has rank zero.
    """
    s = singular_values(M)
    if s.size == 0:
        return 0
    ref = s[0] if scale is None else scale
    if ref == 0:
        return 0
    return int(np.count_nonzero(s > tol * ref))


def nullspace(M, tol: float = RANK_TOL) -> list[np.ndarray]:
    """Orthonormal basis of the right null space of a (possibly rectangular) matrix.

    A right singular vector belongs to the null space when its singular value
    is below ``tol`` times the largest one.  Columns beyond the row count are
    always included.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {A.shape}")
    ncols = A.shape[1]
    if A.size == 0:
        return [np.eye(ncols, dtype=np.complex128)[:, k] for k in range(ncols)]
    _, s, Vh = scipy.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    full = np.zeros(ncols)
    full[: s.size] = s
    null = np.flatnonzero(full <= tol * smax) if smax > 0 else np.arange(ncols)
    return [Vh[k].conj() for k in null]


def rank_profile(M, lam: complex, kmax: int, tol: float = RANK_TOL) -> list[int]:
    """Numerical ranks of ``(M - lam*I)**k`` for ``k = 1..kmax``.

    The threshold for the ``k``-th power is ``tol * sigma_max(M - lam*I)**k``,
    the natural size of that power.  Measuring against the power's own
    largest singular value would make a nilpotent power, which is rounding
    noise, look like it has full rank.
    """
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    A = as_matrix(M)
    B = A - lam * np.eye(A.shape[0])
    base = opnorm(B)
    ranks = []
    P = np.eye(A.shape[0], dtype=np.complex128)
    for k in range(1, kmax + 1):
        P = P @ B
        ranks.append(numerical_rank(P, tol, scale=base**k))
    return ranks
