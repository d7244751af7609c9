"""Acceptance criteria for the toolkit, runnable as ``ptconserve verify``.

Each criterion returns a :class:`Criterion` with a pass flag and a one-line
detail string; tolerances are fixed here and never tuned at run time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import analysis, conserved, dynamics, linalg
from .dynamics import ObservableSeries
from .errors import PTConserveError
from .model import build_hpt, is_nondegenerate, random_pt_model, site_state

GAMMAS = (0.0, 0.2, 1.0, 1.2)
PSI_STATES = ("psi1", "psi2", "psi3", "psi4")
SAMPLES = 400
DEFAULT_SEED = 20200


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  [{self.number:2d}] {self.name}: {self.detail}"


def _run(model, psi0, t_max, samples=SAMPLES, max_norm=None):
    return dynamics.evolve(model, psi0, dynamics.time_grid(t_max, samples), max_norm=max_norm)


def c01_conservation(seed: int = DEFAULT_SEED) -> Criterion:
    worst = 0.0
    where = ""
    for g in GAMMAS:
        model = build_hpt(4, 1.0, g)
        etaset = conserved.recursive_intertwiners(model)
        for s in PSI_STATES:
            traj = _run(model, site_state(s, 4), 8.0)
            nmax = float(dynamics.norm_series(traj).values.max())
            for i, (series, eta) in enumerate(zip(dynamics.conserved_series(traj, etaset), etaset.etas), 1):
                rel = dynamics.max_drift(series) / (max(1.0, nmax) * linalg.opnorm(eta))
                if rel > worst:
                    worst, where = rel, f"gamma={g:g}, {s}, eta_{i}"
    return Criterion(
        1, "conservation of eta_i(t)", worst <= 1e-6,
        f"max relative drift {worst:.2e} ({where}), tol 1e-6",
    )


def _oracle_angle(model) -> tuple[float, int]:
    rec = conserved.recursive_intertwiners(model)
    space = conserved.intertwiner_space(model.H)
    if len(space) != model.d:
        return math.inf, len(space)
    return float(conserved.principal_angles(rec.etas, space).max()), len(space)


def random_models(seed: int, count: int = 20, dims=range(2, 7), rel_gap: float = 1e-2):
    """Seeded transpose-symmetric PT models with well-separated spectra."""
    rng = np.random.default_rng(seed)
    dims = list(dims)
    out = []
    while len(out) < count:
        d = dims[len(out) % len(dims)]
        m = random_pt_model(d, rng)
        if is_nondegenerate(m, rel_gap):
            out.append(m)
    return out


def c02_oracle_equivalence(seed: int = DEFAULT_SEED) -> Criterion:
    worst = 0.0
    where = ""
    models = [(f"d=4 gamma={g:g}", build_hpt(4, 1.0, g)) for g in (0.0, 0.2, 0.5, 1.2)]
    models += [(f"random #{k} (d={m.d})", m) for k, m in enumerate(random_models(seed))]
    dims_ok = True
    for label, m in models:
        angle, dim = _oracle_angle(m)
        dims_ok &= dim == m.d
        if angle > worst:
            worst, where = angle, label
    return Criterion(
        2, "recursive set spans the null-space oracle",
        dims_ok and worst < 1e-8,
        f"{len(models)} models, max principal angle {worst:.2e} ({where}), tol 1e-8",
    )


def c03_hermitian_limit(seed: int = DEFAULT_SEED) -> Criterion:
    model = build_hpt(4, 1.0, 0.0)
    dev = 0.0
    for s in PSI_STATES:
        n = dynamics.norm_series(_run(model, site_state(s, 4), 20.0)).values
        dev = max(dev, float(np.abs(n - 1).max()))
    return Criterion(3, "unit norm at gamma=0", dev <= 1e-10, f"max |N-1| = {dev:.2e}, tol 1e-10")


def c04_period(seed: int = DEFAULT_SEED) -> Criterion:
    model = build_hpt(4, 1.0, 0.2)
    T = analysis.period_closed_form(1.0, 0.2)
    fit = analysis.fit_period(dynamics.norm_series(_run(model, site_state("psi1", 4), 40.0)))
    rel = abs(fit.value / T - 1)
    return Criterion(
        4, "norm oscillation period at gamma=0.2J", rel <= 5e-3,
        f"fitted {fit.value:.5f} vs 2pi/sqrt(0.96) = {T:.5f}, rel. error {rel:.2e}, tol 5e-3",
    )


def c05_ep_growth(seed: int = DEFAULT_SEED) -> Criterion:
    model = build_hpt(4, 1.0, 1.0)
    traj = _run(model, site_state("psi1", 4), 200.0, max_norm=None)
    fit = analysis.fit_growth(dynamics.norm_series(traj), "power_law", (20.0, 200.0))
    h = linalg.opnorm(model.H)
    h4 = linalg.opnorm(np.linalg.matrix_power(model.H, 4))
    order = analysis.classify_phase(model).ep_order
    ok = abs(fit.value - 6.0) <= 0.05 and h4 <= 1e-10 * h**4 and order == 4
    return Criterion(
        5, "t^6 norm growth at the EP", ok,
        f"slope {fit.value:.4f} (need 6 +- 0.05), ||H^4||/||H||^4 = {h4 / h**4:.1e}, ep_order {order}",
    )


def c06_broken_rate(seed: int = DEFAULT_SEED) -> Criterion:
    model = build_hpt(4, 1.0, 1.2)
    rate = 3 * math.sqrt(1.2**2 - 1.0)
    fit = analysis.fit_growth(
        dynamics.norm_series(_run(model, site_state("psi1", 4), 8.0)), "exponential", (5.0, 8.0)
    )
    rel = abs(fit.value / rate - 1)
    return Criterion(
        6, "exponential norm growth at gamma=1.2J", rel <= 1e-2,
        f"rate {fit.value:.4f} vs 3 sqrt(0.44) = {rate:.4f}, rel. error {rel:.2e}, tol 1e-2",
    )


def _theta_dev(model, state, t_max, t_from, max_norm=None) -> float:
    theta = dynamics.phase_diff_series(_run(model, site_state(state, 4), t_max, max_norm=max_norm))
    sel = theta.times >= t_from - 1e-9
    vals = theta.values[sel]
    if np.any(theta.mask[sel]):
        return math.inf
    return float(np.abs(vals - np.pi / 2).max())


def c07_phase_locking(seed: int = DEFAULT_SEED) -> Criterion:
    broken = build_hpt(4, 1.0, 1.2)
    ep = build_hpt(4, 1.0, 1.0)
    dev_b = {s: _theta_dev(broken, s, 10.0, 8.0) for s in PSI_STATES}
    dev_ep = {s: _theta_dev(ep, s, 100.0, 100.0) for s in PSI_STATES}
    ok = max(dev_b.values()) < 1e-3 and max(dev_ep.values()) < 0.05
    worst_b = max(dev_b, key=dev_b.get)
    return Criterion(
        7, "phase locking theta_k -> pi/2", ok,
        f"gamma=1.2J t in [8,10]: max dev {dev_b[worst_b]:.2e} ({worst_b}), tol 1e-3; "
        f"gamma=J t=100: max dev {max(dev_ep.values()):.2e}, tol 0.05",
    )


def c08_eigenmode_nullity(seed: int = DEFAULT_SEED) -> Criterion:
    worst = 0.0
    cols = {}
    for g in (1.2, 1.0):
        model = build_hpt(4, 1.0, g)
        table = conserved.eigenmode_expectations(conserved.recursive_intertwiners(model), model)
        cols[g] = table.shape[1]
        worst = max(worst, float(np.abs(table).max()))
    return Criterion(
        8, "conserved quantities vanish on broken/EP eigenmodes",
        worst <= 1e-8 and cols == {1.2: 4, 1.0: 1},
        f"max |<E_j|eta_i|E_j>| = {worst:.2e}, tol 1e-8 (4 modes at 1.2J, 1 at J)",
    )


def _angles(g: float, t_max: float) -> list[ObservableSeries]:
    model = build_hpt(4, 1.0, g)
    basis = conserved.eta_eigenbasis(conserved.recursive_intertwiners(model), model)
    if g > 1.0:
        t_max = dynamics.capped_t_max(model, basis[0], t_max)
    return dynamics.angle_series(_run(model, basis[0], t_max), basis)


def c09_angles(seed: int = DEFAULT_SEED) -> Criterion:
    notes = []
    ok = True
    completeness = 0.0

    def track(phis):
        nonlocal completeness
        c = sum(np.cos(p.values) ** 2 for p in phis)
        completeness = max(completeness, float(np.abs(c - 1).max()))

    phis = _angles(0.0, 20.0)
    track(phis)
    dev = max(float(phis[0].values.max()), max(float(np.abs(p.values - np.pi / 2).max()) for p in phis[1:]))
    ok &= dev <= 1e-8
    notes.append(f"gamma=0 dev {dev:.1e}")

    T = analysis.period_closed_form(1.0, 0.2)
    phis = _angles(0.2, 40.0)
    track(phis)
    rel = max(abs(analysis.fit_period(p).value / T - 1) for p in phis)
    ok &= rel <= 1e-2
    notes.append(f"gamma=0.2 period rel. error {rel:.1e}")

    for g, t_max in ((1.0, 100.0), (1.2, 50.0)):
        phis = _angles(g, t_max)
        track(phis)
        t_stars = []
        for p in phis:
            try:
                t_stars.append(analysis.steady_state(p, 0.02)[0])
            except PTConserveError:
                t_stars.append(math.inf)
        ok &= max(t_stars) <= 50.0
        notes.append(f"gamma={g:g} settles by t={max(t_stars):.3g}")
    ok &= completeness <= 1e-10
    notes.append(f"|sum cos^2 - 1| {completeness:.1e}")
    return Criterion(9, "angle dynamics of eta_1 eigenstates", bool(ok), "; ".join(notes))


def c10_nonlocal_form(seed: int = DEFAULT_SEED) -> Criterion:
    rng = np.random.default_rng(seed)
    P = build_hpt(4).P
    mismatch = 0.0
    for _ in range(100):
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        mismatch = max(mismatch, abs(conserved.eta1_nonlocal(psi) - conserved.expectation(P, psi)))
    psi2 = site_state("psi2", 4)
    target2 = -(1 + math.sqrt(3)) / 2
    dev = 0.0
    for g in GAMMAS:
        etas = conserved.recursive_intertwiners(build_hpt(4, 1.0, g)).etas
        dev = max(dev, abs(conserved.expectation(etas[0], psi2) - 1), abs(conserved.expectation(etas[1], psi2) - target2))
    return Criterion(
        10, "non-local parity form and psi2 values", mismatch <= 1e-12 and dev <= 1e-12,
        f"form mismatch {mismatch:.1e}, tol 1e-12; psi2 value error {dev:.1e}, tol 1e-12",
    )


def c11_kernels(seed: int = DEFAULT_SEED) -> Criterion:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(60):
        d = 2 + k % 7
        A = rng.uniform(-1, 1, (d, d)) + 1j * rng.uniform(-1, 1, (d, d))
        A *= rng.uniform(0, 10) / linalg.opnorm(A)
        worst = max(worst, float(np.abs(linalg.expm(A) @ linalg.expm(-A) - np.eye(d)).max()))
    t = np.linspace(0.5, 50, 200)
    fit_err = 0.0
    for p in (0.5, 2.0, 6.0):
        s = ObservableSeries(t, 3.0 * t**p, "synthetic")
        fit_err = max(fit_err, abs(analysis.fit_growth(s, "power_law", (1, 40)).value - p))
    t = np.linspace(0, 10, 200)
    for r in (0.3, 1.99):
        s = ObservableSeries(t, 0.7 * np.exp(r * t), "synthetic")
        fit_err = max(fit_err, abs(analysis.fit_growth(s, "exponential", (2, 9)).value - r))
    return Criterion(
        11, "kernel self-checks", worst <= 1e-10 and fit_err <= 1e-3,
        f"max |e^A e^-A - 1| = {worst:.1e}, tol 1e-10; fit recovery error {fit_err:.1e}, tol 1e-3",
    )


CRITERIA: tuple[Callable[[int], Criterion], ...] = (
    c01_conservation,
    c02_oracle_equivalence,
    c03_hermitian_limit,
    c04_period,
    c05_ep_growth,
    c06_broken_rate,
    c07_phase_locking,
    c08_eigenmode_nullity,
    c09_angles,
    c10_nonlocal_form,
    c11_kernels,
)


def run_all(seed: int = DEFAULT_SEED) -> list[Criterion]:
    out = []
    for fn in CRITERIA:
        try:
            out.append(fn(seed))
        except PTConserveError as exc:
            n = CRITERIA.index(fn) + 1
            out.append(Criterion(n, fn.__name__, False, f"{exc.module}: {type(exc).__name__}: {exc}"))
    return out


def verify(seed: int = DEFAULT_SEED, echo=print) -> int:
    """Run every criterion, print one line each, return a process exit code."""
    results = run_all(seed)
    for r in results:
        echo(r.line())
    failed = sum(not r.passed for r in results)
    echo(f"{len(results) - failed}/{len(results)} criteria passed")
    return 0 if failed == 0 else 1
