"""Command line entry point: ``ptconserve <subcommand> [options]``.

Exit codes: 0 success, 1 numerical or acceptance failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, acceptance, analysis, conserved, linalg, pipeline
from .errors import ConfigError, PTConserveError
from .model import build_hpt, is_nondegenerate

UNITS_NOTE = "Units: hbar = 1, energies in J, times in 1/J."

# CLI flag name -> config key
_FLAG_KEYS = {
    "d": "d",
    "J": "J",
    "gamma": "gamma",
    "state": "state",
    "tmax": "tmax",
    "samples": "samples",
    "seed": "seed",
    "tol": "tol",
    "outputs": "outputs",
    "window": "window",
    "max_norm": "max_norm",
}


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--config", help="flat key = value scenario file; flags override its keys")
    g.add_argument("--d", help="number of sites (default 4)")
    g.add_argument("--J", help="tunneling energy, sets the unit (default 1)")
    g.add_argument("--gamma", help="gain-loss strength in units of J (default 0)")
    g.add_argument("--state", help="psi1..psi4, E1..Ed, v1..vd, or comma-separated amplitudes")
    g.add_argument("--tmax", help="final time in 1/J (default depends on the phase)")
    g.add_argument("--samples", help="number of time samples (default 400)")
    g.add_argument("--outputs", help=f"comma list from {','.join(pipeline.OUTPUTS)}")
    g.add_argument("--window", help="fit window 'lo,hi' in 1/J")
    g.add_argument("--max-norm", dest="max_norm", help="refuse matrix exponentials above this 1-norm")
    g.add_argument("--seed", help="seed for randomized checks")
    g.add_argument("--tol", help="absolute tolerance for phase classification (default 1e-8 ||H||)")
    g.add_argument("--out", default="out", help="output directory (default ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptconserve",
        description="Conserved observables and non-unitary dynamics of PT-symmetric chains.",
        epilog=UNITS_NOTE,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (
        ("spectrum", "eigenvalues and phase diagnosis"),
        ("conserved", "recursive conserved observables and their checks"),
        ("evolve", "simulate a scenario and write trajectory CSV + summary JSON"),
        ("fit", "norm growth law or period for a scenario"),
    ):
        p = sub.add_parser(name, help=help_, description=help_, epilog=UNITS_NOTE)
        _common(p)

    p = sub.add_parser("repro", help="reproduce one figure's data and check its claims", epilog=UNITS_NOTE)
    p.add_argument("figure", choices=pipeline.FIGURES)
    p.add_argument("--out", default="out", help="output directory (default ./out)")

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    return parser


def load_config(args: argparse.Namespace, **overrides) -> pipeline.ScenarioConfig:
    raw: dict[str, str] = {}
    where: dict[str, str] = {}
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        raw, where = pipeline.read_config_text(text, str(path))
        raw = {pipeline.ALIASES.get(k, k): v for k, v in raw.items()}
        where = {pipeline.ALIASES.get(k, k): v for k, v in where.items()}
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            raw[key] = str(value)
            where[key] = f"--{flag.replace('_', '-')}: "
    for key, value in overrides.items():
        raw.setdefault(key, value)
    return pipeline.ScenarioConfig.from_mapping(raw, where)


def _print_json(obj) -> None:
    print(json.dumps(pipeline._jsonable(obj), indent=2, sort_keys=True))


def cmd_spectrum(args) -> int:
    cfg = load_config(args)
    model = build_hpt(cfg.d, cfg.J, cfg.gamma)
    res = linalg.eig(model.H)
    diag = analysis.classify_phase(model, cfg.tol)
    sym = model.symmetries()
    out = {
        "eigenvalues": list(res.eigenvalues),
        "eigvec_condition": res.eigvec_condition,
        "defective": res.defective_flag,
        "phase": asdict(diag),
        "symmetries": asdict(sym),
    }
    if diag.phase == "pt_symmetric":
        out["period"] = analysis.period_closed_form(cfg.J, cfg.gamma)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipeline.write_spectrum_csv(model, out_dir / "spectrum.csv")
    pipeline.write_json({"config": cfg.echo(), "version": __version__, "summary": out}, out_dir / "spectrum.json")
    _print_json(out)
    return 0


def cmd_conserved(args) -> int:
    cfg = load_config(args)
    model = build_hpt(cfg.d, cfg.J, cfg.gamma)
    etaset = conserved.recursive_intertwiners(model)
    space = conserved.intertwiner_space(model.H)
    angles = conserved.principal_angles(etaset.etas, space)
    out = {
        "residuals": list(etaset.residuals),
        "gram_rank": etaset.gram_rank,
        "independent": etaset.independent,
        "transpose_symmetric": etaset.transpose_symmetric,
        "oracle_dimension": len(space),
        "max_principal_angle": float(angles.max()),
        "termination_defect": conserved.termination_defect(model),
        "nondegenerate_spectrum": is_nondegenerate(model),
        "eigenmode_expectations": conserved.eigenmode_expectations(etaset, model),
    }
    psi = pipeline.resolve_state(cfg.state, model)
    out["state"] = cfg.state
    out["expectations"] = [conserved.expectation(e, psi) for e in etaset.etas]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, eta in enumerate(etaset.etas, start=1):
        np.savetxt(out_dir / f"eta_{i}.csv", np.hstack([eta.real, eta.imag]), delimiter=",", fmt="%.17g",
                   header=f"columns: re(eta_{i}) | im(eta_{i}), {model.d} each")
    pipeline.write_json({"config": cfg.echo(), "version": __version__, "summary": out}, out_dir / "conserved.json")
    _print_json(out)
    return 0


def cmd_evolve(args) -> int:
    cfg = load_config(args, outputs="norm,conserved,phases,angles,spectrum")
    rec = pipeline.run_scenario(cfg, args.out)
    s = rec.summary
    print(f"phase: {s['phase']['phase']} (ep_order {s['phase']['ep_order']})")
    print(f"max relative conservation drift: {s['conservation']['max_relative_drift']:.3e}")
    for name, path in sorted(rec.files.items()):
        print(f"{name}: {Path(args.out) / path}")
    return 0 if s["conservation"]["passed"] else 1


def cmd_fit(args) -> int:
    cfg = load_config(args, outputs="norm,fits")
    rec = pipeline.run_scenario(cfg, args.out)
    _print_json(rec.summary["fits"])
    return 1 if "error" in rec.summary["fits"] else 0


def cmd_repro(args) -> int:
    rec = pipeline.repro(args.figure, args.out)
    for c in rec.summary["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['claim']}: value {c['value']}, reference {c['threshold']}")
    print(f"files written to {args.out}")
    return 0 if rec.summary["passed"] else 1


def cmd_verify(args) -> int:
    return acceptance.verify(args.seed)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "conserved": cmd_conserved,
    "evolve": cmd_evolve,
    "fit": cmd_fit,
    "repro": cmd_repro,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PTConserveError as exc:
        print(f"error [{exc.module}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
