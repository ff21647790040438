"""Command-line interface: ``alphamhd {run,study,verify,inspect}``.

Exit codes: 0 success, 1 run failure (e.g. blow-up), 2 configuration error,
3 a verification or study check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import invariants, relative_drift
from .galerkin import assemble, identity_suite
from .harness import ConfigError, run_campaign
from .initial import IC_NAMES, make_initial
from .models import MODELS, BlowUpError, ModelSpec
from .spectral import PeriodicGrid
from .timestepper import SCHEMES, Hooks, StepperConfig, integrate, load_checkpoint, save_checkpoint

EXIT_OK, EXIT_RUN_FAILURE, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2, 3


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _physics_flags(p: argparse.ArgumentParser, defaults: bool) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--model", choices=MODELS, default=d("mhd_alpha"))
    p.add_argument("--alpha", type=float, default=d(0.1))
    p.add_argument("--alpha-m", type=float, default=d(0.0))
    p.add_argument("--nu", type=float, default=d(0.0))
    p.add_argument("--eta", type=float, default=d(0.0))
    p.add_argument("--n", type=int, default=d(32), help="grid points per axis")
    p.add_argument("--precision", choices=("f32", "f64"), default=d("f64"))
    p.add_argument("--dt", type=float, default=d(1e-3))
    p.add_argument("--t-end", type=float, default=d(1.0))
    p.add_argument("--seed", type=_seed, default=d(0))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alphamhd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single simulation")
    _physics_flags(run, defaults=True)
    run.add_argument("--ic", choices=IC_NAMES, default=None,
                     help="initial condition (default: taylor_green_mhd in 3D, orszag_tang in 2D)")
    run.add_argument("--scheme", choices=SCHEMES, default="if-rk4")
    run.add_argument("--out", type=Path, default=Path("run_out"))
    run.add_argument("--diagnostics-every", type=int, default=1)
    run.add_argument("--checkpoint-every", type=int, default=0)
    run.add_argument("--resume", type=Path, default=None, help="checkpoint to continue from")

    study = sub.add_parser("study", help="campaign of studies from a config file")
    study.add_argument("--config", type=Path, required=True)
    study.add_argument("--out", type=Path, default=Path("campaign_out"))
    study.add_argument("--workers", type=int, default=1)
    _physics_flags(study, defaults=False)

    verify = sub.add_parser("verify", help="bilinear-identity and invariant suites")
    verify.add_argument("--trials", type=int, default=100)
    verify.add_argument("--seed", type=_seed, default=0)
    verify.add_argument("--n", type=int, default=16, help="grid for the identity suites")
    verify.add_argument("--backend", choices=("both", "oracle", "pseudospectral"), default="both")
    verify.add_argument("--out", type=Path, default=None, help="write identity CSVs here")

    inspect = sub.add_parser("inspect", help="summarize a checkpoint file")
    inspect.add_argument("checkpoint", type=Path)
    inspect.add_argument("--json", action="store_true")
    return parser


def _cmd_run(args) -> int:
    try:
        if args.resume:
            spec, state, header = load_checkpoint(args.resume)
            prev = header.get("prev_nonlinear")
        else:
            dim = 2 if args.model == "leray_alpha_mhd_2d" else 3
            spec = ModelSpec(args.model, nu=args.nu, eta=args.eta, alpha=args.alpha,
                             alpha_m=args.alpha_m, dim=dim)
            grid = PeriodicGrid(args.n, dim=dim, precision=args.precision)
            ic = args.ic or ("taylor_green_mhd" if dim == 3 else "orszag_tang")
            state = make_initial(ic, grid, args.seed)
            prev = None
        cfg = StepperConfig(scheme=args.scheme, dt=args.dt, t_end=args.t_end)
        hooks = Hooks(diagnostics_every=args.diagnostics_every,
                      checkpoint_every=args.checkpoint_every,
                      checkpoint_dir=args.out / "checkpoints", csv_path=args.out / "diagnostics.csv")
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        traj = integrate(spec, state, cfg, hooks, prev_nonlinear=prev)
    except BlowUpError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    save_checkpoint(args.out / "final.ckpt", spec, traj.state, cfg, cfg.dt, traj.prev_nonlinear)
    last = traj.records[-1]
    print(f"t={last.t:.6g} steps={traj.n_steps} E_alpha={last.E_alpha!r} H_C={last.H_C!r}")
    for q in spec.conserved if spec.ideal else ():
        print(f"drift {q}: {relative_drift(traj.records, q):.3e}")
    return EXIT_OK


def _cmd_study(args) -> int:
    overrides = {"model": args.model, "alpha": args.alpha, "alpha_m": args.alpha_m, "nu": args.nu,
                 "eta": args.eta, "n": args.n, "precision": args.precision, "dt": args.dt,
                 "t_end": args.t_end, "seed": args.seed}
    try:
        result = run_campaign(args.config, args.out, workers=max(1, args.workers),
                              overrides=overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = result.out / "report.txt"
    if report.exists():
        print(report.read_text(), end="")
    if result.runs_failed:
        return EXIT_RUN_FAILURE
    return EXIT_OK if result.checks_passed else EXIT_CHECK


def invariant_suite(steps: int = 20, dt: float = 2e-3, tolerance: float = 1e-8) -> list[tuple[str, str, float, bool]]:
    """Short ideal runs of every model; each conserved quantity must stay put."""
    rows = []
    for model in MODELS:
        dim = 2 if model == "leray_alpha_mhd_2d" else 3
        alpha = 0.0 if model == "mhd" else 0.2
        alpha_m = 0.2 if model == "lamhd_alpha" else 0.0
        spec = ModelSpec(model, alpha=alpha, alpha_m=alpha_m, dim=dim)
        grid = PeriodicGrid(16 if dim == 3 else 32, dim=dim)
        state = make_initial("random", grid, seed=1)
        traj = integrate(spec, state, StepperConfig(dt=dt, t_end=steps * dt))
        for q in spec.conserved:
            d = relative_drift(traj.records, q)
            rows.append((model, q, d, d <= tolerance))
    return rows


def _cmd_verify(args) -> int:
    ok = True
    backends = ("oracle", "pseudospectral") if args.backend == "both" else (args.backend,)
    for backend in backends:
        if backend == "oracle":
            m = (args.n - 1) // 3
            sys_ = assemble(m, ModelSpec("mhd"), max_pairs=10 ** 7)
            rep = identity_suite(sys_, trials=args.trials, seed=args.seed, backend="oracle")
        else:
            rep = identity_suite(trials=args.trials, seed=args.seed, backend="pseudospectral",
                                 grid=PeriodicGrid(args.n, dim=3))
        print(rep.to_text(), end="")
        ok &= rep.passed
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"identities_{backend}.csv").write_text(rep.to_csv())
    for model, q, d, passed in invariant_suite():
        print(f"{'PASS' if passed else 'FAIL'} invariant {model} {q}: drift {d:.3e}")
        ok &= passed
    return EXIT_OK if ok else EXIT_CHECK


def _cmd_inspect(args) -> int:
    try:
        spec, state, header = load_checkpoint(args.checkpoint)
    except (OSError, ValueError) as exc:
        print(f"cannot read checkpoint: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rec = invariants(spec, state)
    summary = {
        "t": state.t, "step": state.step, "model": spec.to_dict(), "grid": state.grid.to_dict(),
        "scheme": header.get("scheme"), "dt": header.get("dt"),
        "code_version": header.get("code_version"),
        "max_abs_u_hat": float(np.max(np.abs(state.u_hat))),
        "max_abs_b_hat": float(np.max(np.abs(state.b_hat))),
        "invariants": {k: v for k, v in vars(rec).items()},
    }
    if args.json:
        print(json.dumps(summary, indent=1, sort_keys=True))
    else:
        for key, value in summary.items():
            if isinstance(value, dict):
                for k, v in value.items():
                    print(f"{key}.{k}: {v}")
            else:
                print(f"{key}: {value}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "study": _cmd_study, "verify": _cmd_verify,
               "inspect": _cmd_inspect}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
