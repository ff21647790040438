"""Reproducible multi-run campaigns: alpha-convergence, perturbation, invariants, Burgers.

A campaign is a flat INI-style config file with one study per ``[section]``.
Every study expands into independent *runs*, which execute concurrently and
write into ``runs/<study>/<run>/``.  Reports are assembled afterwards from what
the runs left on disk.  Outputs carry no timestamps, so an identical config
reproduces the directory byte for byte.

Config grammar
--------------
``key = value`` lines under ``[study-name]`` headers; ``#`` and ``;`` start
comments; lists are comma separated; no nesting and no interpolation.  The
``kind`` key selects the study type; the remaining keys and their defaults are
listed in :data:`DEFAULTS`.  ``alpha_m = equal`` ties alpha_M to each alpha.

Layout of the output directory::

    config.ini                     verbatim copy of the config
    runs/<study>/<run>/diagnostics.csv
    runs/<study>/<run>/checkpoints/checkpoint_XXXXXXXX.ckpt
    runs/<study>/<run>/DONE        run status (JSON); present => run is skipped on resume
    report.txt, report.csv         study reports
    manifest.json                  run statuses and sha256 of every other file
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import burgers
from .diagnostics import energy_balance_residual, read_csv, relative_drift
from .initial import IC_NAMES, make_initial
from .models import MODELS, BlowUpError, ModelSpec, SolverState, make_state
from .spectral import PeriodicGrid, random_solenoidal, resample
from .timestepper import SCHEMES, Hooks, StepperConfig, integrate, load_checkpoint

STUDY_KINDS = ("alpha_convergence", "perturbation", "ideal_invariants", "burgers_comparison")


class ConfigError(ValueError):
    """Invalid campaign configuration."""


DEFAULTS = {
    "common": {
        "model": "mhd_alpha", "ic": "taylor_green_mhd", "seed": 0, "n": 32, "dim": 3,
        "dt": 5e-3, "t_end": 0.5, "nu": 0.0, "eta": 0.0, "alpha": 0.1, "alpha_m": 0.0,
        "scheme": "if-rk4", "precision": "f64", "diagnostics_every": 1,
        "norms": ["E_alpha", "grad_u_sq", "grad_B_sq"],
    },
    "alpha_convergence": {"alpha_list": [0.2, 0.1, 0.05], "samples": 4, "selfcheck": True,
                          "selfcheck_fraction": 0.1, "reference_n": 0},
    "perturbation": {"delta": 1e-6, "sample_dt": 0.1, "linear_t": 0.1, "rho_bound": 1e6,
                     "linear_tolerance": 0.1},
    "ideal_invariants": {"tolerance": 1e-6, "energy_tolerance": 1e-6},
    "burgers_comparison": {"alpha_list": [0.1, 0.05, 0.025], "epsilon_list": [],
                           "burgers_ic": "sine", "n_fine": 8192, "cfl": 0.8,
                           "sup_tolerance": 1e-3},
}
_LISTS = {"alpha_list", "epsilon_list", "norms"}
_BOOLS = {"selfcheck"}
_INTS = {"seed", "n", "dim", "samples", "diagnostics_every", "n_fine", "reference_n"}
_STRS = {"model", "ic", "scheme", "precision", "burgers_ic", "kind"}


@dataclass(frozen=True)
class StudySpec:
    """One study of a campaign; ``params`` holds the kind-specific keys."""

    name: str
    kind: str
    model: str
    ic: str
    n: int
    t_end: float
    alpha_list: tuple[float, ...] = ()
    norms: tuple[str, ...] = ("E_alpha", "grad_u_sq", "grad_B_sq")
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise ConfigError(f"[{self.name}] unknown kind {self.kind!r}; expected one of {STUDY_KINDS}")
        if self.kind != "burgers_comparison":
            if self.model not in MODELS:
                raise ConfigError(f"[{self.name}] unknown model {self.model!r}")
            if self.ic not in IC_NAMES:
                raise ConfigError(f"[{self.name}] unknown ic {self.ic!r}")
        if self.kind in ("alpha_convergence", "burgers_comparison"):
            a = self.alpha_list
            if len(a) < 3:
                raise ConfigError(f"[{self.name}] alpha_list needs at least 3 entries")
            if any(x < 0 for x in a) or any(x <= y for x, y in zip(a, a[1:])):
                raise ConfigError(f"[{self.name}] alpha_list must be strictly decreasing and non-negative")
            if self.kind == "burgers_comparison" and a[-1] <= 0:
                raise ConfigError(f"[{self.name}] Burgers-alpha needs alpha > 0")
        if not self.t_end > 0:
            raise ConfigError(f"[{self.name}] t_end must be positive")

    def get(self, key):
        return self.params[key]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha_list"] = list(self.alpha_list)
        d["norms"] = list(self.norms)
        return d


# -- configuration ------------------------------------------------------------------------

def _convert(section: str, key: str, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if key in _LISTS:
            items = [x.strip() for x in raw.split(",") if x.strip()]
            return [x if key == "norms" else float(x) for x in items]
        if key in _BOOLS:
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if key in _INTS:
            return int(raw)
        if key in _STRS:
            return raw
        if key == "alpha_m" and raw.lower() == "equal":
            return "equal"
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] bad value for {key}: {raw!r}") from None


def parse_config(text: str, overrides: dict | None = None) -> list[StudySpec]:
    """Parse campaign text into study specs; ``overrides`` apply to every study."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="\0none")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    studies = []
    for name in cp.sections():
        sec = cp[name]
        kind = sec.get("kind", "").strip()
        if kind not in STUDY_KINDS:
            raise ConfigError(f"[{name}] missing or unknown kind {kind!r}")
        allowed = {**DEFAULTS["common"], **DEFAULTS[kind]}
        params = dict(allowed)
        for key, raw in sec.items():
            if key == "kind":
                continue
            if key not in allowed:
                raise ConfigError(f"[{name}] unknown key {key!r}")
            params[key] = _convert(name, key, raw)
        for key, val in (overrides or {}).items():
            if val is not None and key in allowed:
                params[key] = _convert(name, key, val) if isinstance(val, str) else val
        if kind == "burgers_comparison" and not params["epsilon_list"]:
            params["epsilon_list"] = list(params["alpha_list"])
        if params["dt"] <= 0 or params["diagnostics_every"] < 1:
            raise ConfigError(f"[{name}] dt must be positive and diagnostics_every >= 1")
        if params["scheme"] not in SCHEMES:
            raise ConfigError(f"[{name}] unknown scheme {params['scheme']!r}")
        studies.append(StudySpec(
            name=name, kind=kind, model=params.pop("model"), ic=params.pop("ic"),
            n=params.pop("n"), t_end=params.pop("t_end"),
            alpha_list=tuple(params.pop("alpha_list", ())), norms=tuple(params.pop("norms")),
            params=params))
    return studies


# -- runs ----------------------------------------------------------------------------------

@dataclass(frozen=True)
class RunSpec:
    """One independent simulation of a study (picklable; executed by a worker)."""

    study: str
    name: str
    kind: str                      # "mhd" or "burgers_alpha" / "burgers_viscous" / "burgers_reference"
    model: dict = field(default_factory=dict)
    n: int = 32
    dim: int = 3
    precision: str = "f64"
    ic: str = "taylor_green_mhd"
    seed: int = 0
    perturb: float = 0.0
    scheme: str = "if-rk4"
    dt: float = 5e-3
    t_end: float = 0.5
    diagnostics_every: int = 1
    checkpoint_every: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def run_id(self) -> str:
        return f"{self.study}/{self.name}"


def _steps(span: float, dt: float, what: str, study: str) -> int:
    k = span / dt
    if abs(k - round(k)) > 1e-9 * max(k, 1.0) or round(k) < 1:
        raise ConfigError(f"[{study}] {what}={span!r} is not a whole number of dt={dt!r} steps")
    return int(round(k))


def _mhd_run(study: StudySpec, name: str, spec: ModelSpec, **kw) -> RunSpec:
    p = study.params
    base = dict(study=study.name, name=name, kind="mhd", model=spec.to_dict(), n=study.n,
                dim=p["dim"], precision=p["precision"], ic=study.ic, seed=p["seed"],
                scheme=p["scheme"], dt=p["dt"], t_end=study.t_end,
                diagnostics_every=p["diagnostics_every"])
    base.update(kw)
    return RunSpec(**base)


def _model_spec(study: StudySpec, model: str | None = None, alpha: float | None = None) -> ModelSpec:
    p = study.params
    a = p["alpha"] if alpha is None else alpha
    am = a if p["alpha_m"] == "equal" else p["alpha_m"]
    model = model or study.model
    if model == "leray_alpha_mhd_2d" or p["dim"] == 2:
        dim = 2
    else:
        dim = 3
    return ModelSpec(model, nu=p["nu"], eta=p["eta"], alpha=a, alpha_m=am, dim=dim)


def plan_runs(study: StudySpec) -> list[RunSpec]:
    p = study.params
    if study.kind == "alpha_convergence":
        every = _steps(study.t_end / p["samples"], p["dt"], "t_end/samples", study.name)
        ref = _model_spec(study, "mhd", 0.0).with_(alpha_m=0.0)
        n_ref = p["reference_n"] or study.n
        runs = [_mhd_run(study, "reference", ref, n=n_ref, checkpoint_every=every)]
        if p["selfcheck"]:
            runs.append(_mhd_run(study, "reference_2n", ref, n=2 * n_ref, checkpoint_every=every))
        for a in study.alpha_list:
            runs.append(_mhd_run(study, f"alpha_{a!r}", _model_spec(study, alpha=a),
                                 checkpoint_every=every))
        return runs
    if study.kind == "perturbation":
        if not p["delta"] > 0:
            raise ConfigError(f"[{study.name}] delta must be positive (rho is 0/0 at delta = 0)")
        every = _steps(p["sample_dt"], p["dt"], "sample_dt", study.name)
        _steps(p["linear_t"], p["sample_dt"], "linear_t", study.name)
        spec = _model_spec(study)
        return [
            _mhd_run(study, "base", spec, checkpoint_every=every),
            _mhd_run(study, "perturbed", spec, perturb=p["delta"], checkpoint_every=every),
            _mhd_run(study, "perturbed_half", spec, perturb=0.5 * p["delta"], t_end=p["linear_t"],
                     checkpoint_every=every),
        ]
    if study.kind == "ideal_invariants":
        _steps(study.t_end, p["dt"], "t_end", study.name)
        return [_mhd_run(study, "run", _model_spec(study))]
    # burgers_comparison
    runs = [RunSpec(study.name, "reference", "burgers_reference", n=p["n_fine"], dim=1,
                    ic=p["burgers_ic"], t_end=study.t_end)]
    for a in study.alpha_list:
        runs.append(RunSpec(study.name, f"alpha_{a!r}", "burgers_alpha", n=study.n, dim=1,
                            ic=p["burgers_ic"], t_end=study.t_end,
                            extra={"alpha": a, "cfl": p["cfl"]}))
    for e in p["epsilon_list"]:
        runs.append(RunSpec(study.name, f"epsilon_{e!r}", "burgers_viscous", n=study.n, dim=1,
                            ic=p["burgers_ic"], dt=p["dt"], t_end=study.t_end,
                            extra={"epsilon": e}))
    return runs


def perturbation_field(grid: PeriodicGrid, state: SolverState, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded solenoidal directions, each scaled to the L2 norm of the matching field."""
    rng = np.random.default_rng([seed, 0x5EED])
    du = random_solenoidal(grid, rng, nmax=4.0)
    db = random_solenoidal(grid, rng, nmax=4.0)
    du *= math.sqrt(grid.norm2(state.u_hat) / grid.norm2(du))
    db *= math.sqrt(grid.norm2(state.b_hat) / grid.norm2(db))
    return du, db


def initial_state(run: RunSpec) -> SolverState:
    grid = PeriodicGrid(run.n, dim=run.dim, precision=run.precision)
    state = make_initial(run.ic, grid, run.seed)
    if run.perturb:
        du, db = perturbation_field(grid, state, run.seed)
        state = make_state(grid, state.u_hat + run.perturb * du, state.b_hat + run.perturb * db)
    return state


def _burgers_ic(run: RunSpec) -> burgers.Burgers1DState:
    if run.ic == "sine":
        return burgers.sine_ic(run.n)
    if run.ic == "riemann":
        return burgers.riemann_ic(run.n)
    raise ConfigError(f"[{run.study}] unknown Burgers ic {run.ic!r}")


def _write_burgers_csv(path: Path, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "v_max", "energy", "mass"])
    for r in rows:
        w.writerow([repr(float(x)) for x in r])
    path.write_text(buf.getvalue())


def _run_burgers(run: RunSpec, rdir: Path) -> None:
    if run.kind == "burgers_reference":
        boundary = "outflow" if run.ic == "riemann" else "periodic"
        x, v = burgers.entropy_reference(run.ic, run.t_end, n_fine=run.n, boundary=boundary)
        np.save(rdir / "final.npy", v)
        return
    state = _burgers_ic(run)
    rows = [(state.t, np.max(np.abs(state.v)), state.energy(), state.mass())]

    def record(s):
        rows.append((s.t, np.max(np.abs(s.v)), s.energy(), s.mass()))

    if run.kind == "burgers_alpha":
        state = burgers.run_burgers_alpha(state, run.extra["alpha"], run.t_end, run.extra["cfl"],
                                          on_step=record)
    else:
        state = burgers.run_burgers_viscous(state, run.extra["epsilon"], run.t_end, run.dt,
                                            on_step=record)
    _write_burgers_csv(rdir / "diagnostics.csv", rows)
    np.save(rdir / "final.npy", state.v)


def execute_run(run: RunSpec, out_dir: str) -> dict:
    """Run one simulation into its directory; returns the status written to ``DONE``."""
    rdir = Path(out_dir) / "runs" / run.study / run.name
    if (rdir / "DONE").exists():
        return json.loads((rdir / "DONE").read_text())
    if rdir.exists():
        shutil.rmtree(rdir)
    rdir.mkdir(parents=True)
    status = {"run": run.run_id, "status": "ok", "error": None}
    try:
        if run.kind == "mhd":
            spec = ModelSpec.from_dict(run.model)
            cfg = StepperConfig(scheme=run.scheme, dt=run.dt, t_end=run.t_end)
            hooks = Hooks(diagnostics_every=run.diagnostics_every,
                          checkpoint_every=run.checkpoint_every,
                          checkpoint_dir=rdir / "checkpoints", csv_path=rdir / "diagnostics.csv")
            integrate(spec, initial_state(run), cfg, hooks)
        else:
            _run_burgers(run, rdir)
    except (BlowUpError, FloatingPointError, ValueError) as exc:
        status.update(status="failed", error=str(exc))
    (rdir / "DONE").write_text(json.dumps(status, sort_keys=True) + "\n")
    return status


# -- study reports ----------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class StudyReport:
    study: StudySpec
    checks: list[Check] = field(default_factory=list)
    rows: list[tuple] = field(default_factory=list)     # (quantity, run, t, value)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(Check(name, bool(passed), detail))


def _run_dir(out: Path, study: StudySpec, name: str) -> Path:
    return out / "runs" / study.name / name


def _status(out: Path, study: StudySpec, name: str) -> dict:
    path = _run_dir(out, study, name) / "DONE"
    if not path.exists():
        return {"status": "missing", "error": "run did not complete"}
    return json.loads(path.read_text())


def _snapshots(out: Path, study: StudySpec, name: str) -> dict[float, SolverState]:
    snaps = {}
    for path in sorted((_run_dir(out, study, name) / "checkpoints").glob("*.ckpt")):
        _, state, _ = load_checkpoint(path)
        snaps[round(state.t, 12)] = state
    return snaps


def first_exceedance(records, names, factor: float = 10.0) -> float | None:
    """First sample time at which any listed quantity exceeds ``factor`` x its initial value."""
    for rec in records:
        for q in names:
            v0, v = getattr(records[0], q), getattr(rec, q)
            if v0 is not None and v is not None and abs(v) > factor * abs(v0):
                return rec.t
    return None


def _monitor(report: StudyReport, out: Path, name: str) -> None:
    path = _run_dir(out, report.study, name) / "diagnostics.csv"
    if not path.exists():
        return
    t = first_exceedance(read_csv(path), report.study.norms)
    report.rows.append(("first_10x_growth_t", name, "", "none" if t is None else repr(t)))


def alpha_convergence_study(study: StudySpec, out: Path, runs: dict[str, RunSpec]) -> StudyReport:
    """Errors ``||u_alpha - u_MHD||``, ``||B_alpha - B_MHD||`` at the sample times.

    The weak-convergence statement is about subsequences, which one trajectory
    per alpha cannot exhibit; the observable checked here is the stronger
    whole-sequence decrease expected for smooth data on the strong-solution
    interval ``[0, T_*]`` (``T_* = t_end``).
    """
    rep = StudyReport(study)
    names = ["reference"] + (["reference_2n"] if study.get("selfcheck") else []) + \
        [f"alpha_{a!r}" for a in study.alpha_list]
    failed = {n: s["error"] for n in names if (s := _status(out, study, n))["status"] != "ok"}
    for n in names:
        _monitor(rep, out, n)
    if failed:
        rep.check("runs_completed", False, "; ".join(f"{k}: {v}" for k, v in failed.items()))
        return rep
    ref = _snapshots(out, study, "reference")
    times = sorted(t for t in ref if t > 0)
    grid = next(iter(ref.values())).grid
    errors = {}
    for a in study.alpha_list:
        snaps = _snapshots(out, study, f"alpha_{a!r}")
        for t in times:
            src = snaps[t].grid
            eu = math.sqrt(grid.norm2(resample(snaps[t].u_hat, src, grid) - ref[t].u_hat))
            eb = math.sqrt(grid.norm2(resample(snaps[t].b_hat, src, grid) - ref[t].b_hat))
            errors[a, t] = (eu, eb)
            rep.rows.append(("err_u_L2", f"alpha={a!r}", repr(t), repr(eu)))
            rep.rows.append(("err_B_L2", f"alpha={a!r}", repr(t), repr(eb)))
    positive = [a for a in study.alpha_list if a > 0]
    for comp, label in ((0, "u"), (1, "B")):
        ok = all(errors[x, t][comp] > errors[y, t][comp]
                 for t in times for x, y in zip(positive, positive[1:]))
        detail = ", ".join(f"t={t:g}: " + " > ".join(f"{errors[a, t][comp]:.3e}" for a in positive)
                           for t in times)
        rep.check(f"errors_decrease_{label}", ok, detail)
    if 0.0 in study.alpha_list:
        worst = max(max(errors[0.0, t]) / math.sqrt(grid.norm2(ref[t].u_hat) + grid.norm2(ref[t].b_hat))
                    for t in times)
        if grid.n[0] == study.n:
            rep.check("alpha_zero_matches_reference", worst <= 1e-12, f"relative error {worst:.3e}")
        else:
            rep.notes.append(f"alpha=0 run differs from the n={grid.n[0]} reference by {worst:.3e} "
                             "(relative); this is the resolution gap, not a model difference")
    if study.get("selfcheck"):
        fine = _snapshots(out, study, "reference_2n")
        worst = 0.0
        for t in times:
            fg = fine[t].grid
            du = math.sqrt(fg.norm2(fine[t].u_hat - resample(ref[t].u_hat, grid, fg)))
            db = math.sqrt(fg.norm2(fine[t].b_hat - resample(ref[t].b_hat, grid, fg)))
            smallest = min(min(errors[a, t]) for a in positive)
            worst = max(worst, max(du, db) / smallest)
            rep.rows.append(("reference_change_2n", "reference", repr(t), repr(max(du, db))))
        frac = study.get("selfcheck_fraction")
        rep.check("reference_selfcheck", worst < frac,
                  f"max change on doubling n / smallest alpha-error = {worst:.3e} (limit {frac:g})"
                  + ("" if worst < frac else f"; raise reference_n above {grid.n[0]}"))
    else:
        rep.notes.append("reference self-check disabled")
    return rep


def _perturbation_norm(grid: PeriodicGrid, alpha: float, du: np.ndarray, db: np.ndarray) -> float:
    return grid.norm2(du) + alpha * alpha * float(np.sum(grid.weights * grid.k2 * np.abs(du) ** 2)) \
        + grid.norm2(db)


def perturbation_study(study: StudySpec, out: Path, runs: dict[str, RunSpec]) -> StudyReport:
    """Ratio ``rho(t)`` of the perturbation energy to its initial value, plus linear scaling."""
    rep = StudyReport(study)
    for n in ("base", "perturbed", "perturbed_half"):
        _monitor(rep, out, n)
    st = {n: _status(out, study, n) for n in ("base", "perturbed", "perturbed_half")}
    if st["perturbed"]["status"] != "ok" or st["base"]["status"] != "ok":
        bad = {n: s["error"] for n, s in st.items() if s["status"] != "ok"}
        finite_expected = study.model != "leray_alpha_mhd_3d"
        rep.check("rho_finite", not finite_expected,
                  "; ".join(f"{k}: {v}" for k, v in bad.items())
                  + ("" if finite_expected else " (recorded as observation for this model)"))
        return rep
    base = _snapshots(out, study, "base")
    pert = _snapshots(out, study, "perturbed")
    alpha = ModelSpec.from_dict(runs["base"].model).alpha
    s0 = initial_state(runs["base"])
    p0 = initial_state(runs["perturbed"])
    grid = s0.grid
    d0 = _perturbation_norm(grid, alpha, p0.u_hat - s0.u_hat, p0.b_hat - s0.b_hat)
    rho = [(0.0, 1.0)]
    rep.rows.append(("rho", "perturbed", repr(0.0), repr(1.0)))
    for t in sorted(t for t in base if t > 0):
        d = _perturbation_norm(grid, alpha, pert[t].u_hat - base[t].u_hat, pert[t].b_hat - base[t].b_hat)
        rho.append((t, d / d0))
        rep.rows.append(("rho", "perturbed", repr(t), repr(d / d0)))
    worst = max(r for _, r in rho)
    bound = study.get("rho_bound")
    rep.check("rho_finite", all(math.isfinite(r) for _, r in rho) and worst <= bound,
              f"max rho = {worst:.4e} over [0, {study.t_end:g}] (bound {bound:g})")
    if st["perturbed_half"]["status"] != "ok":
        rep.check("linear_scaling", False, st["perturbed_half"]["error"])
        return rep
    tl = round(study.get("linear_t"), 12)
    half = _snapshots(out, study, "perturbed_half")
    full_du = math.sqrt(grid.norm2(pert[tl].u_hat - base[tl].u_hat))
    half_du = math.sqrt(grid.norm2(half[tl].u_hat - base[tl].u_hat))
    ratio = half_du / full_du
    tol = study.get("linear_tolerance")
    rep.rows.append(("linear_ratio", "perturbed_half", repr(tl), repr(ratio)))
    rep.check("linear_scaling", abs(ratio - 0.5) <= tol * 0.5,
              f"||du(delta/2)|| / ||du(delta)|| = {ratio:.6f} at t={tl:g} (target 0.5 +- {100 * tol:g}%)")
    return rep


def ideal_invariants_study(study: StudySpec, out: Path, runs: dict[str, RunSpec]) -> StudyReport:
    """Relative drift of each conserved quantity; energy-balance residual when dissipative."""
    rep = StudyReport(study)
    _monitor(rep, out, "run")
    s = _status(out, study, "run")
    if s["status"] != "ok":
        rep.check("run_completed", False, s["error"])
        return rep
    spec = ModelSpec.from_dict(runs["run"].model)
    records = read_csv(_run_dir(out, study, "run") / "diagnostics.csv")
    tol = study.get("tolerance")
    if spec.ideal:
        for q in spec.conserved:
            d = relative_drift(records, q)
            rep.rows.append(("drift", q, "", repr(d)))
            rep.check(f"drift_{q}", d <= tol, f"{d:.3e} (limit {tol:g})")
    else:
        bal = energy_balance_residual(records)
        etol = study.get("energy_tolerance")
        rep.rows.append(("energy_residual_max", "run", "", repr(bal.max_abs)))
        rep.check("energy_balance", bal.max_abs <= etol,
                  f"max |residual| {bal.max_abs:.3e} ({bal.quadrature}, limit {etol:g})")
    health = max(max(r.div_u_max, r.div_B_max, r.mean_u, r.mean_B) for r in records)
    rep.check("divergence_and_mean", health <= 1e-12, f"max {health:.3e}")
    return rep


def burgers_comparison_study(study: StudySpec, out: Path, runs: dict[str, RunSpec]) -> StudyReport:
    """L1 distance to the entropy reference, sup-norm growth and energy decay per run."""
    rep = StudyReport(study)
    names = list(runs)
    bad = {n: s["error"] for n in names if (s := _status(out, study, n))["status"] != "ok"}
    if bad:
        rep.check("runs_completed", False, "; ".join(f"{k}: {v}" for k, v in bad.items()))
        return rep
    v_ref = np.load(_run_dir(out, study, "reference") / "final.npy")
    x_ref = (np.arange(v_ref.size) + 0.5) * 2.0 / v_ref.size
    l1 = {}
    sup_growth = 0.0
    for name in names[1:]:
        v = np.load(_run_dir(out, study, name) / "final.npy")
        state = burgers.Burgers1DState(study.t_end, v)
        l1[name] = burgers.l1_distance(state, x_ref, v_ref)
        rep.rows.append(("l1_error", name, repr(study.t_end), repr(l1[name])))
        with open(_run_dir(out, study, name) / "diagnostics.csv") as fh:
            data = np.array([[float(x) for x in row] for row in list(csv.reader(fh))[1:]])
        if name.startswith("alpha_"):
            sup_growth = max(sup_growth, float(np.max(data[:, 1]) - data[0, 1]))
        rep.rows.append(("energy_final", name, repr(study.t_end), repr(data[-1, 2])))
        rep.rows.append(("mass_drift", name, "", repr(float(np.max(np.abs(data[:, 3] - data[0, 3]))))))
    errs = [l1[f"alpha_{a!r}"] for a in study.alpha_list]
    rep.check("alpha_l1_decreasing", all(x > y for x, y in zip(errs, errs[1:])),
              " > ".join(f"{e:.4e}" for e in errs))
    tol = study.get("sup_tolerance")
    rep.check("alpha_sup_norm", sup_growth <= tol, f"max growth {sup_growth:.3e} (limit {tol:g})")
    return rep


STUDY_FUNCTIONS = {
    "alpha_convergence": alpha_convergence_study,
    "perturbation": perturbation_study,
    "ideal_invariants": ideal_invariants_study,
    "burgers_comparison": burgers_comparison_study,
}


# -- campaign --------------------------------------------------------------------------------

@dataclass
class CampaignResult:
    out: Path
    reports: list[StudyReport]
    statuses: dict[str, dict]

    @property
    def runs_failed(self) -> bool:
        return any(s["status"] != "ok" for s in self.statuses.values())

    @property
    def checks_passed(self) -> bool:
        return all(r.passed for r in self.reports)


def report_text(reports: list[StudyReport]) -> str:
    lines = []
    for rep in reports:
        lines.append(f"[{rep.study.name}] kind={rep.study.kind} "
                     f"result={'PASS' if rep.passed else 'FAIL'}")
        for c in rep.checks:
            lines.append(f"  {'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        for n in rep.notes:
            lines.append(f"  note: {n}")
    return "\n".join(lines) + "\n"


def report_csv(reports: list[StudyReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["study", "quantity", "run", "t", "value"])
    for rep in reports:
        for c in rep.checks:
            w.writerow([rep.study.name, f"check:{c.name}", "", "", "PASS" if c.passed else "FAIL"])
        for row in rep.rows:
            w.writerow([rep.study.name, *row])
    return buf.getvalue()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, studies: list[StudySpec], statuses: dict[str, dict]) -> Path:
    files = {}
    for path in sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json"):
        files[path.relative_to(out).as_posix()] = _sha256(path)
    manifest = {
        "studies": [s.to_dict() for s in studies],
        "runs": {k: statuses[k] for k in sorted(statuses)},
        "files": files,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def run_campaign(config, out, workers: int = 1, overrides: dict | None = None) -> CampaignResult:
    """Execute every study in ``config`` (path or text) into directory ``out``.

    Completed runs (``DONE`` present) are not recomputed, so an interrupted
    campaign resumes where it stopped.  Run failures are recorded and the
    remaining runs still execute.
    """
    if isinstance(config, Path) or (isinstance(config, str) and config and "\n" not in config
                                    and Path(config).is_file()):
        text = Path(config).read_text()
    else:
        text = str(config)
    studies = parse_config(text, overrides)
    plans = {s.name: {r.name: r for r in plan_runs(s)} for s in studies}
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(text)
    all_runs = [r for s in studies for r in plans[s.name].values()]
    if workers > 1 and len(all_runs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute_run, all_runs, [str(out)] * len(all_runs)))
    else:
        results = [execute_run(r, str(out)) for r in all_runs]
    statuses = {r.run_id: s for r, s in zip(all_runs, results)}
    reports = [STUDY_FUNCTIONS[s.kind](s, out, plans[s.name]) for s in studies]
    if studies:
        (out / "report.txt").write_text(report_text(reports))
        (out / "report.csv").write_text(report_csv(reports))
    write_manifest(out, studies, statuses)
    return CampaignResult(out, reports, statuses)


def single_study(study: StudySpec, out, workers: int = 1) -> StudyReport:
    """Plan, run and report one study outside a config file."""
    out = Path(out)
    runs = {r.name: r for r in plan_runs(study)}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(execute_run, runs.values(), [str(out)] * len(runs)))
    else:
        for r in runs.values():
            execute_run(r, str(out))
    return STUDY_FUNCTIONS[study.kind](study, out, runs)


def make_study(name: str, kind: str, **keys) -> StudySpec:
    """Build a :class:`StudySpec` from config-style keys (values as Python objects)."""
    def fmt(v):
        return ", ".join(map(str, v)) if isinstance(v, (list, tuple)) else str(v)

    lines = [f"[{name}]", f"kind = {kind}"] + [f"{k} = {fmt(v)}" for k, v in keys.items()]
    return parse_config("\n".join(lines) + "\n")[0]


__all__ = [
    "STUDY_KINDS", "DEFAULTS", "ConfigError", "StudySpec", "RunSpec", "Check", "StudyReport",
    "CampaignResult", "parse_config", "plan_runs", "execute_run", "initial_state",
    "perturbation_field", "first_exceedance", "alpha_convergence_study", "perturbation_study",
    "ideal_invariants_study", "burgers_comparison_study", "run_campaign", "single_study",
    "make_study", "report_text", "report_csv", "write_manifest",
]
