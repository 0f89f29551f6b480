"""Experiment orchestration: config ingestion, scheme-comparison runs,
CSV/JSON result emission, and comparison tables."""

from __future__ import annotations

import dataclasses
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from dasa import bandwidth, synthetic, vi
from dasa.engine import MseCurve, SolverConfig, reduce_mse, run_replications
from dasa.stepsize import DasaPlayerPolicy, HarmonicPolicy

CSV_COLUMNS = ("setting_id", "scheme", "k", "mse", "ci_low", "ci_high")

REFERENCE_TOL = 1e-9  # tighter than the 1e-8 contract so two oracles agree to 1e-6


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class SchemeSpec:
    """One steplength scheme to benchmark.

    ``kind`` is "harmonic" (theta) or "dasa".  DASA accepts either absolute
    parameters (c, r per player) or instance-relative ones: c = c_frac * eta
    and r_i = 1 + r_frac_i * (eta - 2c)/L, which keeps 0 < c < eta/2 valid
    across settings whose constants differ by orders of magnitude.
    """

    name: str
    kind: str
    theta: Optional[float] = None
    c: Optional[float] = None
    c_frac: Optional[float] = None
    r_values: Optional[tuple] = None
    r_frac: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("harmonic", "dasa"):
            raise ConfigError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "harmonic":
            if self.theta is None or self.theta <= 0:
                raise ConfigError("harmonic scheme needs theta > 0")
        else:
            if (self.c is None) == (self.c_frac is None):
                raise ConfigError("dasa scheme needs exactly one of c or c_frac")
            if self.c_frac is not None and not (0 < self.c_frac < 0.5):
                raise ConfigError("c_frac must lie in (0, 0.5)")
            if self.r_values is not None and self.r_frac is not None:
                raise ConfigError("give r_values or r_frac, not both")
        for name in ("r_values", "r_frac"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(x) for x in v))

    def build_policies(self, constants: vi.ProblemConstants, n_players: int) -> list:
        if self.kind == "harmonic":
            return [HarmonicPolicy(self.theta) for _ in range(n_players)]
        c = self.c if self.c is not None else self.c_frac * constants.eta
        beta = (constants.eta - 2 * c) / constants.lipschitz
        if self.r_values is not None:
            if len(self.r_values) != n_players:
                raise ConfigError("r_values length must equal the player count")
            rs = list(self.r_values)
        else:
            fracs = self.r_frac
            if fracs is None:
                fracs = tuple(
                    i / (n_players - 1) if n_players > 1 else 0.0
                    for i in range(n_players)
                )
            if len(fracs) != n_players:
                raise ConfigError("r_frac length must equal the player count")
            rs = [1.0 + f * beta for f in fracs]
        return [
            DasaPlayerPolicy(
                c=c,
                r=r,
                eta=constants.eta,
                lipschitz=constants.lipschitz,
                nu=constants.nu,
                diameter=constants.diameter,
                strict=False,
            )
            for r in rs
        ]


@dataclass(frozen=True)
class InstanceSpec:
    """Which game to run: the bandwidth network or the synthetic affine VI."""

    kind: str = "bandwidth"
    topology: Optional[str] = None  # path; None selects the packaged default
    dimension: int = 10
    eta: float = 1.0
    lipschitz: float = 5.0
    nu: float = 1.0
    box_upper: float = 5.0
    players: int = 5

    def __post_init__(self):
        if self.kind not in ("bandwidth", "synthetic-affine"):
            raise ConfigError(f"unknown instance kind {self.kind!r}")

    def load_topology(self) -> bandwidth.NetworkTopology:
        if self.topology is None or self.topology == "default":
            return bandwidth.default_topology()
        return bandwidth.load_topology(self.topology)


@dataclass(frozen=True)
class ExperimentConfig:
    instance: InstanceSpec = field(default_factory=InstanceSpec)
    setting_ids: tuple = tuple(range(1, 13))
    schemes: tuple = ()
    iterations: int = 4000
    replications: int = 25
    base_seed: int = 20240501
    output_dir: str = "results"
    record_every: int = 1
    jobs: int = 1

    def __post_init__(self):
        if not self.schemes:
            raise ConfigError("experiment needs at least one scheme")
        names = [s.name for s in self.schemes]
        if len(set(names)) != len(names):
            raise ConfigError("scheme names must be unique")
        if self.iterations < 1 or self.replications < 1:
            raise ConfigError("iterations and replications must be >= 1")
        object.__setattr__(self, "setting_ids", tuple(int(s) for s in self.setting_ids))
        object.__setattr__(self, "schemes", tuple(self.schemes))


def config_from_dict(raw: dict) -> ExperimentConfig:
    inst_raw = dict(raw.get("instance", {}))
    kind = inst_raw.pop("kind", "bandwidth")
    instance = InstanceSpec(kind=kind, **inst_raw)
    schemes = tuple(SchemeSpec(**s) for s in raw.get("schemes", ()))
    setting_ids = raw.get("settings")
    if setting_ids is None:
        setting_ids = tuple(range(1, 13)) if kind == "bandwidth" else (0,)
    return ExperimentConfig(
        instance=instance,
        setting_ids=tuple(setting_ids),
        schemes=schemes,
        iterations=int(raw.get("iterations", 4000)),
        replications=int(raw.get("replications", 25)),
        base_seed=int(raw.get("base_seed", 20240501)),
        output_dir=str(raw.get("output", "results")),
        record_every=int(raw.get("record_every", 1)),
        jobs=int(raw.get("jobs", 1)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} does not hold a mapping")
    return config_from_dict(raw)


def paper_protocol_config(
    output_dir: str = "results/paper-protocol",
    base_seed: Optional[int] = None,
    jobs: Optional[int] = None,
) -> ExperimentConfig:
    """The shipped full-protocol config: 12 settings x 4 schemes x 25 reps."""
    with resources.files("dasa.data").joinpath("paper_protocol.yaml").open() as fh:
        raw = yaml.safe_load(fh)
    cfg = config_from_dict(raw)
    updates = {"output_dir": output_dir}
    if base_seed is not None:
        updates["base_seed"] = base_seed
    if jobs is not None:
        updates["jobs"] = jobs
    return dataclasses.replace(cfg, **updates)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _build_setting(config: ExperimentConfig, setting_id: int):
    """Instance plus certification data for one setting id."""
    if config.instance.kind == "bandwidth":
        topo = config.instance.load_topology()
        params = bandwidth.setting(setting_id)
        instance = bandwidth.build_instance(topo, params)
    else:
        spec = config.instance
        instance = synthetic.affine_instance(
            dimension=spec.dimension,
            eta=spec.eta,
            lipschitz=spec.lipschitz,
            nu=spec.nu,
            box_upper=spec.box_upper,
            n_players=spec.players,
        )
    if instance.reference_solution is None:
        x_star = bandwidth.solve_reference(instance, tol=REFERENCE_TOL)
        instance = dataclasses.replace(instance, reference_solution=x_star)
    rng = np.random.default_rng([config.base_seed, setting_id, 0xC0])
    raw = vi.raw_constant_estimates(
        instance.mapping, instance.feasible_set, samples=80, rng=rng, noise_draws=48
    )
    return instance, raw


def _run_setting(config: ExperimentConfig, setting_id: int) -> dict:
    """Worker body: build, solve the reference, run every scheme."""
    instance, raw = _build_setting(config, setting_id)
    consts = instance.constants
    ref_residual = vi.natural_residual(
        instance.feasible_set, instance.mapping, instance.reference_solution, 1.0
    )
    out = {
        "setting_id": setting_id,
        "instance": instance.name,
        "constants": {
            "eta": consts.eta,
            "lipschitz": consts.lipschitz,
            "nu": consts.nu,
            "diameter": consts.diameter,
            "eta_hat": raw.eta,
            "eta_hat_flagged": bool(raw.eta <= 1e-10),
        },
        "reference_residual": ref_residual,
        "schemes": [],
    }
    for scheme in config.schemes:
        entry = {
            "scheme": scheme.name,
            "seeds": [config.base_seed + i for i in range(config.replications)],
            "status": "done",
            "error": None,
            "warnings": [],
        }
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                policies = scheme.build_policies(consts, instance.n_players)
            entry["warnings"] = sorted({str(w.message) for w in caught})
            if scheme.kind == "dasa":
                entry["resolved"] = {
                    "c": policies[0].c,
                    "r": [p.r for p in policies],
                    "gamma0": [p.gamma0 for p in policies],
                    "hypothesis_ok": policies[0].hypothesis_ok,
                    "start_rescaled": any(p.start_rescaled for p in policies),
                }
            else:
                entry["resolved"] = {"theta": scheme.theta}
            solver = SolverConfig(
                iterations=config.iterations,
                policies=policies,
                seed=config.base_seed,
                record_every=config.record_every,
            )
            results = run_replications(
                instance, solver, config.replications, config.base_seed
            )
            curve = reduce_mse(results)
            entry["curve"] = curve
            entry["final"] = {
                "k": int(curve.ks[-1]),
                "mse": float(curve.mean[-1]),
                "ci_low": float(curve.ci_low[-1]),
                "ci_high": float(curve.ci_high[-1]),
            }
        except Exception as exc:  # preserve partial results, mark the failure
            entry["status"] = "failed"
            entry["error"] = f"{type(exc).__name__}: {exc}"
        out["schemes"].append(entry)
    return out


def _format(value: float) -> str:
    return f"{value:.6g}"


def _write_trace_csv(path: Path, setting_id: int, scheme: str, curve: MseCurve) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for i, k in enumerate(curve.ks):
        lines.append(
            f"{setting_id},{scheme},{k},"
            f"{_format(curve.mean[i])},{_format(curve.ci_low[i])},{_format(curve.ci_high[i])}"
        )
    path.write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class ExperimentResult:
    output_dir: Path
    manifest: dict
    failed: tuple

    @property
    def ok(self) -> bool:
        return not self.failed


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every (setting, scheme) pair and write the result bundle.

    Bundle layout: ``traces/S<ID>_<scheme>.csv`` per pair (columns
    setting_id, scheme, k, mse, ci_low, ci_high), ``summary.csv`` with the
    final row of each pair, and ``manifest.json`` with every resolved
    parameter, constant, seed, and warning needed to recompute the tables.
    Settings run in parallel when ``jobs > 1``; outputs are written in a
    fixed order so reruns are byte-identical.
    """
    out_dir = Path(config.output_dir)
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)

    setting_ids = list(config.setting_ids)
    if config.jobs > 1 and len(setting_ids) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_setting, [config] * len(setting_ids), setting_ids))
    else:
        results = [_run_setting(config, sid) for sid in setting_ids]

    summary_lines = [",".join(CSV_COLUMNS)]
    manifest_runs = []
    failed = []
    for res in sorted(results, key=lambda r: r["setting_id"]):
        sid = res["setting_id"]
        for entry in res["schemes"]:
            run_record = {
                "setting_id": sid,
                "instance": res["instance"],
                "scheme": entry["scheme"],
                "status": entry["status"],
                "error": entry["error"],
                "seeds": entry["seeds"],
                "constants": res["constants"],
                "reference_residual": res["reference_residual"],
                "resolved": entry.get("resolved"),
                "warnings": entry["warnings"],
            }
            if entry["status"] == "done":
                curve = entry.pop("curve")
                trace_rel = f"traces/S{sid:02d}_{entry['scheme']}.csv"
                _write_trace_csv(out_dir / trace_rel, sid, entry["scheme"], curve)
                summary_lines.append(
                    f"{sid},{entry['scheme']},{entry['final']['k']},"
                    f"{_format(entry['final']['mse'])},"
                    f"{_format(entry['final']['ci_low'])},"
                    f"{_format(entry['final']['ci_high'])}"
                )
                run_record["trace_csv"] = trace_rel
                run_record["final"] = entry["final"]
            else:
                failed.append((sid, entry["scheme"], entry["error"]))
            manifest_runs.append(run_record)

    manifest = {
        "config": {
            "instance": dataclasses.asdict(config.instance),
            "settings": list(config.setting_ids),
            "schemes": [dataclasses.asdict(s) for s in config.schemes],
            "iterations": config.iterations,
            "replications": config.replications,
            "base_seed": config.base_seed,
            "record_every": config.record_every,
        },
        "csv_columns": list(CSV_COLUMNS),
        "runs": manifest_runs,
    }
    (out_dir / "summary.csv").write_text("\n".join(summary_lines) + "\n")
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return ExperimentResult(output_dir=out_dir, manifest=manifest, failed=tuple(failed))


# ---------------------------------------------------------------------------
# summarizing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    setting_id: int
    scheme: str
    ci_low: float
    ci_high: float
    midpoint: float
    winner: str  # scheme with the lowest midpoint in this setting


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple
    robustness: dict  # scheme -> max over settings of midpoint / best midpoint

    def row(self, setting_id: int, scheme: str) -> ComparisonRow:
        for r in self.rows:
            if r.setting_id == setting_id and r.scheme == scheme:
                return r
        raise KeyError((setting_id, scheme))


def summarize(bundle_dir) -> ComparisonTable:
    """Comparison table from a completed result bundle.

    One row per (setting, scheme) with the final-MSE confidence interval and
    the per-setting winner; plus a robustness score per scheme (max over
    settings of its midpoint relative to the per-setting best).  Writes
    ``comparison.csv`` and ``robustness.csv`` next to the bundle.
    """
    bundle = Path(bundle_dir)
    summary = bundle / "summary.csv"
    if not summary.exists():
        raise FileNotFoundError(f"no summary.csv in {bundle}")
    manifest = json.loads((bundle / "manifest.json").read_text())
    incomplete = [r for r in manifest["runs"] if r["status"] != "done"]
    if incomplete:
        bad = ", ".join(f"S{r['setting_id']}/{r['scheme']}" for r in incomplete)
        raise RuntimeError(f"bundle incomplete; failed runs: {bad}")

    per_setting: dict = {}
    lines = summary.read_text().strip().splitlines()
    header = lines[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise RuntimeError(f"unexpected summary schema {header}")
    for line in lines[1:]:
        sid_s, scheme, _k, _mse, lo_s, hi_s = line.split(",")
        sid, lo, hi = int(sid_s), float(lo_s), float(hi_s)
        per_setting.setdefault(sid, {})[scheme] = (lo, hi, 0.5 * (lo + hi))
    if not per_setting:
        raise RuntimeError("summary.csv holds no rows")

    rows = []
    worst: dict = {}
    for sid in sorted(per_setting):
        schemes = per_setting[sid]
        winner = min(schemes, key=lambda s: schemes[s][2])
        best_mid = schemes[winner][2]
        for scheme in schemes:
            lo, hi, mid = schemes[scheme]
            rows.append(ComparisonRow(sid, scheme, lo, hi, mid, winner))
            score = mid / best_mid if best_mid > 0 else 1.0
            worst[scheme] = max(worst.get(scheme, 0.0), score)

    comp_lines = ["setting_id,scheme,ci_low,ci_high,midpoint,winner"]
    for r in rows:
        comp_lines.append(
            f"{r.setting_id},{r.scheme},{_format(r.ci_low)},{_format(r.ci_high)},"
            f"{_format(r.midpoint)},{r.winner}"
        )
    (bundle / "comparison.csv").write_text("\n".join(comp_lines) + "\n")
    rob_lines = ["scheme,robustness_score"]
    for scheme in sorted(worst):
        rob_lines.append(f"{scheme},{_format(worst[scheme])}")
    (bundle / "robustness.csv").write_text("\n".join(rob_lines) + "\n")
    return ComparisonTable(rows=tuple(rows), robustness=worst)
