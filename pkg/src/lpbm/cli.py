"""Experiment runner CLI.

`lpbm run <config>` executes every inequality suite described by a JSON
config and writes a JSON-lines report (one row per verification record) plus
a CSV summary.  `lpbm describe <config>` prints the execution plan without
running anything.  Exit codes: 0 all suites clean, 2 at least one fail
verdict, 1 configuration or runtime error.

Configs are declarative JSON only; reruns with the same config are
byte-identical.  Bundled configs (configs/ inside the package) can be
referenced by bare name, e.g. `lpbm run gaussian_lp_n2`.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, geometry, verify
from .functionals import UFunction
from .measures import Density1D, DensityND, MeasureSpec
from .verify import EvalContext, FunctionalSpec, InequalitySpec, PairFamily


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return obj[key]


def _parse_measure(obj: dict, n: int, path: str) -> MeasureSpec:
    variant = _require(obj, "variant", path)
    if variant == "lebesgue":
        return MeasureSpec.lebesgue(n)
    if variant == "gaussian":
        return MeasureSpec.gaussian(n)
    if variant == "product":
        factors = _require(obj, "factors", path)
        if len(factors) != n:
            raise ConfigError(f"{path}.factors", f"need {n} per-axis factors")
        made = []
        for i, f in enumerate(factors):
            fam = _require(f, "family", f"{path}.factors[{i}]")
            try:
                d = Density1D(fam, tuple(f.get("params", ())))
                d(0.0)
            except ValueError as exc:
                raise ConfigError(f"{path}.factors[{i}].family", str(exc))
            made.append(d)
        return MeasureSpec.product(made)
    if variant == "radial":
        dens = _require(obj, "density", path)
        fam = _require(dens, "family", f"{path}.density")
        params = dens.get("params", ())
        if fam == "quad_form":
            params = (np.asarray(params[0], dtype=np.float64),)
        else:
            params = tuple(params)
        try:
            d = DensityND(fam, n, params)
            d(np.zeros((1, n)))
        except ValueError as exc:
            raise ConfigError(f"{path}.density.family", str(exc))
        return MeasureSpec.radial(d)
    raise ConfigError(f"{path}.variant", f"unknown measure variant {variant!r}")


def _parse_functional(obj: dict, n: int, path: str) -> FunctionalSpec:
    kind = _require(obj, "kind", path)
    if kind == "measure":
        return FunctionalSpec("measure",
                              measure=_parse_measure(_require(obj, "measure", path),
                                                     n, f"{path}.measure"))
    if kind == "wills":
        return FunctionalSpec("wills")
    if kind == "generalized_wills":
        gauge_obj = _require(obj, "gauge", path)
        try:
            gauge = geometry.body_from_literal(gauge_obj)
        except (geometry.GeometryError, KeyError) as exc:
            raise ConfigError(f"{path}.gauge", str(exc))
        u_obj = _require(obj, "u", path)
        try:
            u = UFunction(_require(u_obj, "family", f"{path}.u"),
                          tuple(u_obj.get("params", ())))
        except ValueError as exc:
            raise ConfigError(f"{path}.u", str(exc))
        return FunctionalSpec("generalized_wills", gauge=gauge, u=u)
    if kind == "polar_quermass":
        return FunctionalSpec("polar_quermass", polar_index=int(obj.get("index", 0)))
    raise ConfigError(f"{path}.kind", f"unknown functional kind {kind!r}")


@dataclass
class ExperimentConfig:
    dimension: int
    seed: int
    families: list
    inequalities: list
    n_samples: int = 20_000
    shards: int = 1
    sigma_k: float = 3.0
    grid_m: int = 360
    mu_resolution: int = 129
    dedup_eps: float = 1e-9
    bonferroni: bool = True
    out_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    def fingerprint(self) -> str:
        return config_fingerprint(self.raw)


def canonicalize(obj):
    """Stable form: sorted keys, sorted grids, suites sorted by name."""
    if isinstance(obj, dict):
        out = {k: canonicalize(v) for k, v in sorted(obj.items())}
        for key in ("p_set", "lambda_set"):
            if key in out and isinstance(out[key], list):
                out[key] = sorted(out[key])
        for key in ("families", "inequalities"):
            if key in out and isinstance(out[key], list) \
                    and all(isinstance(x, dict) and "name" in x for x in out[key]):
                out[key] = sorted(out[key], key=lambda x: x["name"])
        return out
    if isinstance(obj, list):
        return [canonicalize(v) for v in obj]
    return obj


def config_fingerprint(raw: dict) -> str:
    blob = json.dumps(canonicalize(raw), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path_or_name: str) -> ExperimentConfig:
    raw = _read_config_json(path_or_name)
    if not isinstance(raw, dict):
        raise ConfigError("$", "config root must be an object")
    dim = int(_require(raw, "dimension", "$"))
    if "seed" not in raw:
        raise ConfigError("$.seed", "missing required field (seed is mandatory)")
    seed = int(raw["seed"])
    families = []
    fam_names = set()
    for i, f in enumerate(raw.get("families", [])):
        p = f"$.families[{i}]"
        try:
            fam = PairFamily(
                name=str(_require(f, "name", p)),
                generator=str(_require(f, "generator", p)),
                dimension=int(f.get("dimension", dim)),
                count=int(f.get("count", 20)),
                seed=f.get("seed"),
                params=dict(f.get("params", {})))
        except ValueError as exc:
            raise ConfigError(p, str(exc))
        if fam.name in fam_names:
            raise ConfigError(f"{p}.name", f"duplicate family name {fam.name!r}")
        fam_names.add(fam.name)
        families.append(fam)
    inequalities = []
    for i, q in enumerate(raw.get("inequalities", [])):
        p = f"$.inequalities[{i}]"
        fam_dim = dim
        refs = tuple(q.get("families", ()))
        for r in refs:
            if r not in fam_names:
                raise ConfigError(f"{p}.families", f"unknown family {r!r}")
        if refs:
            fam_dim = next(f.dimension for f in families if f.name == refs[0])
        func = _parse_functional(_require(q, "functional", p), fam_dim,
                                 f"{p}.functional")
        try:
            ineq = InequalitySpec(
                name=str(_require(q, "name", p)),
                functional=func,
                alpha=float(_require(q, "alpha", p)),
                C=float(q.get("C", 1.0)),
                p_set=tuple(float(x) for x in q.get("p_set", (1.0, 1.5, 2.0, 4.0))),
                lambda_set=tuple(float(x) for x in
                                 q.get("lambda_set", (0.25, 0.5, 0.75))),
                direction=str(q.get("direction",
                                    ">=" if float(q["alpha"]) > 0 else "<=")),
                families=refs)
        except ValueError as exc:
            raise ConfigError(p, str(exc))
        inequalities.append(ineq)
    sampling = raw.get("sampling", {})
    tol = raw.get("tolerances", {})
    out = raw.get("output", {})
    return ExperimentConfig(
        dimension=dim, seed=seed, families=families, inequalities=inequalities,
        n_samples=int(sampling.get("n_samples", 20_000)),
        shards=int(sampling.get("shards", 1)),
        sigma_k=float(tol.get("sigma_k", 3.0)),
        grid_m=int(tol.get("grid_m", 360)),
        mu_resolution=int(tol.get("mu_grid", 129)),
        dedup_eps=float(tol.get("dedup_eps", 1e-9)),
        bonferroni=bool(tol.get("bonferroni", True)),
        out_dir=str(out.get("dir", "out")),
        raw=raw)


def _read_config_json(path_or_name: str) -> dict:
    path = Path(path_or_name)
    if path.exists():
        text = path.read_text()
    elif "/" not in path_or_name and not path_or_name.endswith(".json"):
        ref = resources.files("lpbm").joinpath(f"configs/{path_or_name}.json")
        if not ref.is_file():
            raise ConfigError("$", f"no such config file or bundled name: {path_or_name}")
        text = ref.read_text()
    else:
        raise ConfigError("$", f"config file not found: {path_or_name}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}")


# ---------------------------------------------------------------------------
# planning and execution
# ---------------------------------------------------------------------------


def _suites(cfg: ExperimentConfig):
    for ineq in sorted(cfg.inequalities, key=lambda q: q.name):
        fam_names = ineq.families or tuple(f.name for f in cfg.families)
        for fname in sorted(fam_names):
            family = next(f for f in cfg.families if f.name == fname)
            yield ineq, family


def describe(cfg: ExperimentConfig, out=sys.stdout) -> None:
    print(f"config fingerprint: {cfg.fingerprint()}", file=out)
    print(f"seed: {cfg.seed}   samples per estimate: {cfg.n_samples}", file=out)
    total_records = 0
    total_samples = 0
    for ineq, family in _suites(cfg):
        records = family.count * len(ineq.lambda_set) * len(ineq.p_set)
        total_records += records
        est = (records + 2 * family.count) * cfg.n_samples
        total_samples += est
        print(f"suite {ineq.name}@{family.name}: n={family.dimension} "
              f"pairs={family.count} grid={len(ineq.lambda_set)}x{len(ineq.p_set)} "
              f"records={records} sample_budget~{est}", file=out)
        print(f"  admissibility certified on the lambda grid only "
              f"(grid-admissible): {sorted(ineq.lambda_set)}", file=out)
    print(f"total: {total_records} records, ~{total_samples} samples", file=out)


def _row(record, fingerprint: str) -> dict:
    return {
        "suite": record.suite,
        "pair_id": record.pair_id,
        "n": record.n,
        "lam": record.lam,
        "p": record.p,
        "lhs_value": record.lhs.value,
        "lhs_sigma": record.lhs.std_error,
        "lhs_outer": record.lhs_outer,
        "rhs_value": record.rhs.value,
        "rhs_sigma": record.rhs.std_error,
        "fk_value": record.fk.value,
        "fk_sigma": record.fk.std_error,
        "fl_value": record.fl.value,
        "fl_sigma": record.fl.std_error,
        "slack": record.slack,
        "sigma": record.sigma,
        "slack_sigma": record.slack_sigma,
        "verdict": record.verdict,
        "expect_equality": record.expect_equality,
        "fingerprint": fingerprint,
        "version": __version__,
    }


def run(cfg: ExperimentConfig, out=sys.stdout) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fingerprint = cfg.fingerprint()
    ctx = EvalContext(seed=cfg.seed, n_samples=cfg.n_samples, grid_m=cfg.grid_m,
                      mu_resolution=cfg.mu_resolution, sigma_k=cfg.sigma_k,
                      bonferroni=cfg.bonferroni)
    results = []
    rows = []
    for ineq, family in _suites(cfg):
        result = verify.run_suite(ineq, family, ctx, master_seed=cfg.seed)
        results.append(result)
        rows.extend(_row(r, fingerprint) for r in result.records)
        print(f"{result.name}: pass={result.n_pass} fail={result.n_fail} "
              f"inconclusive={result.n_inconclusive} "
              f"min_slack={result.min_slack_sigma:.2f}sigma", file=out)
    report_path = out_dir / "report.jsonl"
    with report_path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    summary_path = out_dir / "summary.csv"
    with summary_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["suite", "records", "pass", "fail", "inconclusive",
                         "min_slack_sigma", "median_slack_nonequal"])
        for res in results:
            writer.writerow([res.name, len(res.records), res.n_pass, res.n_fail,
                             res.n_inconclusive, repr(res.min_slack_sigma),
                             repr(res.median_slack_nonequal)])
    print(f"wrote {report_path} ({len(rows)} rows) and {summary_path}", file=out)
    return 2 if any(res.n_fail for res in results) else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lpbm",
        description="Run and inspect Brunn-Minkowski inequality verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "describe"):
        sp = sub.add_parser(name)
        sp.add_argument("config", help="config path or bundled config name")
        sp.add_argument("--seed-override", type=int, default=None)
        sp.add_argument("--samples-override", type=int, default=None)
        sp.add_argument("--out", type=str, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed_override is not None:
            cfg.seed = args.seed_override
            cfg.raw["seed"] = args.seed_override
        if args.samples_override is not None:
            cfg.n_samples = args.samples_override
            cfg.raw.setdefault("sampling", {})["n_samples"] = args.samples_override
        if args.out is not None:
            cfg.out_dir = args.out
        if args.command == "describe":
            describe(cfg)
            return 0
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure contract: exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
