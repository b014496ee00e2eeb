"""Config-driven experiment runner.

A config is a YAML mapping::

    kind: theorem1            # saddle-pathwise | theorem1 | corollary1 | entropy
                              # | norms | tauberian | tail-shape
    field: {...}              # FieldSpec.to_dict() layout (not used by tauberian)
    lambdas: [25, 50, 100]
    replicates: 1000
    seed: 11                  # optional; overrides field.seed
    maximizer: {starts: 24, grad_tol: 1.0e-10}
    quadrature: {tol: 1.0e-8, order: 16}
    output_dir: results
    options: {...}           # kind specific, see KIND_OPTIONS

Unknown keys anywhere are errors. Each run writes ``<kind>_<timestamp>.csv``
and ``<kind>_<timestamp>.manifest.json``; files are created exclusively and
never overwritten. A run that fails numerically leaves its rows in
``<name>.csv.partial``.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import logging
import math
import os
import statistics
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .entropy import entropy_series, metric_dimension, natural_distance_matrix
from .errors import EffectiveSampleSizeError, NumericError, ValidationError
from .extremum import MaximizerOptions
from .field_model import FieldSpec, sample_coefficients
from .laplace_saddle import MIN_ESS, log_K, ratio_from_arrays, simulate_replicates, tail_mgf_identity, laplace_tail_integral
from .orlicz import PhiFunction, bphi_norm, gpsi_norm, kramer_check, smallest_tail_constant
from .quadrature import QuadOptions
from .tail_asymptotics import AsymptoticParams, empirical_tail, laplace_integral_check, tail_shape_slope, tauberian_consistency

log = logging.getLogger(__name__)

KINDS = ("saddle-pathwise", "theorem1", "corollary1", "entropy", "norms", "tauberian", "tail-shape")
TOP_KEYS = {"kind", "field", "lambdas", "replicates", "seed", "maximizer", "quadrature",
            "output_dir", "options"}
KIND_OPTIONS = {
    "saddle-pathwise": {},
    "theorem1": {"min_ess": MIN_ESS},
    "corollary1": {},
    "entropy": {"points_per_axis": 65, "mode": "analytic-gaussian", "n_max": 8},
    "norms": {"phi": "gaussian", "p": None, "points_per_axis": 5},
    "tauberian": {"alpha": 0.0, "C_R": 1.0, "q": 2.0},
    "tail-shape": {"p": 3.0, "fraction": 0.1, "u_points": 50},
}
NEEDS_LAMBDAS = {"saddle-pathwise", "theorem1", "corollary1", "tauberian"}

CSV_COLUMNS = {
    "saddle-pathwise": ["replicate", "lambda", "M", "log_I", "log_approx", "ratio", "nondegenerate"],
    "theorem1": ["lambda", "log_mgf", "log_G", "ratio", "ratio_se", "ess", "n_replicates",
                 "ci_low", "ci_high"],
    "corollary1": ["lambda", "n", "log_tail_integral", "log_mgf", "rel_diff", "log_R",
                   "log_tail_integral_pos"],
    "entropy": ["n", "eps", "covering_number", "entropy", "term", "partial_sum", "verdict"],
    "norms": ["x", "bphi", "bphi_binding", "bphi_trimmed", "gpsi", "gpsi_binding", "tail_constant"],
    "tauberian": ["lambda", "ratio", "laplace_ratio", "laplace_constant_ratio"],
    "tail-shape": ["u", "tail", "lower95", "upper95", "source"],
}

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    field: FieldSpec | None
    lambdas: tuple
    replicates: int
    maximizer: MaximizerOptions
    quadrature: QuadOptions
    output_dir: Path
    options: dict
    raw: dict = dataclasses.field(repr=False, compare=False)

    @property
    def seed(self) -> int | None:
        return None if self.field is None else self.field.seed


def _options(block, cls, name):
    block = dict(block or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(block) - names
    if unknown:
        raise ValidationError(f"unknown {name} keys: {sorted(unknown)}")
    try:
        return cls(**block)
    except TypeError as exc:
        raise ValidationError(f"bad {name} block: {exc}") from None


def parse_config(raw: dict, seed: int | None = None, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a config mapping; ``seed`` (e.g. from ``--seed``) wins over the file."""
    if not isinstance(raw, dict):
        raise ValidationError("config must be a mapping")
    if "config" in raw and "input_hash" in raw:  # a manifest: rerun its echo
        raw = raw["config"]
    raw = json.loads(json.dumps(raw))  # plain types, detached copy
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {KINDS}, got {kind!r}")

    if seed is not None:
        raw["seed"] = int(seed)
    field_spec = None
    if kind != "tauberian":
        if "field" not in raw:
            raise ValidationError(f"kind {kind!r} needs a field block")
        block = dict(raw["field"])
        if raw.get("seed") is not None:
            block["seed"] = int(raw["seed"])
        field_spec = FieldSpec.from_dict(block)
        raw["field"] = field_spec.to_dict()
        raw["seed"] = field_spec.seed
    elif "field" in raw:
        raise ValidationError("tauberian runs take no field block")

    lambdas = tuple(float(v) for v in raw.get("lambdas") or ())
    if kind in NEEDS_LAMBDAS and not lambdas:
        raise ValidationError(f"kind {kind!r} needs a lambda grid")
    if any(not (l > 0 and math.isfinite(l)) for l in lambdas):
        raise ValidationError("lambdas must be positive and finite")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValidationError("lambda grid must be strictly increasing")

    replicates = raw.get("replicates", 1)
    if not isinstance(replicates, int) or isinstance(replicates, bool) or replicates < 1:
        raise ValidationError("replicates must be a positive integer")

    opts = dict(KIND_OPTIONS[kind])
    given = dict(raw.get("options") or {})
    unknown = set(given) - set(opts)
    if unknown:
        raise ValidationError(f"unknown options for {kind!r}: {sorted(unknown)}")
    opts.update(given)
    if kind == "tauberian":
        AsymptoticParams(float(opts["alpha"]), float(opts["C_R"]), float(opts["q"]))
    if kind == "norms":
        _phi_from_options(opts)
    if kind == "entropy" and opts["mode"] not in ("analytic-gaussian", "empirical-bphi"):
        raise ValidationError(f"unknown distance mode {opts['mode']!r}")

    out = Path(raw.get("output_dir", "results"))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    return ExperimentConfig(
        kind=kind, field=field_spec, lambdas=lambdas, replicates=replicates,
        maximizer=_options(raw.get("maximizer"), MaximizerOptions, "maximizer"),
        quadrature=_options(raw.get("quadrature"), QuadOptions, "quadrature"),
        output_dir=out, options=opts, raw=raw,
    )


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return parse_config(raw, seed)


def _phi_from_options(opts) -> PhiFunction:
    kind = opts["phi"]
    if kind == "gaussian":
        return PhiFunction.gaussian()
    if kind in ("power_p", "pure_power"):
        if opts.get("p") is None:
            raise ValidationError(f"phi kind {kind!r} needs p")
        return PhiFunction(kind, float(opts["p"]))
    raise ValidationError(f"phi kind {kind!r} is not available in configs")


def _grid_points(spec: FieldSpec, per_axis: int) -> np.ndarray:
    axes = [np.linspace(a, b, per_axis) for a, b in zip(spec.domain.lower, spec.domain.upper)]
    return np.array(list(itertools.product(*axes)))


# -- study runners: each appends rows and returns a results dict -----------------

def _run_saddle(cfg, rows):
    reps = simulate_replicates(cfg.field, cfg.lambdas, cfg.replicates,
                               quad=cfg.quadrature, maxopts=cfg.maximizer)
    d = cfg.field.dim
    for i in range(reps.n):
        for j, lam in enumerate(reps.lambdas):
            approx = 0.5 * d * math.log(2.0 * math.pi / lam) + lam * reps.maxima[i]
            li = reps.log_I[i, j]
            rows.append([int(reps.replicate_ids[i]), lam, reps.maxima[i], li, approx,
                         math.exp(li - approx), int(reps.nondegenerate[i])])
    return {"nondegenerate": int(reps.nondegenerate.sum())}


def _run_theorem1(cfg, rows):
    reps = simulate_replicates(cfg.field, cfg.lambdas, cfg.replicates,
                               quad=cfg.quadrature, maxopts=cfg.maximizer)
    low = []
    for j, lam in enumerate(reps.lambdas):
        r = ratio_from_arrays(reps.maxima, reps.log_I[:, j], lam, cfg.field.dim, min_ess=None)
        rows.append([lam, r.log_mgf, r.log_G, r.ratio, r.se_log, r.ess, r.n, r.ci[0], r.ci[1]])
        if r.ess < cfg.options["min_ess"]:
            low.append((lam, r.ess))
    if low:
        lam, ess = low[0]
        raise EffectiveSampleSizeError(
            f"effective sample size {ess:.2f} < {cfg.options['min_ess']} at lambda={lam}", ess=ess)
    return {}


def _run_corollary(cfg, rows):
    reps = simulate_replicates(cfg.field, cfg.lambdas, cfg.replicates,
                               quad=cfg.quadrature, maxopts=cfg.maximizer)
    d = cfg.field.dim
    worst = 0.0
    for j, lam in enumerate(reps.lambdas):
        lhs, rhs = tail_mgf_identity(reps.maxima, lam)
        rel = abs(math.expm1(lhs - rhs))
        worst = max(worst, rel)
        log_G = float(np.logaddexp.reduce(reps.log_I[:, j]) - math.log(reps.n) + log_K(d))
        log_R = log_G + (0.5 * d - 1.0) * math.log(lam)
        pos = laplace_tail_integral(reps.maxima, lam, lower=0.0)
        rows.append([lam, reps.n, lhs, rhs, rel, log_R,
                     pos.log_magnitude if not pos.is_zero else -math.inf])
    return {"max_rel_diff": worst}


def _run_entropy(cfg, rows):
    o = cfg.options
    pts = _grid_points(cfg.field, int(o["points_per_axis"]))
    ms = natural_distance_matrix(cfg.field, pts, o["mode"], n_replicates=cfg.replicates)
    es = entropy_series(ms, int(o["n_max"]))
    for k in range(es.n.size):
        rows.append([int(es.n[k]), es.eps[k], int(es.covering[k]), es.entropy[k],
                     es.terms[k], es.partial_sums[k], es.verdict])
    try:
        kappa = metric_dimension(ms)
    except NumericError as exc:
        kappa = None
        log.warning("metric dimension unavailable: %s", exc)
    return {"verdict": es.verdict, "kappa": kappa, "normalization": es.normalization}


def _run_norms(cfg, rows):
    o = cfg.options
    phi = _phi_from_options(o)
    pts = _grid_points(cfg.field, int(o["points_per_axis"]))
    V = sample_coefficients(cfg.field, range(cfg.replicates)) @ cfg.field.basis_values(pts).T
    for i, x in enumerate(pts):
        b = bphi_norm(V[:, i], phi, check_centered=False)
        g = gpsi_norm(V[:, i], phi)
        rows.append([" ".join(repr(float(v)) for v in x), b.value, b.binding, b.trimmed,
                     g.value, g.binding, smallest_tail_constant(V[:, i], phi)])
    kr = kramer_check(V)
    return {"kramer_mu": kr.mu, "kramer_mu_supported": kr.mu_supported}


def _run_tauberian(cfg, rows):
    o = cfg.options
    params = AsymptoticParams(float(o["alpha"]), float(o["C_R"]), float(o["q"]))
    for lam in cfg.lambdas:
        lc = laplace_integral_check(params.gamma, params.p, lam, cfg.quadrature)
        rows.append([lam, tauberian_consistency(params, lam, cfg.quadrature),
                     lc.ratio, lc.laplace_constant_ratio])
    return {"p": params.p, "gamma": params.gamma, "Delta": params.Delta}


def _run_tail_shape(cfg, rows):
    o = cfg.options
    reps = simulate_replicates(cfg.field, [], cfg.replicates, maxopts=cfg.maximizer)
    fit = tail_shape_slope(reps.maxima, float(o["p"]), float(o["fraction"]))
    M = np.sort(reps.maxima)
    u = np.unique(np.quantile(M, np.linspace(0.5, 1.0, int(o["u_points"]), endpoint=False)))
    curve = empirical_tail(M, u)
    lo, hi = curve.bands()
    for row in zip(curve.u, curve.tail, lo, hi):
        rows.append(list(row) + [curve.source])
    return {"slope": fit.slope, "intercept": fit.intercept, "n_fit": fit.n_points}


RUNNERS = {
    "saddle-pathwise": _run_saddle, "theorem1": _run_theorem1, "corollary1": _run_corollary,
    "entropy": _run_entropy, "norms": _run_norms, "tauberian": _run_tauberian,
    "tail-shape": _run_tail_shape,
}


# -- files -----------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def _csv_text(kind, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS[kind])
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def input_hash(raw: dict) -> str:
    """Git blob hash of the canonical JSON form of the validated config."""
    data = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _write_once(path: Path, text: str) -> None:
    with open(path, "x") as fh:
        fh.write(text)


def _stem(out_dir: Path, kind: str) -> str:
    ts = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    stem = f"{kind}_{ts}"
    k = 1
    while any((out_dir / f"{stem}{ext}").exists() for ext in (".csv", ".csv.partial")):
        stem = f"{kind}_{ts}-{k}"
        k += 1
    return stem


@dataclasses.dataclass(frozen=True)
class RunOutcome:
    status: int
    csv_path: Path | None
    manifest_path: Path | None
    results: dict
    error: str | None = None


def run_experiment(cfg: ExperimentConfig) -> RunOutcome:
    """Run one study; numeric failures become exit status 3 with partial rows kept."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(out, cfg.kind)
    rows: list = []
    t0 = time.perf_counter()
    try:
        results = RUNNERS[cfg.kind](cfg, rows)
    except NumericError as exc:
        partial = out / f"{stem}.csv.partial"
        _write_once(partial, _csv_text(cfg.kind, rows))
        msg = f"{type(exc).__name__}: {exc}"
        log.error("numeric failure in %s run: %s", cfg.kind, msg)
        return RunOutcome(EXIT_NUMERIC, partial, None, {}, msg)
    wall = time.perf_counter() - t0

    tmp = out / f"{stem}.csv.partial"
    _write_once(tmp, _csv_text(cfg.kind, rows))
    csv_path = out / f"{stem}.csv"
    if csv_path.exists():
        raise FileExistsError(csv_path)
    os.replace(tmp, csv_path)
    manifest = {
        "kind": cfg.kind,
        "csv": csv_path.name,
        "seed": cfg.seed,
        "input_hash": input_hash(cfg.raw),
        "wall_time_s": wall,
        "created": datetime.now(timezone.utc).isoformat(),
        "results": results,
        "config": cfg.raw,
    }
    man_path = out / f"{stem}.manifest.json"
    _write_once(man_path, json.dumps(manifest, indent=2, sort_keys=True, default=_fmt) + "\n")
    return RunOutcome(EXIT_OK, csv_path, man_path, results)


# -- summary -----------------------------------------------------------------------

def _read_rows(path: Path, kind: str):
    """Rows as dicts; malformed rows are skipped and counted."""
    cols = CSV_COLUMNS[kind]
    good, bad = [], 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != cols:
            return [], 1
        for r in reader:
            if len(r) != len(cols):
                bad += 1
                continue
            row = {}
            try:
                for c, v in zip(cols, r):
                    row[c] = v if c in ("verdict", "source", "x") else float(v)
            except ValueError:
                bad += 1
                continue
            good.append(row)
    return good, bad


def _kind_of(name: str):
    for k in sorted(KINDS, key=len, reverse=True):
        if name.startswith(k + "_"):
            return k
    return None


def _verdict(ok: bool, text: str) -> str:
    return f"**{'PASS' if ok else 'FAIL'}**: {text}"


def _section(kind, rows, manifests):
    lines = [f"## {kind}", ""]
    if kind in ("saddle-pathwise",):
        by = {}
        for r in rows:
            if r["nondegenerate"]:
                by.setdefault(r["lambda"], []).append(abs(r["ratio"] - 1.0))
        lams = sorted(by)
        med = [statistics.median(by[l]) for l in lams]
        lines += ["| lambda | samples | median abs(ratio-1) |", "|---|---|---|"]
        lines += [f"| {l:g} | {len(by[l])} | {m:.3e} |" for l, m in zip(lams, med)]
        if med and len(by[lams[-1]]) == 1:
            # one deterministic sample: only the largest-lambda accuracy matters
            lines += ["", _verdict(med[-1] <= 0.005, f"lambda={lams[-1]:g}: {med[-1]:.3e} <= 0.005")]
        elif med:
            mono = all(b < a for a, b in zip(med, med[1:]))
            lines += ["", _verdict(mono and med[-1] <= 0.05,
                                   f"strictly decreasing={mono}, last={med[-1]:.3e} <= 0.05")]
    elif kind == "theorem1":
        rows = sorted(rows, key=lambda r: r["lambda"])
        lines += ["| lambda | n | ratio | 95% CI | abs(ratio-1) | ESS |", "|---|---|---|---|---|---|"]
        for r in rows:
            lines.append(f"| {r['lambda']:g} | {int(r['n_replicates'])} | {r['ratio']:.4f} | "
                         f"[{r['ci_low']:.4f}, {r['ci_high']:.4f}] | {abs(r['ratio'] - 1):.3e} | "
                         f"{r['ess']:.1f} |")
        if rows:
            errs = [abs(r["ratio"] - 1) for r in rows]
            last = rows[-1]
            ok = (0.8 <= last["ratio"] <= 1.2 and last["ci_low"] <= 1 <= last["ci_high"]
                  and last["ess"] >= MIN_ESS)
            mono = all(b < a for a, b in zip(errs, errs[1:]))
            lines += ["", f"abs(ratio-1) monotone in lambda: {mono}",
                      _verdict(ok, f"lambda={last['lambda']:g}: ratio in [0.8, 1.2], CI covers 1, "
                                   f"ESS >= {MIN_ESS:g}")]
    elif kind == "corollary1":
        lines += ["| lambda | n | rel diff |", "|---|---|---|"]
        lines += [f"| {r['lambda']:g} | {int(r['n'])} | {r['rel_diff']:.2e} |" for r in rows]
        if rows:
            worst = max(r["rel_diff"] for r in rows)
            lines += ["", _verdict(worst <= 1e-6, f"max rel diff {worst:.2e} <= 1e-6")]
    elif kind == "entropy":
        lines += ["| n | eps | N | term | partial sum |", "|---|---|---|---|---|"]
        lines += [f"| {int(r['n'])} | {r['eps']:.4g} | {int(r['covering_number'])} | "
                  f"{r['term']:.4g} | {r['partial_sum']:.4g} |" for r in rows]
        verdicts = {r["verdict"] for r in rows}
        kappas = [m["results"].get("kappa") for m in manifests]
        lines += ["", f"verdicts: {', '.join(sorted(verdicts))}",
                  f"metric dimension: {', '.join('n/a' if k is None else f'{k:.3f}' for k in kappas)}"]
    elif kind == "norms":
        lines += ["| x | B(phi) | G(psi) | tail C |", "|---|---|---|---|"]
        lines += [f"| {r['x']} | {r['bphi']:.4f} | {r['gpsi']:.4f} | {r['tail_constant']:.4f} |"
                  for r in rows]
        mus = [m["results"].get("kramer_mu") for m in manifests]
        lines += ["", f"Kramer mu: {', '.join(f'{m:.4g}' for m in mus if m is not None)}"]
    elif kind == "tauberian":
        rows = sorted(rows, key=lambda r: r["lambda"])
        lines += ["| lambda | forward ratio | Laplace ratio | with (p-1)^(-1/2) |", "|---|---|---|---|"]
        lines += [f"| {r['lambda']:g} | {r['ratio']:.6f} | {r['laplace_ratio']:.6f} | "
                  f"{r['laplace_constant_ratio']:.6f} |" for r in rows]
        for m in manifests:
            pv = m["results"].get("p")
            if pv is not None:
                lines.append(f"Laplace-constant limit (p-1)^(-1/2) for p={pv:g}: {(pv - 1) ** -0.5:.6f}")
    elif kind == "tail-shape":
        for m in manifests:
            s = m["results"].get("slope")
            if s is not None:
                lines.append(_verdict(abs(s - 1) <= 0.15, f"{m['csv']}: slope {s:.4f} within 1 +- 0.15"))
    return lines


def summarize(output_dir) -> Path:
    """Write ``summary.md`` with one section per experiment kind found."""
    out = Path(output_dir)
    files = sorted(p for p in out.glob("*.csv")) if out.is_dir() else []
    groups: dict = {}
    for p in files:
        k = _kind_of(p.name)
        if k is not None:
            groups.setdefault(k, []).append(p)
    if not groups:
        raise ValidationError(f"no experiment CSVs in {out}")
    lines = ["# Experiment summary", ""]
    for kind in KINDS:
        if kind not in groups:
            continue
        rows, bad, manifests = [], 0, []
        for p in groups[kind]:
            r, b = _read_rows(p, kind)
            rows += r
            bad += b
            man = p.with_name(p.name[:-4] + ".manifest.json")
            if man.exists():
                try:
                    manifests.append(json.loads(man.read_text()))
                except json.JSONDecodeError:
                    bad += 1
        lines += _section(kind, rows, manifests)
        lines += ["", f"files: {len(groups[kind])}, rows: {len(rows)}, skipped rows: {bad}", ""]
    path = out / "summary.md"
    path.write_text("\n".join(lines))
    return path
