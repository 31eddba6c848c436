"""JSON scenarios: parsing, running the closed form plus requested checks, reports.

Scenario document::

    {
      "name": "ei-poly",
      "dim": 3,
      "family": {"kind": "EQUAL_INPUT", "q": [<tf>, <tf>, <tf>]},
      "horizon": 2.0,
      "grid_points": 11,
      "tolerances": {"quadrature": 1e-10, "series": 1e-12, "oracle_rtol": 1e-7},
      "checks": ["ORACLE_RK", "DETERMINANT"],
      "seed": 0
    }

PERTURBED families take ``mu`` (a time function), ``Q0`` and ``q``; COMMUTING
families take ``terms`` (a list of ``{"a": <tf>, "K": <matrix>}``) and ``q``.
A matrix is an explicit list of rows, ``"zero"``, ``"constant_input"``
(J - I) or ``{"kind": "random_rate" | "random_zero_row_sum", "scale": s,
"stream": k, "power": p}``, drawn from ``fixtures.Lcg(seed + k)`` and raised
to the power p.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fixtures, flows, oracles
from .algebra import constant_input_generator
from .errors import MarkovFlowError, SchemaError
from .families import CommutingFamily, EqualInputFamily, PerturbedFamily
from .timefn import VectorTimeFunction, time_function_from_dict

log = logging.getLogger("markovflow")

CHECKS = ("ORACLE_RK", "ORACLE_PBS", "MAGNUS_RESIDUAL", "EMBEDDABILITY", "DETERMINANT", "STRUCTURE")
DEFAULT_CHECKS = ("ORACLE_RK", "DETERMINANT", "STRUCTURE")
KINDS = ("EQUAL_INPUT", "PERTURBED", "COMMUTING")

LOG_TOL = 1e-8
MAGNUS_TOL = 1e-6
DET_RTOL = 1e-8
STRUCTURE_TOL = 1e-10
MAX_DIM = 64


@dataclass(frozen=True)
class Tolerances:
    quadrature: float = 1e-10
    series: float = 1e-12
    oracle_rtol: float = 1e-7


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    dim: int
    family: object
    horizon: float
    grid_points: int
    tolerances: Tolerances
    checks: tuple
    seed: int = 0
    magnus_order: int = 8
    fd_step: float = 1e-5

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.grid_points)

    @property
    def kind(self) -> str:
        return self.family.kind

    def is_rate_family(self) -> bool:
        return isinstance(self.family, EqualInputFamily) and self.family.is_rate(self.horizon)


# parsing ----------------------------------------------------------------------


def _get(doc, key, path, types, default=None, required=False):
    if key not in doc:
        if required:
            raise SchemaError("missing field", path=f"{path}.{key}")
        return default
    val = doc[key]
    if isinstance(val, bool) and bool not in types:
        raise SchemaError("wrong type", path=f"{path}.{key}", got="bool")
    if not isinstance(val, types):
        raise SchemaError("wrong type", path=f"{path}.{key}", got=type(val).__name__)
    return val


def _positive(val, path):
    if not (math.isfinite(val) and val > 0):
        raise SchemaError("must be a positive finite number", path=path, got=val)
    return float(val)


def _matrix(node, d, seed, path):
    if node == "zero":
        return np.zeros((d, d))
    if node == "constant_input":
        return constant_input_generator(d)
    if isinstance(node, dict):
        kind = node.get("kind")
        makers = {"random_rate": fixtures.rate_matrix, "random_zero_row_sum": fixtures.zero_row_sum_matrix}
        if kind not in makers:
            raise SchemaError("unknown matrix kind", path=f"{path}.kind", kind=kind)
        scale = _positive(_get(node, "scale", path, (int, float), 1.0), f"{path}.scale")
        stream = _get(node, "stream", path, (int,), 0)
        power = _get(node, "power", path, (int,), 1)
        if power < 1:
            raise SchemaError("power must be >= 1", path=f"{path}.power")
        K = makers[kind](fixtures.Lcg(seed + stream), d, scale)
        return np.linalg.matrix_power(K, power)
    if isinstance(node, list):
        try:
            K = np.array(node, dtype=np.float64)
        except (TypeError, ValueError):
            raise SchemaError("matrix rows must be numbers", path=path) from None
        if K.shape != (d, d):
            raise SchemaError("matrix shape does not match dim", path=path, shape=K.shape, dim=d)
        if not np.all(np.isfinite(K)):
            raise SchemaError("matrix entries must be finite", path=path)
        return K
    raise SchemaError("unrecognised matrix node", path=path)


def _family(doc, d, seed, path):
    if not isinstance(doc, dict):
        raise SchemaError("family must be an object", path=path)
    kind = _get(doc, "kind", path, (str,), required=True)
    if kind not in KINDS:
        raise SchemaError("unknown family kind", path=f"{path}.kind", kind=kind)
    q = VectorTimeFunction.from_list(_get(doc, "q", path, (list,), required=True), f"{path}.q")
    if q.dim != d:
        raise SchemaError("q length does not match dim", path=f"{path}.q", length=q.dim, dim=d)
    if kind == "EQUAL_INPUT":
        return EqualInputFamily(q)
    if kind == "PERTURBED":
        mu = time_function_from_dict(_get(doc, "mu", path, (dict, int, float), required=True), f"{path}.mu")
        Q0 = _matrix(doc.get("Q0", "constant_input"), d, seed, f"{path}.Q0")
        return PerturbedFamily(mu, Q0, q)
    terms = _get(doc, "terms", path, (list,), required=True)
    if not terms:
        raise SchemaError("terms must be non-empty", path=f"{path}.terms")
    parsed = []
    for k, term in enumerate(terms):
        tp = f"{path}.terms[{k}]"
        if not isinstance(term, dict):
            raise SchemaError("term must be an object", path=tp)
        a = time_function_from_dict(_get(term, "a", tp, (dict, int, float), required=True), f"{tp}.a")
        parsed.append((a, _matrix(_get(term, "K", tp, (list, str, dict), required=True), d, seed, f"{tp}.K")))
    return CommutingFamily(tuple(parsed), q)


def scenario_from_dict(doc) -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError("scenario must be a JSON object", path="$")
    name = _get(doc, "name", "$", (str,), required=True)
    d = _get(doc, "dim", "$", (int,), required=True)
    if not 2 <= d <= MAX_DIM:
        raise SchemaError("dim must lie in [2, 64]", path="$.dim", got=d)
    seed = _get(doc, "seed", "$", (int,), 0)
    horizon = _positive(_get(doc, "horizon", "$", (int, float), required=True), "$.horizon")
    grid_points = _get(doc, "grid_points", "$", (int,), 11)
    if grid_points < 2:
        raise SchemaError("grid_points must be >= 2", path="$.grid_points")
    tol_doc = _get(doc, "tolerances", "$", (dict,), {})
    tol = Tolerances(
        **{
            k: _positive(_get(tol_doc, k, "$.tolerances", (int, float), getattr(Tolerances, k)), f"$.tolerances.{k}")
            for k in ("quadrature", "series", "oracle_rtol")
        }
    )
    checks = _get(doc, "checks", "$", (list,), list(DEFAULT_CHECKS))
    for i, c in enumerate(checks):
        if c not in CHECKS:
            raise SchemaError("unknown check", path=f"$.checks[{i}]", check=c)
    checks = tuple(dict.fromkeys(checks))
    magnus = _get(doc, "magnus", "$", (dict,), {})
    order = _get(magnus, "order", "$.magnus", (int,), 8)
    if not 0 <= order <= 60:
        raise SchemaError("magnus order must lie in [0, 60]", path="$.magnus.order")
    fd_step = _positive(_get(magnus, "fd_step", "$.magnus", (int, float), 1e-5), "$.magnus.fd_step")
    family = _family(doc.get("family"), d, seed, "$.family")
    family.validate(horizon)
    return Scenario(name, d, family, horizon, grid_points, tol, checks, seed, order, fd_step)


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("invalid JSON", path="$", line=exc.lineno, column=exc.colno) from None
    return scenario_from_dict(doc)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


# running ----------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    status: str  # PASS, FAIL, SKIPPED or ERROR
    residual: float | None
    threshold: float
    per_point: np.ndarray
    reason: str = ""

    @property
    def failed(self) -> bool:
        return self.status in ("FAIL", "ERROR")


@dataclass
class RunReport:
    scenario: Scenario
    flow: flows.FlowResult
    checks: list
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not any(c.failed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _rel_diff(A, B):
    scale = np.maximum(1.0, np.abs(B).max(axis=(-2, -1)))
    return np.abs(A - B).max(axis=(-2, -1)) / scale


def _verdict(name, per_point, threshold, reason=""):
    vals = per_point[np.isfinite(per_point)]
    if vals.size == 0:
        return CheckResult(name, "SKIPPED", None, threshold, per_point, reason or "no evaluable grid points")
    worst = float(vals.max())
    return CheckResult(name, "PASS" if worst <= threshold else "FAIL", worst, threshold, per_point, reason)


def _skip_reason(flow, grid, indices):
    if not indices:
        return ""
    first = min(indices)
    return f"{len(indices)} point(s) skipped; first at t={grid[first]:.6g}: {flow.skipped.get(first, '')}"


class _Runner:
    def __init__(self, sc: Scenario, flow: flows.FlowResult):
        self.sc = sc
        self.flow = flow
        self.grid = flow.grid
        self._ode = None

    def ode(self):
        if self._ode is None:
            self._ode = oracles.ode_solve(self.sc.family, self.grid, oracles.ODEConfig(rtol=1e-10, atol=1e-12))
        return self._ode

    def oracle_rk(self):
        return _verdict("ORACLE_RK", _rel_diff(self.flow.M, self.ode()), self.sc.tolerances.oracle_rtol)

    def oracle_pbs(self):
        cfg = oracles.PBSConfig(tol=self.sc.tolerances.quadrature)
        M = oracles.pbs_solve(self.sc.family, self.grid, cfg)
        return _verdict("ORACLE_PBS", _rel_diff(self.flow.M, M), self.sc.tolerances.oracle_rtol)

    def determinant(self):
        det_ode = np.linalg.det(self.ode())
        res = np.abs(self.flow.det - det_ode) / np.maximum(np.abs(self.flow.det), 1e-300)
        return _verdict("DETERMINANT", res, DET_RTOL)

    def embeddability(self):
        per = np.full(self.grid.size, np.nan)
        missing = []
        rate = self.sc.is_rate_family()
        not_embeddable = []
        for i, R in enumerate(self.flow.R):
            if R is None:
                missing.append(i)
                continue
            per[i] = float(np.abs(oracles.dense_expm(R) - self.flow.M[i]).max())
            if rate and not self.flow.embeddable[i]:
                not_embeddable.append(i)
                per[i] = np.inf
        reason = _skip_reason(self.flow, self.grid, missing)
        if not_embeddable:
            t = self.grid[not_embeddable[0]]
            reason = f"rate family not embeddable at t={t:.6g}" + (f"; {reason}" if reason else "")
        res = _verdict("EMBEDDABILITY", per, LOG_TOL, reason)
        if not_embeddable:
            res.status, res.residual = "FAIL", math.inf
        return res

    def magnus(self):
        per = np.full(self.grid.size, np.nan)
        h = self.sc.fd_step
        bps = np.asarray(self.sc.family.breakpoints())
        skipped = []
        for i, t in enumerate(self.grid):
            if t < h or (bps.size and np.any(np.abs(bps - t) <= h)):
                continue
            try:
                per[i] = oracles.magnus_residual(self.sc.family, t, self.sc.magnus_order, h, self.sc.tolerances.quadrature)
            except MarkovFlowError as exc:
                skipped.append(i)
                self.flow.skipped.setdefault(i, str(exc))
        return _verdict("MAGNUS_RESIDUAL", per, MAGNUS_TOL, _skip_reason(self.flow, self.grid, skipped))

    def structure(self):
        M = self.flow.M
        per = np.abs(M.sum(axis=-1) - 1.0).max(axis=-1)
        if self.sc.is_rate_family():
            per = np.maximum(per, np.maximum(0.0, -M.min(axis=(-2, -1))))
        if self.flow.x_traj is not None:
            # x(t) < 1 from the identity start
            per = np.where(self.flow.x_traj.sum(axis=1) < 1.0, per, np.inf)
        if self.flow.A_tri is not None:
            per = np.maximum(per, _nil_ideal_residual(self.flow.A_tri))
            R0 = flows._R0_function(self.sc.family)(self.grid)
            for i, R in enumerate(self.flow.R):
                if R is not None:
                    per[i] = max(per[i], float(_nil_ideal_residual(R - R0[i])))
        return _verdict("STRUCTURE", per, STRUCTURE_TOL)


def _nil_ideal_residual(A):
    """Distance of A (or a stack) from the trace-zero equal-rows matrices."""
    A = np.asarray(A)
    rows = np.abs(A - A[..., :1, :]).max(axis=(-2, -1))
    tr = np.abs(np.trace(A, axis1=-2, axis2=-1))
    return np.maximum(rows, tr)


_CHECK_METHODS = {
    "ORACLE_RK": "oracle_rk",
    "ORACLE_PBS": "oracle_pbs",
    "MAGNUS_RESIDUAL": "magnus",
    "EMBEDDABILITY": "embeddability",
    "DETERMINANT": "determinant",
    "STRUCTURE": "structure",
}


def run(sc: Scenario) -> RunReport:
    """Closed-form flow on the scenario grid followed by every requested check."""
    start = time.perf_counter()
    tol = sc.tolerances
    grid = sc.grid
    fam = sc.family
    if isinstance(fam, EqualInputFamily):
        flow = flows.ei_flow(fam, grid, tol.quadrature)
    elif isinstance(fam, PerturbedFamily):
        flow = flows.perturbed_flow(fam, grid, tol.quadrature, tol.series)
    else:
        flow = flows.commuting_flow(fam, grid, tol.quadrature, tol.series)
    timing = {"flow": time.perf_counter() - start}
    for i, why in sorted(flow.skipped.items()):
        log.warning("%s: log skipped at t=%.6g: %s", sc.name, grid[i], why)
    runner = _Runner(sc, flow)
    results = []
    for name in sc.checks:
        t0 = time.perf_counter()
        try:
            res = getattr(runner, _CHECK_METHODS[name])()
        except MarkovFlowError as exc:
            log.error("%s: check %s raised %s", sc.name, name, exc)
            res = CheckResult(name, "ERROR", None, math.nan, np.full(grid.size, np.nan), str(exc))
        timing[name] = time.perf_counter() - t0
        log.info("%s: %s %s residual=%s", sc.name, name, res.status, res.residual)
        results.append(res)
    return RunReport(sc, flow, results, timing)


# reports ---------------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    x = float(x) + 0.0
    if math.isnan(x):
        return ""
    return repr(x)


def _jnum(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def csv_header(report: RunReport) -> list[str]:
    d = report.scenario.dim
    idx = [f"{i}{j}" if d <= 9 else f"{i}_{j}" for i in range(1, d + 1) for j in range(1, d + 1)]
    cols = ["t"] + [f"M{k}" for k in idx] + [f"R{k}" for k in idx] + ["det", "embeddable"]
    return cols + [f"res_{c.name}" for c in report.checks]


def to_csv(report: RunReport) -> str:
    """t, row-major M, row-major R (empty if skipped), det, embeddable, per-check residuals."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(report))
    flow = report.flow
    d = report.scenario.dim
    for i, t in enumerate(flow.grid):
        R = flow.R[i]
        emb = flow.embeddable[i]
        row = [_num(t)] + [_num(v) for v in flow.M[i].ravel()]
        row += [""] * (d * d) if R is None else [_num(v) for v in R.ravel()]
        row += [_num(flow.det[i]), "" if emb is None else str(bool(emb)).lower()]
        row += [_num(c.per_point[i]) for c in report.checks]
        w.writerow(row)
    return buf.getvalue()


def to_json(report: RunReport) -> str:
    sc = report.scenario
    flow = report.flow
    rows = []
    for i, t in enumerate(flow.grid):
        rows.append(
            {
                "t": _jnum(t),
                "M": [[_jnum(v) for v in r] for r in flow.M[i]],
                "R": None if flow.R[i] is None else [[_jnum(v) for v in r] for r in flow.R[i]],
                "det": _jnum(flow.det[i]),
                "embeddable": flow.embeddable[i],
                "skipped": flow.skipped.get(i),
            }
        )
    doc = {
        "name": sc.name,
        "kind": sc.kind,
        "dim": sc.dim,
        "horizon": sc.horizon,
        "grid_points": sc.grid_points,
        "seed": sc.seed,
        "passed": report.passed,
        "checks": [
            {
                "name": c.name,
                "status": c.status,
                "residual": _jnum(c.residual),
                "threshold": _jnum(c.threshold),
                "reason": c.reason,
            }
            for c in report.checks
        ],
        "diagnostics": {k: _jnum(v) if isinstance(v, float) else v for k, v in sorted(flow.diagnostics.items())},
        "rows": rows,
    }
    return json.dumps(doc, indent=2) + "\n"


def summary_lines(report: RunReport) -> list[str]:
    name = report.scenario.name
    out = []
    for c in report.checks:
        res = "-" if c.residual is None else f"{c.residual:.3e}"
        line = f"{name:<28} {c.name:<16} {c.status:<7} residual={res} threshold={c.threshold:.1e}"
        if c.reason:
            line += f"  ({c.reason})"
        out.append(line)
    return out


def bundled_scenarios() -> list[Path]:
    return sorted((Path(__file__).parent / "scenarios").glob("*.json"))
