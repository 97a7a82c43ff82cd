"""Batch front-end: the `distil` command.

Subcommands: `state` (build an input state and summarize it), `protocol`
(evaluate a named scheme once), `curve` (achievable fidelity over a
success-probability grid), `bound` (semidefinite upper bounds), `seesaw`
(alternating protocol improvement), `certify` (analytic dual certificates
against solver bounds), `figure` (regenerate the data files behind the
standard figures), and `sweep` (several methods over one grid).

Output contracts
----------------
Tabular commands write CSV by default and JSON with ``--format json``;
floats are rendered with 17 significant digits so parsing the file back
reproduces them exactly, and reruns are byte-identical.  Schemas:

* ``curve``:  ``delta,fidelity,source``
* ``bound``:  ``method,delta,bound,dual_gap,status``
* ``sweep``:  ``method,delta,bound_or_fidelity,dual_gap,status,source_spec``

With ``--fixed-fidelity`` the `bound` command maximizes success probability
at a pinned fidelity, and the pinned value rides in the ``delta`` column.
`figure` writes one CSV per curve plus a ``manifest.json`` recording the
tool version, tolerance, grid, and per-file schema.

Exit codes: 0 on success, 2 for invalid configuration, 3 when a solve
fails outright, 4 when a requested target is infeasible.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    BoundResult,
    bse1_fidelity_bound,
    bse1_fidelity_problem,
    default_delta_grid,
    eval_fidelity_dual,
    eval_success_dual,
    ppt_fidelity_bound,
    ppt_fidelity_bound_full,
    ppt_fidelity_problem,
    ppt_fidelity_problem_full,
    ppt_success_bound,
    ppt_success_problem,
)
from .certificates import (
    binary_entropy,
    dejmps_fidelity_certificate,
    dejmps_success_certificate,
    epl_block_decomposition,
    relative_entropy,
    sep_guess_state,
)
from .protocols import (
    FlagRule,
    KrausProtocol,
    ProtocolOutcome,
    achievable_curve,
    bbpssw,
    dejmps,
    dejmps_circuit,
    dejmps_protocol,
    epl_d,
    epl_d_protocol,
    epl_extrapolate,
    extrapolate_to_delta,
    filtering,
    filtering_protocol,
    identity_protocol,
    modified_filtering_optimal,
)
from .qmath import DensityMatrix, fidelity_to_target, is_ppt, partial_trace, to_json_dict
from .sdp_core import DEFAULT_TOL
from .seesaw import SeesawInfeasible, seesaw_run
from .states import StateSpec, make_state, parse_state_spec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4

# how close a grid point must sit to a protocol's natural success rate to be
# labeled as the protocol itself rather than a discard/extrapolation row
POINT_LABEL_TOL = 1e-9

CURVE_HEADER = ("delta", "fidelity", "source")
BOUND_HEADER = ("method", "delta", "bound", "dual_gap", "status")
SWEEP_HEADER = ("method", "delta", "bound_or_fidelity", "dual_gap", "status", "source_spec")

_BOUND_FNS = {
    "ppt": ppt_fidelity_bound,
    "ppt-full": ppt_fidelity_bound_full,
    "bse1": bse1_fidelity_bound,
}
_PROBLEM_FNS = {
    "ppt": ppt_fidelity_problem,
    "ppt-full": ppt_fidelity_problem_full,
    "bse1": bse1_fidelity_problem,
}

PROTOCOL_NAMES = ("filtering", "dejmps", "dejmps-circuit", "bbpssw", "epl-d", "epl-extrapolate")
CURVE_PROTOCOLS = ("filtering", "dejmps", "dejmps-circuit", "bbpssw", "epl-d")
INIT_NAMES = ("filtering:<eps>", "dejmps", "epl-d", "identity")


class ConfigError(ValueError):
    """Bad command-line input: unknown names, malformed grids, missing flags."""


# ---------------------------------------------------------------------------
# shared plumbing


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid {text!r} is not of the form start:stop:count")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"grid {text!r} has non-numeric pieces") from None
    if count < 1:
        raise ConfigError("grid needs at least one point")
    return np.linspace(start, stop, count)


def _check_delta_grid(grid: np.ndarray) -> None:
    if grid.min() <= 0.0 or grid.max() > 1.0:
        raise ConfigError("success-probability grid must lie in (0, 1]")


def _state_from(text: str) -> tuple[StateSpec, DensityMatrix]:
    try:
        spec = parse_state_spec(text)
        return spec, make_state(spec)
    except OSError as exc:
        raise ConfigError(str(exc)) from None


def _write_text(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _render_rows(header: tuple[str, ...], rows: list[list], fmt: str) -> str:
    if fmt == "json":
        payload = [dict(zip(header, row)) for row in rows]
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _dump_json(payload: dict, out: str | None) -> None:
    _write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", out)


def _exit_from_statuses(statuses) -> int:
    seen = set(statuses)
    if seen & {"solver-failure", "unbounded"}:
        return EXIT_SOLVER
    if "infeasible" in seen:
        return EXIT_INFEASIBLE
    return EXIT_OK


def _input_copy_fidelity(rho: DensityMatrix) -> float:
    """Fidelity of the first input copy's marginal to its own target."""
    alice = rho.layout.party_labels("Alice")
    bob = rho.layout.party_labels("Bob")
    first = partial_trace(rho, [alice[0], bob[0]])
    return fidelity_to_target(first, first.layout.party_dim("Alice"))


def _run_protocol(
    name: str,
    rho: DensityMatrix,
    eps: float | None = None,
    r: float | None = None,
    spec: StateSpec | None = None,
) -> ProtocolOutcome:
    if name == "filtering":
        if eps is None:
            raise ConfigError("filtering needs --eps")
        return filtering(rho, eps)
    if name == "dejmps":
        return dejmps(rho)
    if name == "dejmps-circuit":
        return dejmps_circuit(rho)
    if name == "bbpssw":
        return bbpssw(rho)
    if name == "epl-d":
        return epl_d(rho)
    if name == "epl-extrapolate":
        if r is None:
            raise ConfigError("epl-extrapolate needs --r")
        if spec is None or spec.family != "epl":
            raise ConfigError("epl-extrapolate works on epl:<p>,<p_d> states only")
        return epl_extrapolate(spec.params[0], spec.params[1], r)
    raise ConfigError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOL_NAMES)}")


def _achievable_rows(
    base: ProtocolOutcome,
    f_in: float | None,
    grid: np.ndarray,
    label: str,
    epl_params: tuple[float, float] | None = None,
) -> list[list]:
    """Frontier rows for one protocol: discard below its natural success
    rate, the point itself on it, extrapolation above it."""
    rows = []
    for raw in grid:
        delta = float(raw)
        if delta <= base.p_succ + POINT_LABEL_TOL:
            fid = base.fidelity
            source = label if abs(delta - base.p_succ) <= POINT_LABEL_TOL else "discard"
        elif epl_params is not None:
            p, p_d = epl_params
            r = (delta - base.p_succ) / (1.0 - base.p_succ)
            fid = epl_extrapolate(p, p_d, r).fidelity
            source = "extrapolation"
        else:
            if f_in is None:
                raise ConfigError(f"no input-copy fidelity to extrapolate {label} with")
            fid = extrapolate_to_delta(base, f_in, delta).fidelity
            source = "extrapolation"
        rows.append([delta, float(fid), source])
    return rows


# ---------------------------------------------------------------------------
# grid solving (shared by bound, sweep, figure)


def _solve_point(task: tuple[str, str, int, float, float, bool]) -> BoundResult:
    method, spec_text, d_target, delta, tol, delta_leq = task
    fn = _BOUND_FNS[method]
    return fn(make_state(spec_text), d_target, delta, tol=tol, delta_leq=delta_leq)


def _solve_grid(
    method: str,
    spec_text: str,
    d_target: int,
    grid: np.ndarray,
    tol: float,
    delta_leq: bool,
    jobs: int,
) -> list[BoundResult]:
    tasks = [(method, spec_text, d_target, float(d), tol, delta_leq) for d in grid]
    if jobs <= 1 or len(tasks) == 1:
        return [_solve_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_point, tasks))


def _bound_curve(
    method: str,
    spec_text: str,
    d_target: int,
    grid: np.ndarray,
    tol: float,
    jobs: int,
) -> list[list]:
    """Bound values as curve rows; figure data must not contain bad solves."""
    rows = []
    for res in _solve_grid(method, spec_text, d_target, grid, tol, False, jobs):
        if res.status not in ("optimal", "near-optimal"):
            raise RuntimeError(
                f"{method} at delta = {res.delta_or_F:g} ended with status {res.status}"
            )
        rows.append([float(res.delta_or_F), float(res.value), method])
    return rows


# ---------------------------------------------------------------------------
# state / protocol / curve


def _cmd_state(args) -> int:
    spec, rho = _state_from(args.spec)
    info = {
        "spec": spec.text(),
        "family": spec.family,
        "params": list(spec.params),
        "copies": spec.copies,
        "dim": rho.layout.dim,
        "alice_dim": rho.layout.party_dim("Alice"),
        "bob_dim": rho.layout.party_dim("Bob"),
        "labels": list(rho.layout.labels),
        "ppt": is_ppt(rho),
        "input_copy_fidelity": _input_copy_fidelity(rho),
    }
    if args.dump:
        info["operator"] = to_json_dict(rho)
    _dump_json(info, args.out)
    return EXIT_OK


def _cmd_protocol(args) -> int:
    spec, rho = _state_from(args.state)
    outcome = _run_protocol(args.name, rho, eps=args.eps, r=args.r, spec=spec)
    payload = {
        "protocol": args.name,
        "state": spec.text(),
        "p_succ": outcome.p_succ,
        "fidelity": outcome.fidelity,
        "output": to_json_dict(outcome.output),
    }
    _dump_json(payload, args.out)
    return EXIT_OK


def _cmd_curve(args) -> int:
    spec, rho = _state_from(args.state)
    grid = _parse_grid(args.delta)
    _check_delta_grid(grid)
    outcome = _run_protocol(args.protocol, rho, eps=args.eps, spec=spec)
    epl_params = None
    if args.protocol == "epl-d" and spec.family == "epl":
        epl_params = (spec.params[0], spec.params[1])
    rows = _achievable_rows(
        outcome, _input_copy_fidelity(rho), grid, args.protocol, epl_params=epl_params
    )
    _write_text(_render_rows(CURVE_HEADER, rows, args.format), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bound


def _bound_row(method: str, res: BoundResult) -> list:
    return [method, float(res.delta_or_F), float(res.value), float(res.dual_gap), res.status]


def _cmd_bound(args) -> int:
    spec, rho = _state_from(args.state)
    picked = [x for x in (args.delta, args.delta_grid, args.fixed_fidelity) if x is not None]
    if len(picked) != 1:
        raise ConfigError("choose exactly one of --delta, --delta-grid, --fixed-fidelity")

    rows = []
    if args.fixed_fidelity is not None:
        if args.method != "ppt":
            raise ConfigError("--fixed-fidelity is only available with --method ppt")
        if args.dump_sdp:
            ppt_success_problem(rho, args.target_dim, args.fixed_fidelity).dump(args.dump_sdp)
        res = ppt_success_bound(rho, args.target_dim, args.fixed_fidelity, tol=args.tol)
        rows.append(_bound_row(args.method, res))
    else:
        grid = np.array([args.delta]) if args.delta is not None else _parse_grid(args.delta_grid)
        _check_delta_grid(grid)
        if args.dump_sdp:
            if grid.size != 1:
                raise ConfigError("--dump-sdp wants a single --delta point")
            problem = _PROBLEM_FNS[args.method](
                rho, args.target_dim, float(grid[0]), args.delta_leq
            )
            problem.dump(args.dump_sdp)
        results = _solve_grid(
            args.method, spec.text(), args.target_dim, grid, args.tol, args.delta_leq, args.jobs
        )
        rows.extend(_bound_row(args.method, res) for res in results)

    _write_text(_render_rows(BOUND_HEADER, rows, args.format), args.out)
    return _exit_from_statuses(row[4] for row in rows)


# ---------------------------------------------------------------------------
# seesaw


def _parse_init(text: str) -> KrausProtocol:
    name, _, arg = text.partition(":")
    if name == "filtering":
        if not arg:
            raise ConfigError("filtering init needs a strength, e.g. filtering:0.4")
        return filtering_protocol(float(arg))
    if arg:
        raise ConfigError(f"init {name!r} takes no parameter")
    if name == "dejmps":
        return dejmps_protocol()
    if name == "epl-d":
        return epl_d_protocol()
    if name == "identity":
        return identity_protocol()
    raise ConfigError(f"unknown init {text!r}; choose from {', '.join(INIT_NAMES)}")


def _cmd_seesaw(args) -> int:
    spec, rho = _state_from(args.state)
    init = _parse_init(args.init)
    if args.flag_rule is not None and args.flag_rule != init.rule.kind:
        init = KrausProtocol(init.alice, init.bob, FlagRule(args.flag_rule))
    run = seesaw_run(
        rho,
        init,
        delta=args.delta,
        max_iters=args.max_iters,
        tol=args.step_tol,
        solver_tol=args.tol,
        first=args.first,
    )
    payload = {
        "state": spec.text(),
        "init": args.init,
        "rule": run.rule.kind,
        "delta": run.delta,
        "status": run.status,
        "relaxed": run.relaxed,
        "trajectory": [
            {
                "iteration": pt.iteration,
                "side": pt.side,
                "fidelity": pt.fidelity,
                "p_succ": pt.p_succ,
            }
            for pt in run.trajectory
        ],
        "alice": [{"flag": br.flag, "choi": to_json_dict(br.matrix)} for br in run.alice],
        "bob": [{"flag": br.flag, "choi": to_json_dict(br.matrix)} for br in run.bob],
    }
    _dump_json(payload, args.out)
    return EXIT_INFEASIBLE if run.status == "infeasible" else EXIT_OK


# ---------------------------------------------------------------------------
# certify


def _certify_dejmps(args) -> dict:
    p1, p2 = args.p1, args.p2
    if p1 is None or p2 is None:
        raise ConfigError("certify dejmps needs --p1 and --p2")
    p3 = 1.0 - p1 - p2
    n = p1 * p1 + (1.0 - p1) ** 2
    f_out = p1 * p1 / n
    delta = args.delta if args.delta is not None else n
    rho = make_state(StateSpec("bell_diag", (p1, p2, p3), copies=2))

    cert = dejmps_fidelity_certificate(p1, p2, delta)
    feasible, value = eval_fidelity_dual(rho, 2, delta, cert)
    solver = ppt_fidelity_bound(rho, 2, delta, tol=args.tol)
    fidelity_part = {
        "certificate_value": value,
        "certificate_feasible": feasible,
        "solver_bound": solver.value,
        "solver_status": solver.status,
        "difference": value - solver.value,
    }

    try:
        scert = dejmps_success_certificate(p1, p2)
    except ValueError as exc:
        success_part = {"error": str(exc)}
        statuses = [solver.status]
    else:
        sfeasible, svalue = eval_success_dual(rho, 2, f_out, scert)
        ssolver = ppt_success_bound(rho, 2, f_out, tol=args.tol)
        success_part = {
            "fidelity_target": f_out,
            "certificate_value": svalue,
            "certificate_feasible": sfeasible,
            "solver_bound": ssolver.value,
            "solver_status": ssolver.status,
            "difference": svalue - ssolver.value,
        }
        statuses = [solver.status, ssolver.status]

    return {
        "family": "dejmps",
        "p1": p1,
        "p2": p2,
        "p3": p3,
        "delta": delta,
        "fidelity": fidelity_part,
        "success": success_part,
        "_statuses": statuses,
    }


def _certify_epl(args) -> dict:
    p, p_d = args.p, args.pd
    if p is None or p_d is None:
        raise ConfigError("certify epl needs --p and --pd")
    if p <= 0.0:
        raise ConfigError("nothing to certify at p = 0; the protocol never succeeds")
    rho = make_state(StateSpec("epl", (p, p_d)))
    decomposition = epl_block_decomposition(p, p_d)
    entropy = relative_entropy(rho, sep_guess_state(p))
    closed_form = (p * p / 2.0) * (1.0 - binary_entropy(p_d))
    outcome = epl_d(rho)
    bound = ppt_fidelity_bound(rho, 2, p * p / 2.0, tol=args.tol)
    return {
        "family": "epl",
        "p": p,
        "p_d": p_d,
        "block_weights": list(decomposition.weights),
        "coherent_weight": decomposition.coherent_weight,
        "relative_entropy": entropy,
        "closed_form": closed_form,
        "difference": entropy - closed_form,
        "protocol": {"p_succ": outcome.p_succ, "fidelity": outcome.fidelity},
        "solver_bound": {
            "delta": p * p / 2.0,
            "bound": bound.value,
            "status": bound.status,
            "dual_gap": bound.dual_gap,
        },
        "bound_minus_protocol": bound.value - outcome.fidelity,
        "_statuses": [bound.status],
    }


def _cmd_certify(args) -> int:
    if args.family == "dejmps":
        payload = _certify_dejmps(args)
    else:
        payload = _certify_epl(args)
    statuses = payload.pop("_statuses")
    _dump_json(payload, args.out)
    return _exit_from_statuses(statuses)


# ---------------------------------------------------------------------------
# figures


@dataclass(frozen=True)
class _FigureData:
    """Everything one figure writes: labeled curves plus manifest extras."""

    state_text: str | None
    grid_used: np.ndarray
    curves: dict[str, tuple[tuple[str, ...], list[list]]]
    notes: dict[str, str]


def _fig_iso_two(grid, tol, jobs) -> _FigureData:
    grid = default_delta_grid() if grid is None else grid
    spec = "isotropic:0.7,2;copies=2"
    rho = make_state(spec)
    base = dejmps(rho)
    curves = {
        "ppt": (CURVE_HEADER, _bound_curve("ppt", spec, 2, grid, tol, jobs)),
        "bse1": (CURVE_HEADER, _bound_curve("bse1", spec, 2, grid, tol, jobs)),
        "dejmps": (CURVE_HEADER, _achievable_rows(base, _input_copy_fidelity(rho), grid, "dejmps")),
    }
    return _FigureData(spec, grid, curves, {})


def _fig_iso_three(grid, tol, jobs) -> _FigureData:
    # three-copy programs run minutes per point, so the default grid is
    # coarser here; pass --grid for a finer sweep
    grid = default_delta_grid()[4::5] if grid is None else grid
    spec = "isotropic:0.7,2;copies=3"
    two = make_state("isotropic:0.7,2;copies=2")
    base = dejmps(two)
    f_in = _input_copy_fidelity(two)
    # distill the first two copies; on failure hand over the untouched third
    # copy instead, which is deterministic overall
    keep_third = base.p_succ * base.fidelity + (1.0 - base.p_succ) * f_in
    points = [(base.p_succ, base.fidelity), (1.0, keep_third)]
    fidelities = achievable_curve(points, grid)
    rows = []
    for delta, fid in zip(grid, fidelities):
        source = "dejmps" if delta <= base.p_succ + POINT_LABEL_TOL else "dejmps+keep-third"
        rows.append([float(delta), float(fid), source])
    curves = {
        "ppt": (CURVE_HEADER, _bound_curve("ppt", spec, 2, grid, tol, jobs)),
        "dejmps-a": (CURVE_HEADER, rows),
    }
    notes = {"bse1": "omitted: the extension dimension is past the desk-scale cap"}
    return _FigureData(spec, grid, curves, notes)


def _fig_bell_rank3(grid, tol, jobs) -> _FigureData:
    grid = default_delta_grid() if grid is None else grid
    spec = "bell_diag:0.7,0.2,0.1;copies=2"
    rho = make_state(spec)
    base = dejmps(rho)
    curves = {
        "dejmps-point": (CURVE_HEADER, [[base.p_succ, base.fidelity, "dejmps"]]),
        "extrapolation": (
            CURVE_HEADER,
            _achievable_rows(base, _input_copy_fidelity(rho), grid, "dejmps"),
        ),
        "ppt": (CURVE_HEADER, _bound_curve("ppt", spec, 2, grid, tol, jobs)),
    }
    return _FigureData(spec, grid, curves, {})


GAP_HEADER = ("p3", "delta", "dejmps_fidelity", "ppt_bound", "gap")


def _fig_triangle(grid, tol, jobs) -> _FigureData:
    p1, p2 = 0.7, 0.1
    top = 1.0 - p1 - p2
    grid = np.linspace(0.0, top, 40) if grid is None else grid
    if grid.min() < 0.0 or grid.max() > top + 1e-12:
        raise ConfigError(f"p3 grid must lie in [0, {top:g}]")
    rows = []
    for raw in grid:
        p3 = float(raw)
        rho = make_state(StateSpec("bell_diag", (p1, p2, p3), copies=2))
        outcome = dejmps(rho)
        bound = ppt_fidelity_bound(rho, 2, outcome.p_succ, tol=tol)
        if bound.status not in ("optimal", "near-optimal"):
            raise RuntimeError(f"ppt at p3 = {p3:g} ended with status {bound.status}")
        rows.append(
            [p3, outcome.p_succ, outcome.fidelity, bound.value, bound.value - outcome.fidelity]
        )
    curves = {"gap": (GAP_HEADER, rows)}
    notes = {
        "sweep": "p3 varies with p1 = 0.7 and p2 = 0.1 fixed; each row compares "
        "the DEJMPS point against the bound at the same success probability"
    }
    return _FigureData("bell_diag:0.7,0.1,<p3>;copies=2", grid, curves, notes)


def _fig_rotated(p: float):
    def build(grid, tol, jobs) -> _FigureData:
        grid = default_delta_grid() if grid is None else grid
        spec = f"rotated_r:{p:g}"
        rows = [
            [float(d), float(modified_filtering_optimal(p, float(d))), "modified-filtering"]
            for d in grid
        ]
        curves = {
            "filtering": (CURVE_HEADER, rows),
            "ppt": (CURVE_HEADER, _bound_curve("ppt", spec, 2, grid, tol, jobs)),
        }
        return _FigureData(spec, grid, curves, {})

    return build


def _fig_epl(p: float, p_d: float):
    def build(grid, tol, jobs) -> _FigureData:
        grid = default_delta_grid() if grid is None else grid
        spec = f"epl:{p:g},{p_d:g}"
        rho = make_state(spec)
        base = epl_d(rho)
        curves = {
            "epl-d-point": (CURVE_HEADER, [[base.p_succ, base.fidelity, "epl-d"]]),
            "extrapolation": (
                CURVE_HEADER,
                _achievable_rows(base, None, grid, "epl-d", epl_params=(p, p_d)),
            ),
            "ppt": (CURVE_HEADER, _bound_curve("ppt", spec, 2, grid, tol, jobs)),
        }
        return _FigureData(spec, grid, curves, {})

    return build


def _fig_s_single(grid, tol, jobs) -> _FigureData:
    grid = default_delta_grid() if grid is None else grid
    spec = "s_state:0.5"
    rho = make_state(spec)
    filter_rows = []
    for raw in grid:
        delta = float(raw)
        outcome = filtering(rho, delta)  # on this family p_succ equals the strength
        filter_rows.append([delta, outcome.fidelity, "filtering"])
    seesaw_rows = []
    for raw in grid:
        delta = float(raw)
        run = seesaw_run(rho, filtering_protocol(delta), delta=delta, solver_tol=tol)
        seesaw_rows.append([delta, run.trajectory[-1].fidelity, "seesaw"])
    curves = {
        "filtering": (CURVE_HEADER, filter_rows),
        "seesaw": (CURVE_HEADER, seesaw_rows),
        "ppt": (CURVE_HEADER, _bound_curve("ppt", spec, 2, grid, tol, jobs)),
    }
    notes = {"seesaw": "each row restarts from the filter whose strength equals delta"}
    return _FigureData(spec, grid, curves, notes)


def _fig_s_two(grid, tol, jobs) -> _FigureData:
    grid = default_delta_grid() if grid is None else grid
    spec = "s_state:0.6;copies=2"
    rho = make_state(spec)
    base = dejmps_circuit(rho)
    curves = {
        "dejmps-point": (CURVE_HEADER, [[base.p_succ, base.fidelity, "dejmps"]]),
        "extrapolation": (
            CURVE_HEADER,
            _achievable_rows(base, _input_copy_fidelity(rho), grid, "dejmps"),
        ),
        "ppt": (CURVE_HEADER, _bound_curve("ppt", spec, 2, grid, tol, jobs)),
    }
    return _FigureData(spec, grid, curves, {})


FIGURES = {
    "fig1": _fig_iso_two,
    "fig2": _fig_iso_three,
    "fig3": _fig_bell_rank3,
    "fig4": _fig_triangle,
    "fig5": _fig_rotated(0.8),
    "fig6": _fig_rotated(0.4),
    "fig7": _fig_epl(0.8, 1.0),
    "fig8": _fig_epl(0.5, 0.8),
    "fig9": _fig_s_single,
    "fig10": _fig_s_two,
}


def cmd_figure(
    name: str,
    grid: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    jobs: int = 1,
    outdir: str | None = None,
) -> dict[str, Path]:
    """Write the named figure's data files and return them keyed by curve."""
    build = FIGURES.get(name)
    if build is None:
        raise ConfigError(f"unknown figure {name!r}; valid names: {', '.join(FIGURES)}")
    data = build(grid, tol, jobs)
    target = Path(outdir) if outdir is not None else Path(name)
    target.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    schemas: dict[str, str] = {}
    for stem in sorted(data.curves):
        header, rows = data.curves[stem]
        path = target / f"{stem}.csv"
        path.write_text(_render_rows(header, rows, "csv"), encoding="utf-8")
        written[stem] = path
        schemas[f"{stem}.csv"] = ",".join(header)
    manifest = {
        "figure": name,
        "version": __version__,
        "tolerance": tol,
        "state": data.state_text,
        "target_dim": 2,
        "grid": [float(x) for x in data.grid_used],
        "files": schemas,
    }
    if data.notes:
        manifest["notes"] = data.notes
    manifest_path = target / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written["manifest"] = manifest_path
    return written


def _cmd_figure(args) -> int:
    grid = _parse_grid(args.grid) if args.grid else None
    files = cmd_figure(args.name, grid=grid, tol=args.tol, jobs=args.jobs, outdir=args.out)
    for stem in sorted(files):
        print(files[stem])
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


_SWEEP_PROTOCOLS = ("filtering", "dejmps", "dejmps-circuit", "bbpssw", "epl-d")


@dataclass(frozen=True)
class SweepJob:
    """One batch: a state, a method list, and a success-probability grid."""

    state: StateSpec
    methods: tuple[str, ...]
    grid: tuple[float, float, int]
    target_dim: int = 2
    tol: float = DEFAULT_TOL
    jobs: int = 1
    delta_leq: bool = False
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self) -> None:
        start, stop, count = self.grid
        if count < 1:
            raise ConfigError("grid needs at least one point")
        if not (0.0 < start <= 1.0 and 0.0 < stop <= 1.0):
            raise ConfigError("success-probability grid must lie in (0, 1]")
        if not self.methods:
            raise ConfigError("no methods given")
        for method in self.methods:
            base = method.split(":", 1)[0]
            if base not in _BOUND_FNS and base not in _SWEEP_PROTOCOLS:
                raise ConfigError(
                    f"unknown sweep method {method!r}; bounds: "
                    f"{', '.join(_BOUND_FNS)}; protocols: {', '.join(_SWEEP_PROTOCOLS)}"
                )

    def deltas(self) -> np.ndarray:
        return np.linspace(self.grid[0], self.grid[1], self.grid[2])


def cmd_sweep(job: SweepJob) -> int:
    """Run every method over the grid and write one merged table."""
    rho = make_state(job.state)
    grid = job.deltas()
    source = job.state.text()
    rows: list[list] = []
    for method in job.methods:
        base_name, _, arg = method.partition(":")
        if base_name in _BOUND_FNS:
            results = _solve_grid(
                base_name, source, job.target_dim, grid, job.tol, job.delta_leq, job.jobs
            )
            for res in results:
                rows.append(
                    [
                        method,
                        float(res.delta_or_F),
                        float(res.value),
                        float(res.dual_gap),
                        res.status,
                        source,
                    ]
                )
        else:
            eps = float(arg) if arg else None
            outcome = _run_protocol(base_name, rho, eps=eps, spec=job.state)
            epl_params = None
            if base_name == "epl-d" and job.state.family == "epl":
                epl_params = (job.state.params[0], job.state.params[1])
            achieved = _achievable_rows(
                outcome, _input_copy_fidelity(rho), grid, base_name, epl_params=epl_params
            )
            for delta, fid, _ in achieved:
                rows.append([method, delta, fid, 0.0, "achievable", source])
    _write_text(_render_rows(SWEEP_HEADER, rows, job.fmt), job.out)
    return _exit_from_statuses(row[4] for row in rows)


def _cmd_sweep(args) -> int:
    spec, _ = _state_from(args.state)
    parts = args.grid.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid {args.grid!r} is not of the form start:stop:count")
    try:
        grid = (float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError:
        raise ConfigError(f"grid {args.grid!r} has non-numeric pieces") from None
    job = SweepJob(
        state=spec,
        methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()),
        grid=grid,
        target_dim=args.target_dim,
        tol=args.tol,
        jobs=args.jobs,
        delta_leq=args.delta_leq,
        out=args.out,
        fmt=args.format,
    )
    return cmd_sweep(job)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distil",
        description="Fidelity versus success-probability tradeoffs for "
        "two-party entanglement distillation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="solver tolerance")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for grid solves")
    common.add_argument(
        "--out", help="output file (default: stdout); the figure command treats it as a directory"
    )
    common.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="tabular output format"
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", parents=[common], help="build a state and print its summary")
    p.add_argument("spec", help="family:params[;copies=n], e.g. bell_diag:0.7,0.2,0.1;copies=2")
    p.add_argument("--dump", action="store_true", help="include the full operator as JSON")
    p.set_defaults(func=_cmd_state)

    p = sub.add_parser("protocol", parents=[common], help="evaluate a named protocol once")
    p.add_argument("name", choices=PROTOCOL_NAMES)
    p.add_argument("--state", required=True, help="input state spec")
    p.add_argument("--eps", type=float, help="filter strength for filtering")
    p.add_argument("--r", type=float, help="padding weight for epl-extrapolate")
    p.set_defaults(func=_cmd_protocol)

    p = sub.add_parser(
        "curve", parents=[common], help="achievable fidelity of a protocol over a grid"
    )
    p.add_argument("--protocol", required=True, choices=CURVE_PROTOCOLS)
    p.add_argument("--state", required=True, help="input state spec")
    p.add_argument("--delta", required=True, help="success-probability grid start:stop:count")
    p.add_argument("--eps", type=float, help="filter strength for filtering")
    p.set_defaults(func=_cmd_curve)

    p = sub.add_parser("bound", parents=[common], help="semidefinite upper bounds")
    p.add_argument("--method", required=True, choices=tuple(_BOUND_FNS))
    p.add_argument("--state", required=True, help="input state spec")
    p.add_argument("--target-dim", type=int, default=2, help="output dimension D")
    p.add_argument("--delta", type=float, help="single success probability")
    p.add_argument("--delta-grid", help="success-probability grid start:stop:count")
    p.add_argument(
        "--fixed-fidelity",
        type=float,
        help="maximize success probability at this fidelity instead (ppt only)",
    )
    p.add_argument(
        "--delta-leq",
        action="store_true",
        help="relax the success-rate equality to at-most for diagnostics",
    )
    p.add_argument("--dump-sdp", help="also write the assembled program as JSON to this path")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("seesaw", parents=[common], help="alternating protocol improvement")
    p.add_argument("--state", required=True, help="input state spec")
    p.add_argument("--init", required=True, help=f"starting protocol: {', '.join(INIT_NAMES)}")
    p.add_argument(
        "--delta", type=float, help="success probability (default: the init's natural rate)"
    )
    p.add_argument("--flag-rule", choices=("local", "nonlocal"), help="override the init's rule")
    p.add_argument("--max-iters", type=int, default=50, help="iteration cap")
    p.add_argument(
        "--step-tol", type=float, default=1e-7, help="stop once per-step gains fall below this"
    )
    p.add_argument("--first", choices=("alice", "bob"), default="bob", help="side optimized first")
    p.set_defaults(func=_cmd_seesaw)

    p = sub.add_parser(
        "certify", parents=[common], help="analytic dual certificates against solver bounds"
    )
    p.add_argument("family", choices=("dejmps", "epl"))
    p.add_argument("--p1", type=float, help="largest Bell weight (dejmps)")
    p.add_argument("--p2", type=float, help="second Bell weight (dejmps)")
    p.add_argument("--delta", type=float, help="success probability (default: the natural rate)")
    p.add_argument("--p", type=float, help="source success amplitude (epl)")
    p.add_argument("--pd", type=float, help="dephasing weight (epl)")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("figure", parents=[common], help="regenerate a figure's data files")
    p.add_argument("name", help=f"one of: {', '.join(FIGURES)}")
    p.add_argument("--grid", help="override the default 40-point grid, start:stop:count")
    p.set_defaults(func=_cmd_figure)

    p = sub.add_parser("sweep", parents=[common], help="several methods over one grid")
    p.add_argument("--state", required=True, help="input state spec")
    p.add_argument(
        "--methods",
        required=True,
        help="comma-separated: ppt, ppt-full, bse1, dejmps, dejmps-circuit, "
        "bbpssw, epl-d, filtering:<eps>",
    )
    p.add_argument("--grid", default="0.025:1:40", help="success-probability grid start:stop:count")
    p.add_argument("--target-dim", type=int, default=2, help="output dimension D")
    p.add_argument("--delta-leq", action="store_true", help="relax bound equalities to at-most")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SeesawInfeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
