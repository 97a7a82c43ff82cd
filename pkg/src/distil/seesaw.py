"""Alternating one-side improvement of a flagged distillation protocol.

With one party's Choi branches held fixed, the other party's best response
is a semidefinite program: contracting the fixed side into the fidelity and
success pairings leaves both linear in the free branches.  `seesaw_step`
solves one such best response and `seesaw_run` alternates sides starting
from a protocol's Choi representation, recording the accepted
(fidelity, success) trajectory.  Runs report Choi branches only; turning
them back into explicit local circuits is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .protocols import FlagRule, KrausProtocol, to_choi
from .qmath import (
    ChoiBranch,
    DensityMatrix,
    StructuredOperator,
    SubsystemLayout,
    max_entangled,
    party_major,
    permute_axes,
    ptrace_axes,
)
from .sdp_core import DEFAULT_TOL, Block, BlockMap, Constraint, SdpProblem, Term, solve

SIDES = ("alice", "bob")
RUN_STATUSES = ("converged", "max-iters", "infeasible")

MAX_ITERS = 50
STEP_TOL = 1e-7

# branch families coming back from repeated solve/clip rounds drift a little;
# allow this much slack on their positivity and marginal conditions
FAMILY_TOL = 1e-6


class SeesawInfeasible(RuntimeError):
    """The success-rate constraint cannot be met against the fixed side."""


class SeesawPoint(NamedTuple):
    iteration: int
    side: str
    fidelity: float
    p_succ: float


@dataclass(frozen=True)
class SeesawState:
    """Outcome of a run: final branches plus the accepted trajectory.

    Only steps that improved the fidelity are recorded, so the trajectory is
    non-decreasing by construction.  Under the local flag rule only flag-1
    branches are tracked; the failure branch is implicit in the marginal cap.
    """

    alice: list[ChoiBranch]
    bob: list[ChoiBranch]
    rule: FlagRule
    trajectory: list[SeesawPoint]
    delta: float
    status: str
    relaxed: bool = False

    def __post_init__(self):
        if self.status not in RUN_STATUSES:
            raise ValueError(f"unknown run status {self.status!r}")
        fids = [pt.fidelity for pt in self.trajectory]
        if any(later < earlier - 1e-9 for earlier, later in zip(fids, fids[1:])):
            raise ValueError("trajectory fidelities decreased")


def _party_split(rho: DensityMatrix) -> tuple[StructuredOperator, int, int]:
    pm = party_major(rho)
    dim_a = pm.layout.party_dim("Alice")
    dim_b = pm.layout.party_dim("Bob")
    if dim_a * dim_b != pm.layout.dim:
        raise ValueError("state must live on Alice/Bob registers only")
    return pm, dim_a, dim_b


def _flag_matrices(
    branches: Sequence[ChoiBranch], d_in: int
) -> tuple[dict[int, np.ndarray], int]:
    """Branch matrices keyed by flag, plus the shared output dimension."""
    if not branches:
        raise ValueError("empty branch family")
    d_out, rem = divmod(branches[0].matrix.dim, d_in)
    if rem or branches[0].in_dim != d_in:
        raise ValueError(
            f"branch on dimension {branches[0].matrix.dim} does not factor over "
            f"an input copy of dimension {d_in}"
        )
    out: dict[int, np.ndarray] = {}
    for br in branches:
        if br.flag not in (0, 1):
            raise ValueError(f"flag {br.flag} outside the binary alphabet")
        if br.flag in out:
            raise ValueError(f"duplicate branch flag {br.flag}")
        if br.matrix.dim != d_out * d_in or br.in_dim != d_in:
            raise ValueError("branches in a family must share their dimensions")
        if br.matrix.min_eig() < -FAMILY_TOL:
            raise ValueError(f"branch {br.flag} is not positive semidefinite")
        out[br.flag] = np.asarray(br.matrix.matrix, dtype=np.complex128)
    return out, d_out


def _fill_flags(
    mats: dict[int, np.ndarray], flags: tuple[int, ...], dim: int
) -> dict[int, np.ndarray]:
    zero = np.zeros((dim, dim), dtype=np.complex128)
    return {f: mats.get(f, zero) for f in flags}


def _check_family_marginal(
    mats: dict[int, np.ndarray], rule: FlagRule, d_out: int, d_in: int
) -> None:
    """Instrument condition: cap for the local rule, equality for nonlocal."""
    eye = np.eye(d_in) / d_in
    if rule.kind == "local":
        marg = ptrace_axes(mats[1], (d_out, d_in), (1,))
        excess = float(np.linalg.eigvalsh(marg - eye)[-1])
        if excess > FAMILY_TOL:
            raise ValueError(f"success-branch marginal exceeds I/{d_in} by {excess:.2e}")
        return
    total = sum(ptrace_axes(m, (d_out, d_in), (1,)) for m in mats.values())
    gap = float(np.abs(total - eye).max())
    if gap > FAMILY_TOL:
        raise ValueError(f"branch marginals sum to I/{d_in} only up to {gap:.2e}")


def _pairing_constants(
    rho_t: np.ndarray, d: int, da: int, db: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fidelity and success pairings on register order (out_A, in_A, out_B, in_B).

    Tracing either constant against a product of two Choi branches gives the
    corresponding unnormalised pairing: the target-projector overlap for the
    first, the success weight for the second.
    """
    fid = permute_axes(np.kron(max_entangled(d), rho_t), (d, d, da, db), (0, 2, 1, 3))
    succ = permute_axes(np.kron(np.eye(d * d), rho_t), (d, d, da, db), (0, 2, 1, 3))
    return fid, succ


def _effective(
    constant: np.ndarray, fixed: np.ndarray, side: str, d: int, da: int, db: int
) -> np.ndarray:
    """Contract the fixed side into a pairing constant.

    Returns the operator T on the free side's (output, input-copy) registers
    with tr[(C_free (x) C_fixed) . constant] = tr[C_free . T].
    """
    if side == "alice":
        lifted = constant @ np.kron(np.eye(d * da), fixed)
        keep = (0, 1)
    else:
        lifted = constant @ np.kron(fixed, np.eye(d * db))
        keep = (2, 3)
    t = ptrace_axes(lifted, (d, da, d, db), keep)
    return (t + t.conj().T) / 2


def _branch(side: str, flag: int, matrix: np.ndarray, d_out: int, d_in: int) -> ChoiBranch:
    """Wrap a solved block as a Choi branch, clipped back onto the PSD cone."""
    vals, vecs = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    clipped = (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T
    prefix = "A" if side == "alice" else "B"
    party = "Alice" if side == "alice" else "Bob"
    layout = SubsystemLayout.of(
        (f"{prefix}hat", party, d_out), (f"{prefix}in", party, d_in)
    )
    return ChoiBranch(flag, StructuredOperator(clipped, layout), (f"{prefix}in",))


def choi_pair_outcome(
    rho: DensityMatrix,
    alice: Sequence[ChoiBranch],
    bob: Sequence[ChoiBranch],
    rule: FlagRule,
) -> tuple[float, float]:
    """Success probability and conditional fidelity of paired Choi branches.

    Branch input copies pair with `rho`'s party-major registers.  At zero
    success probability the conditional fidelity is undefined and reported
    as zero.
    """
    pm, da, db = _party_split(rho)
    a_mats, d_a = _flag_matrices(alice, da)
    b_mats, d_b = _flag_matrices(bob, db)
    if d_a != d_b:
        raise ValueError(f"sides target different output dimensions {d_a} and {d_b}")
    d = d_a
    flags = (1,) if rule.kind == "local" else (0, 1)
    a_mats = _fill_flags(a_mats, flags, d * da)
    b_mats = _fill_flags(b_mats, flags, d * db)
    x_fid, x_succ = _pairing_constants(pm.matrix.T, d, da, db)
    num = rate = 0.0
    for f in flags:
        pair = np.kron(a_mats[f], b_mats[f])
        num += float(np.real(np.trace(x_fid @ pair)))
        rate += float(np.real(np.trace(x_succ @ pair)))
    ab = da * db
    p_succ = ab * rate
    if p_succ < 1e-12:
        return 0.0, 0.0
    return p_succ, ab * num / p_succ


def seesaw_step(
    rho: DensityMatrix,
    fixed: Sequence[ChoiBranch],
    side: str,
    rule: FlagRule,
    delta: float,
    tol: float = DEFAULT_TOL,
    at_least: bool = False,
) -> tuple[list[ChoiBranch], float]:
    """Best response of one party against a fixed partner.

    Holds `fixed` (the other party's branches) constant and maximizes the
    output fidelity over `side`'s branches, subject to positivity, the
    instrument marginal condition, and the success-rate constraint; the
    rate is pinned to `delta` exactly unless `at_least` relaxes it to a
    lower bound.  Returns the optimized branches together with the fidelity
    they achieve, recomputed after clipping back onto the positive cone.

    Raises SeesawInfeasible when no branch family meets the success-rate
    constraint against the fixed side.
    """
    if side not in SIDES:
        raise ValueError(f"unknown side {side!r}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    pm, da, db = _party_split(rho)
    ab = da * db
    d_in_fixed = db if side == "alice" else da
    d_in_free = da if side == "alice" else db
    flags = (1,) if rule.kind == "local" else (0, 1)
    fixed_mats, d = _flag_matrices(fixed, d_in_fixed)
    if rule.kind == "local" and 1 not in fixed_mats:
        raise ValueError("the local rule needs the fixed side's flag-1 branch")
    fixed_mats = _fill_flags(fixed_mats, flags, d * d_in_fixed)
    _check_family_marginal(fixed_mats, rule, d, d_in_fixed)

    x_fid, x_succ = _pairing_constants(pm.matrix.T, d, da, db)
    t_fid = {f: _effective(x_fid, fixed_mats[f], side, d, da, db) for f in flags}
    t_succ = {f: _effective(x_succ, fixed_mats[f], side, d, da, db) for f in flags}

    marginal = BlockMap.marginal((d, d_in_free), (1,))
    eye = np.eye(d_in_free) / d_in_free
    if rule.kind == "local":
        family = Constraint(
            "<=", (Term("C1", 1.0, marginal),), eye, name="instrument-cap"
        )
    else:
        family = Constraint(
            "=",
            tuple(Term(f"C{f}", 1.0, marginal) for f in flags),
            eye,
            name="instrument-sum",
        )
    problem = SdpProblem(
        blocks=tuple(Block(f"C{f}", d * d_in_free) for f in flags),
        objective=tuple(Term(f"C{f}", (ab / delta) * t_fid[f]) for f in flags),
        constraints=(
            Constraint(
                ">=" if at_least else "=",
                tuple(Term(f"C{f}", ab * t_succ[f]) for f in flags),
                delta,
                name="success-rate",
            ),
            family,
        ),
    )
    solution = solve(problem, tol)
    if solution.status == "infeasible":
        raise SeesawInfeasible(
            f"no {side} branches reach success rate {delta:g} against the fixed side"
        )
    if solution.status not in ("optimal", "near-optimal"):
        raise RuntimeError(f"seesaw step ended with status {solution.status}")
    branches = [
        _branch(side, f, solution.block_values[f"C{f}"], d, d_in_free) for f in flags
    ]
    if side == "alice":
        _, fidelity = choi_pair_outcome(rho, branches, list(fixed), rule)
    else:
        _, fidelity = choi_pair_outcome(rho, list(fixed), branches, rule)
    return branches, fidelity


def seesaw_run(
    rho: DensityMatrix,
    init: KrausProtocol,
    delta: float | None = None,
    max_iters: int = MAX_ITERS,
    tol: float = STEP_TOL,
    solver_tol: float = DEFAULT_TOL,
    first: str = "bob",
) -> SeesawState:
    """Alternate best responses starting from a protocol's Choi branches.

    Optimizes `first` (Bob by default) and then alternates sides.  `delta`
    defaults to the protocol's own success probability on `rho`.  A step
    that fails to improve the running fidelity is discarded and counts as a
    stall; two consecutive stalls below `tol` end the run as converged.
    When the rate equality is infeasible against the fixed side the run
    switches to an at-least-delta constraint and stays there; if even that
    fails it stops with status "infeasible" and a partial trajectory.
    """
    if first not in SIDES:
        raise ValueError(f"unknown side {first!r}")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    alice, bob = to_choi(init)
    p_start, f_start = choi_pair_outcome(rho, alice, bob, init.rule)
    if delta is None:
        delta = p_start
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")

    trajectory = [SeesawPoint(0, "init", f_start, p_start)]
    best = f_start
    stalls = 0
    relaxed = False
    status = "max-iters"
    other = SIDES[1 - SIDES.index(first)]
    for i in range(1, max_iters + 1):
        side = first if i % 2 == 1 else other
        held = bob if side == "alice" else alice
        try:
            try:
                branches, fid = seesaw_step(
                    rho, held, side, init.rule, delta, tol=solver_tol, at_least=relaxed
                )
            except SeesawInfeasible:
                if relaxed:
                    raise
                relaxed = True
                branches, fid = seesaw_step(
                    rho, held, side, init.rule, delta, tol=solver_tol, at_least=True
                )
        except SeesawInfeasible:
            status = "infeasible"
            break
        gain = fid - best
        if gain > 0:
            if side == "alice":
                alice = branches
            else:
                bob = branches
            p_now, f_now = choi_pair_outcome(rho, alice, bob, init.rule)
            trajectory.append(SeesawPoint(i, side, f_now, p_now))
            best = f_now
        if gain < tol:
            stalls += 1
            if stalls >= 2:
                status = "converged"
                break
        else:
            stalls = 0
    return SeesawState(alice, bob, init.rule, trajectory, float(delta), status, relaxed)
