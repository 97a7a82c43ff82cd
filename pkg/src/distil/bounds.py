"""Semidefinite upper bounds on fidelity and success probability.

Four entry points: the reduced two-block bound (`ppt_fidelity_bound`), its
success-probability companion (`ppt_success_bound`), the unreduced program
over the full Choi variable (`ppt_fidelity_bound_full`, kept as the oracle
the symmetry reduction is checked against), and the Bose-symmetric-extension
tightening (`bse1_fidelity_bound`).  Dual certificates can be extracted from
the reduced bound's solution or built analytically and re-checked with
`eval_fidelity_dual` / `eval_success_dual`.

Each bound also has a `*_problem` sibling that assembles the program without
solving it, for inspection or JSON dumping.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .qmath import (
    DensityMatrix,
    StructuredOperator,
    SubsystemLayout,
    max_entangled,
    partial_transpose,
    party_major,
    permute_axes,
)
from .sdp_core import (
    DEFAULT_TOL,
    Block,
    BlockMap,
    Constraint,
    SdpProblem,
    SdpSolution,
    Term,
    solve,
)

METHODS = ("PPT", "PPT-full", "BSE1")

# a success-probability optimum below this reads as "target unachievable",
# since M = E = 0 is always feasible and the supremum is then vacuous; the
# solver can report a few times 1e-7 for a true zero, so the floor sits well
# above that while staying far below any success probability of interest
SUCCESS_FLOOR = 1e-5

# the unreduced program scales as the fourth power of this; past it the
# first-order solver takes over and runtimes grow quickly
FULL_DIM_SOFT_CAP = 128

# Bose-extension guard: the symmetric block dimension is quadratic in
# (input dim) * (target dim), and past 12 the solve is no longer desk-scale
BSE_DIM_CAP = 12

CERT_FEAS_TOL = 1e-8


def default_delta_grid() -> np.ndarray:
    """The 40-point uniform success-probability grid used by sweeps."""
    return np.linspace(0.025, 1.0, 40)


@dataclass(frozen=True)
class BoundResult:
    """One solved bound: the value, the pinned parameter, and diagnostics."""

    value: float
    delta_or_F: float
    primal: SdpSolution
    dual_gap: float
    method: str
    layout: SubsystemLayout | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.primal.status in ("optimal", "near-optimal"):
            if not 0.0 <= self.value <= 1.0:
                raise ValueError("bound value escaped [0, 1]")
            if not self.dual_gap >= -1e-7:
                raise ValueError("weak duality violated")

    @property
    def status(self) -> str:
        return self.primal.status


@dataclass(frozen=True)
class DualCertificate:
    """A feasible point of the dual program: scalar y plus four multipliers."""

    y: float
    J: StructuredOperator
    G: StructuredOperator
    H: StructuredOperator
    K: StructuredOperator

    def __post_init__(self):
        for label, op in (("J", self.J), ("G", self.G), ("H", self.H), ("K", self.K)):
            if op.min_eig() < -CERT_FEAS_TOL:
                raise ValueError(f"certificate multiplier {label} is not PSD")


def _party_split(rho: DensityMatrix) -> tuple[StructuredOperator, int, int]:
    pm = party_major(rho)
    dim_a = pm.layout.party_dim("Alice")
    dim_b = pm.layout.party_dim("Bob")
    if dim_a * dim_b != pm.layout.dim:
        raise ValueError("state must live on Alice/Bob registers only")
    return pm, dim_a, dim_b


def _check_rate(name: str, x: float) -> None:
    if not 0.0 < x <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {x}")


def _two_block_cones(dim_a: int, dim_b: int, d_target: int) -> tuple[Constraint, ...]:
    """The cone constraints shared by the reduced fidelity/success programs."""
    ab = dim_a * dim_b
    cap = np.eye(ab) / ab
    pt = BlockMap.partial_transpose((dim_a, dim_b), (1,))
    return (
        Constraint("<=", (Term("M", 1.0), Term("E", 1.0)), cap, name="cap"),
        Constraint("<=", (Term("M", 1.0, pt), Term("E", 1.0, pt)), cap, name="cap-pt"),
        Constraint(
            ">=",
            (Term("M", 1.0, pt), Term("E", 1.0 / (d_target + 1), pt)),
            np.zeros((ab, ab)),
            name="sym",
        ),
        Constraint(
            ">=",
            (Term("M", -1.0, pt), Term("E", 1.0 / (d_target - 1), pt)),
            np.zeros((ab, ab)),
            name="antisym",
        ),
    )


def _result(
    solution: SdpSolution,
    pinned: float,
    method: str,
    layout: SubsystemLayout,
    floor_to_infeasible: bool = False,
) -> BoundResult:
    if solution.status not in ("optimal", "near-optimal"):
        return BoundResult(float("nan"), pinned, solution, float("nan"), method, layout)
    value = float(np.clip(solution.primal_objective, 0.0, 1.0))
    if floor_to_infeasible and value < SUCCESS_FLOOR:
        solution = SdpSolution(
            "infeasible",
            solution.primal_objective,
            solution.dual_objective,
            solution.block_values,
            solution.constraint_duals,
        )
        return BoundResult(float("nan"), pinned, solution, float("nan"), method, layout)
    return BoundResult(value, pinned, solution, solution.duality_gap, method, layout)


def ppt_fidelity_problem(
    rho: DensityMatrix, d_target: int, delta: float, delta_leq: bool = False
) -> SdpProblem:
    """Assemble the reduced fidelity program without solving it."""
    _check_rate("delta", delta)
    pm, dim_a, dim_b = _party_split(rho)
    ab = dim_a * dim_b
    rho_t = pm.matrix.T
    return SdpProblem(
        blocks=(Block("M", ab), Block("E", ab)),
        objective=(Term("M", (ab / delta) * rho_t),),
        constraints=(
            Constraint(
                "<=" if delta_leq else "=",
                (Term("M", ab * rho_t), Term("E", ab * rho_t)),
                delta,
                name="success-rate",
            ),
        )
        + _two_block_cones(dim_a, dim_b, d_target),
    )


def ppt_fidelity_bound(
    rho: DensityMatrix,
    d_target: int,
    delta: float,
    tol: float = DEFAULT_TOL,
    delta_leq: bool = False,
) -> BoundResult:
    """Largest fidelity any PPT operation reaches at success probability delta.

    Maximizes (|A||B|/delta) tr[rho^T M] over the two-block reduction
    (M, E >= 0) of the output-twirled Choi variable, subject to the marginal
    caps, their partial transposes, and the two spectral conditions tying M
    and E to the target dimension.
    """
    problem = ppt_fidelity_problem(rho, d_target, delta, delta_leq)
    pm, _, _ = _party_split(rho)
    return _result(solve(problem, tol), delta, "PPT", pm.layout)


def ppt_success_bound(
    rho: DensityMatrix, d_target: int, fidelity: float, tol: float = DEFAULT_TOL
) -> BoundResult:
    """Largest success probability compatible with the given output fidelity.

    Same cone as the fidelity bound, with the roles swapped: the success
    probability |A||B| tr[rho^T (M+E)] is maximized while the fidelity is
    pinned through tr[rho^T ((1-F) M - F E)] = 0.  When even the best value
    is numerically zero the target fidelity is unachievable and the result
    reports an infeasible status instead.
    """
    problem = ppt_success_problem(rho, d_target, fidelity)
    pm, _, _ = _party_split(rho)
    return _result(
        solve(problem, tol), fidelity, "PPT", pm.layout, floor_to_infeasible=True
    )


def ppt_success_problem(
    rho: DensityMatrix, d_target: int, fidelity: float
) -> SdpProblem:
    """Assemble the success-probability program without solving it."""
    _check_rate("fidelity", fidelity)
    pm, dim_a, dim_b = _party_split(rho)
    ab = dim_a * dim_b
    rho_t = pm.matrix.T
    return SdpProblem(
        blocks=(Block("M", ab), Block("E", ab)),
        objective=(Term("M", ab * rho_t), Term("E", ab * rho_t)),
        constraints=(
            Constraint(
                "=",
                (
                    Term("M", (1.0 - fidelity) * rho_t),
                    Term("E", -fidelity * rho_t),
                ),
                0.0,
                name="fidelity-lock",
            ),
        )
        + _two_block_cones(dim_a, dim_b, d_target),
    )


def _hat_and_input(x_hat: np.ndarray, rho_t: np.ndarray, d: int, da: int, db: int):
    """Arrange x_hat on the output registers and rho^T on the inputs.

    Builds the constant kron(x_hat, rho_t) on registers ordered (out_A,
    out_B, in_A, in_B) and permutes it to the interleaved order (out_A,
    in_A, out_B, in_B) the Choi variable uses.
    """
    m = np.kron(x_hat, rho_t)
    return permute_axes(m, (d, d, da, db), (0, 2, 1, 3))


def ppt_fidelity_bound_full(
    rho: DensityMatrix,
    d_target: int,
    delta: float,
    tol: float = DEFAULT_TOL,
    delta_leq: bool = False,
) -> BoundResult:
    """The unreduced PPT fidelity program over the full Choi variable.

    Kept as the oracle for the two-block reduction: it optimizes over the
    whole operator on (out_A, in_A, out_B, in_B) with the partial transpose
    taken across the Alice/Bob cut, and must match `ppt_fidelity_bound` to
    solver accuracy.
    """
    problem = ppt_fidelity_problem_full(rho, d_target, delta, delta_leq)
    pm, _, _ = _party_split(rho)
    return _result(solve(problem, tol), delta, "PPT-full", pm.layout)


def ppt_fidelity_problem_full(
    rho: DensityMatrix, d_target: int, delta: float, delta_leq: bool = False
) -> SdpProblem:
    """Assemble the unreduced fidelity program without solving it."""
    _check_rate("delta", delta)
    pm, dim_a, dim_b = _party_split(rho)
    ab = dim_a * dim_b
    d = d_target
    full = d * d * ab
    if full > FULL_DIM_SOFT_CAP:
        warnings.warn(
            f"full program dimension {full} exceeds {FULL_DIM_SOFT_CAP}; "
            "expect a slow first-order solve",
            stacklevel=2,
        )
    rho_t = pm.matrix.T
    dims = (d, dim_a, d, dim_b)
    phi = max_entangled(d)
    objective = (ab / delta) * _hat_and_input(phi, rho_t, d, dim_a, dim_b)
    rate = ab * _hat_and_input(np.eye(d * d), rho_t, d, dim_a, dim_b)
    cap = np.eye(ab) / ab
    return SdpProblem(
        blocks=(Block("C", full),),
        objective=(Term("C", objective),),
        constraints=(
            Constraint(
                "<=" if delta_leq else "=",
                (Term("C", rate),),
                delta,
                name="success-rate",
            ),
            Constraint(
                ">=",
                (Term("C", 1.0, BlockMap.partial_transpose(dims, (2, 3))),),
                np.zeros((full, full)),
                name="ppt",
            ),
            Constraint(
                "<=",
                (Term("C", 1.0, BlockMap.marginal(dims, keep=(1, 3))),),
                cap,
                name="cap",
            ),
            Constraint(
                "<=",
                (Term("C", 1.0, BlockMap.marginal(dims, keep=(1, 3), transpose=(1,))),),
                cap,
                name="cap-pt",
            ),
        ),
    )


def _sym_isometry(n: int) -> np.ndarray:
    """Isometry from the symmetric subspace of C^n (x) C^n into the product.

    Columns are |ii> for each i, then (|ij> + |ji>)/sqrt(2) for i < j in
    lexicographic order.
    """
    cols = []
    for i in range(n):
        v = np.zeros(n * n)
        v[i * n + i] = 1.0
        cols.append(v)
    for i in range(n):
        for j in range(i + 1, n):
            v = np.zeros(n * n)
            v[i * n + j] = v[j * n + i] = 1.0 / np.sqrt(2.0)
            cols.append(v)
    return np.column_stack(cols)


def bse1_fidelity_bound(
    rho: DensityMatrix, d_target: int, delta: float, tol: float = DEFAULT_TOL,
    delta_leq: bool = False,
) -> BoundResult:
    """Fidelity bound tightened by one Bose-symmetric extension of Alice.

    The Choi variable is written as the compression of a PSD operator living
    on the symmetric subspace of two copies of Alice's (output, input) pair,
    tensored with Bob's pair.  Tracing out the first copy recovers the
    physical operator, which is then subjected to the same constraints as
    the unreduced PPT program.
    """
    problem = bse1_fidelity_problem(rho, d_target, delta, delta_leq)
    pm, _, _ = _party_split(rho)
    return _result(solve(problem, tol), delta, "BSE1", pm.layout)


def bse1_fidelity_problem(
    rho: DensityMatrix, d_target: int, delta: float, delta_leq: bool = False
) -> SdpProblem:
    """Assemble the extension-tightened fidelity program without solving it."""
    _check_rate("delta", delta)
    pm, dim_a, dim_b = _party_split(rho)
    d = d_target
    if dim_a * d > BSE_DIM_CAP:
        raise ValueError(
            f"extension dimension {dim_a * d} exceeds the cap {BSE_DIM_CAP}; "
            "this solve would not finish at desk scale"
        )
    ab = dim_a * dim_b
    rho_t = pm.matrix.T
    e = d * dim_a
    n_sym = e * (e + 1) // 2
    u = _sym_isometry(e)
    lift = sp.kron(sp.csr_matrix(u), sp.identity(d * dim_b), format="csr")
    ext_dims = (d, dim_a, d, dim_a, d, dim_b)

    # constants are built on (A1_out, A1_in, A2_out, B_out, A2_in, B_in) and
    # permuted to the extension's register order before compressing by the
    # symmetric-subspace lift
    def lifted_constant(x_hat: np.ndarray) -> np.ndarray:
        m = np.kron(np.kron(np.eye(e), x_hat), rho_t)
        m = permute_axes(m, (d, dim_a, d, d, dim_a, dim_b), (0, 1, 2, 4, 3, 5))
        return np.asarray(lift.conj().T @ m @ lift)

    objective = (ab / delta) * lifted_constant(max_entangled(d))
    rate = ab * lifted_constant(np.eye(d * d))
    cap = np.eye(ab) / ab
    phys = d * dim_a * d * dim_b
    return SdpProblem(
        blocks=(Block("W", n_sym * d * dim_b),),
        objective=(Term("W", objective),),
        constraints=(
            Constraint(
                "<=" if delta_leq else "=",
                (Term("W", rate),),
                delta,
                name="success-rate",
            ),
            Constraint(
                ">=",
                (
                    Term(
                        "W",
                        1.0,
                        BlockMap.conjugation(
                            lift,
                            post_dims=ext_dims,
                            keep=(2, 3, 4, 5),
                            transpose=(2, 3),
                        ),
                    ),
                ),
                np.zeros((phys, phys)),
                name="ppt",
            ),
            Constraint(
                "<=",
                (
                    Term(
                        "W",
                        1.0,
                        BlockMap.conjugation(lift, post_dims=ext_dims, keep=(3, 5)),
                    ),
                ),
                cap,
                name="cap",
            ),
            Constraint(
                "<=",
                (
                    Term(
                        "W",
                        1.0,
                        BlockMap.conjugation(
                            lift, post_dims=ext_dims, keep=(3, 5), transpose=(1,)
                        ),
                    ),
                ),
                cap,
                name="cap-pt",
            ),
        ),
    )


# ---------------------------------------------------------------------------
# dual certificates


def extract_certificate(result: BoundResult) -> DualCertificate:
    """Read the dual multipliers of a reduced-bound solution back out.

    Only the reduced programs expose the (y, J, G, H, K) structure; the
    unreduced and extension programs have differently shaped duals.
    """
    if result.method != "PPT":
        raise ValueError("dual certificates exist for the reduced bound only")
    duals = result.primal.constraint_duals
    missing = [
        key for key in ("cap", "cap-pt", "sym", "antisym") if duals.get(key) is None
    ]
    if missing:
        raise ValueError(f"solution lacks dual values for {missing}")
    y = duals.get("success-rate")
    if y is None:
        y = duals["fidelity-lock"]

    def op(matrix: np.ndarray) -> StructuredOperator:
        return StructuredOperator(np.asarray(matrix), result.layout)

    return DualCertificate(
        y=float(y),
        J=op(duals["cap"]),
        G=op(duals["sym"]),
        H=op(duals["antisym"]),
        K=op(duals["cap-pt"]),
    )


def eval_fidelity_dual(
    rho: DensityMatrix,
    d_target: int,
    delta: float,
    cert: DualCertificate,
    tol: float = CERT_FEAS_TOL,
) -> tuple[bool, float]:
    """Check a fidelity-dual certificate and report its objective value.

    The value y*delta + tr[J+K]/(|A||B|) upper-bounds the primal fidelity
    whenever the two matrix inequalities hold, which is exactly what the
    feasibility flag reports.
    """
    _check_rate("delta", delta)
    pm, dim_a, dim_b = _party_split(rho)
    ab = dim_a * dim_b
    _check_cert_dims(cert, ab)
    rho_t = pm.matrix.T
    j, k, g_pt, h_pt, k_pt = _cert_party_major(cert)
    value = cert.y * delta + float(np.real(np.trace(j + k))) / ab
    ineq1 = ab * (cert.y - 1.0 / delta) * rho_t + j - g_pt + h_pt + k_pt
    ineq2 = (
        ab * cert.y * rho_t
        + j
        - g_pt / (d_target + 1)
        - h_pt / (d_target - 1)
        + k_pt
    )
    feasible = _min_eig(ineq1) >= -tol and _min_eig(ineq2) >= -tol
    return feasible, value


def eval_success_dual(
    rho: DensityMatrix,
    d_target: int,
    fidelity: float,
    cert: DualCertificate,
    tol: float = CERT_FEAS_TOL,
) -> tuple[bool, float]:
    """Check a success-probability dual certificate; value is tr[J+K]/|A||B|."""
    _check_rate("fidelity", fidelity)
    pm, dim_a, dim_b = _party_split(rho)
    ab = dim_a * dim_b
    _check_cert_dims(cert, ab)
    rho_t = pm.matrix.T
    j, k, g_pt, h_pt, k_pt = _cert_party_major(cert)
    value = float(np.real(np.trace(j + k))) / ab
    ineq1 = ((1.0 - fidelity) * cert.y - ab) * rho_t + j - g_pt + h_pt + k_pt
    ineq2 = (
        (-fidelity * cert.y - ab) * rho_t
        + j
        - g_pt / (d_target + 1)
        - h_pt / (d_target - 1)
        + k_pt
    )
    feasible = _min_eig(ineq1) >= -tol and _min_eig(ineq2) >= -tol
    return feasible, value


def _cert_party_major(cert: DualCertificate):
    """Multiplier matrices in party-major register order, transposed as used.

    Certificates may be built on any register ordering (the analytic ones are
    most natural copy-major); the dual inequalities are evaluated against the
    party-major form of the state, so everything is permuted here.
    """
    j = party_major(cert.J).matrix
    k = party_major(cert.K).matrix
    g_pt = party_major(partial_transpose(cert.G)).matrix
    h_pt = party_major(partial_transpose(cert.H)).matrix
    k_pt = party_major(partial_transpose(cert.K)).matrix
    return j, k, g_pt, h_pt, k_pt


def _check_cert_dims(cert: DualCertificate, ab: int) -> None:
    for label, op in (("J", cert.J), ("G", cert.G), ("H", cert.H), ("K", cert.K)):
        if op.layout.dim != ab:
            raise ValueError(
                f"certificate {label} has dimension {op.layout.dim}, state needs {ab}"
            )


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
