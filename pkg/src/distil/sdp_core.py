"""Backend-agnostic semidefinite-program model and a conic solver adapter.

The model is deliberately small: Hermitian PSD blocks plus free real
scalars, a linear objective to maximize, and linear constraints whose
left-hand sides are sums of structured linear maps applied to the blocks.
Complex problems are lowered to real symmetric form by :func:`embed_complex`
before a solver ever sees them, and dual variables are mapped back so weak
duality can be checked on every solve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .qmath import HERMITICITY_TOL, ptrace_axes, ptranspose_axes

DEFAULT_TOL = 1e-8

# residual slack allowed at status "optimal", as a multiple of the solve tol
RESIDUAL_FACTOR = 10.0

# largest semidefinite cone the interior-point solver is asked to handle;
# bigger cones go to the first-order solver, which trades accuracy per
# iteration for a memory footprint that stays bounded
_INTERIOR_POINT_MAX_DIM = 100

CONES = ("PSD", "free-scalar")
SENSES = ("=", "<=", ">=")
STATUSES = ("optimal", "near-optimal", "infeasible", "unbounded", "solver-failure")


def _is_matrix(x) -> bool:
    return isinstance(x, np.ndarray) and x.ndim == 2


def _check_hermitian(name: str, m: np.ndarray) -> None:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if np.abs(m - m.conj().T).max() > HERMITICITY_TOL:
        raise ValueError(f"{name} is not Hermitian")


@dataclass(frozen=True)
class Block:
    """One optimization variable: a PSD matrix or a free real scalar."""

    name: str
    dim: int
    cone: str = "PSD"

    def __post_init__(self):
        if self.cone not in CONES:
            raise ValueError(f"unknown cone {self.cone!r}")
        if self.dim < 1:
            raise ValueError("block dimension must be positive")
        if self.cone == "free-scalar" and self.dim != 1:
            raise ValueError("free-scalar blocks have dimension 1")


@dataclass(frozen=True)
class BlockMap:
    """Structured linear map applied to a block inside a constraint term.

    The stages compose in a fixed order: conjugation ``X -> C X C*`` first,
    then a marginal (partial trace keeping ``keep``), then partial
    transposition of ``transpose`` (indices into the kept factors), then a
    real scale.  ``dims`` factorizes the map's input; ``post_dims``
    factorizes the conjugation output when later stages need it.
    """

    dims: tuple[int, ...] | None = None
    conjugate: np.ndarray | sp.spmatrix | None = None
    post_dims: tuple[int, ...] | None = None
    keep: tuple[int, ...] | None = None
    transpose: tuple[int, ...] = ()
    scale: float = 1.0

    @staticmethod
    def identity(scale: float = 1.0) -> "BlockMap":
        return BlockMap(scale=scale)

    @staticmethod
    def partial_transpose(dims, axes, scale: float = 1.0) -> "BlockMap":
        return BlockMap(dims=tuple(dims), transpose=tuple(axes), scale=scale)

    @staticmethod
    def marginal(dims, keep, transpose=(), scale: float = 1.0) -> "BlockMap":
        return BlockMap(
            dims=tuple(dims), keep=tuple(keep), transpose=tuple(transpose), scale=scale
        )

    @staticmethod
    def conjugation(
        matrix, post_dims=None, keep=None, transpose=(), scale: float = 1.0
    ) -> "BlockMap":
        m = matrix if sp.issparse(matrix) else np.asarray(matrix)
        return BlockMap(
            dims=(m.shape[1],),
            conjugate=m,
            post_dims=None if post_dims is None else tuple(post_dims),
            keep=None if keep is None else tuple(keep),
            transpose=tuple(transpose),
            scale=scale,
        )

    def __post_init__(self):
        if self.keep is not None and list(self.keep) != sorted(set(self.keep)):
            raise ValueError("keep indices must be strictly increasing")
        working = self._work_dims()
        if working is None:
            if self.keep is not None or self.transpose:
                raise ValueError("marginal/transpose stages need factor dimensions")
            return
        n = len(working)
        if self.keep is not None and any(k >= n for k in self.keep):
            raise ValueError("keep index out of range")
        kept = len(self.keep) if self.keep is not None else n
        if any(t >= kept or t < 0 for t in self.transpose):
            raise ValueError("transpose index out of range of kept factors")

    @property
    def tag(self) -> str:
        """The map's kind, for serialization and error messages."""
        if self.conjugate is not None:
            return "conjugation"
        if self.keep is not None:
            return "marginal"
        if self.transpose:
            return "partial-transpose"
        return "identity"

    def _work_dims(self) -> tuple[int, ...] | None:
        """Factor dimensions of the operator the trace/transpose stages see."""
        if self.conjugate is not None:
            if self.post_dims is not None:
                return self.post_dims
            return (self.conjugate.shape[0],)
        return self.dims

    def input_dim(self) -> int | None:
        if self.conjugate is not None:
            return int(self.conjugate.shape[1])
        if self.dims is not None:
            return int(np.prod(self.dims))
        return None

    def output_dim(self, block_dim: int) -> int:
        din = self.input_dim()
        if din is not None and din != block_dim:
            raise ValueError(
                f"map expects input dimension {din}, block has {block_dim}"
            )
        working = self._work_dims()
        if working is None:
            return block_dim
        if self.keep is None:
            return int(np.prod(working))
        return int(np.prod([working[k] for k in self.keep]))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the map on a concrete matrix."""
        out = np.asarray(x)
        if self.conjugate is not None:
            c = self.conjugate
            out = c @ out @ c.conj().T
            out = np.asarray(out.todense()) if sp.issparse(out) else out
        working = self._work_dims()
        if working is not None:
            dims = list(working)
            if self.keep is not None:
                out = ptrace_axes(out, dims, list(self.keep))
                dims = [dims[k] for k in self.keep]
            if self.transpose:
                out = ptranspose_axes(out, dims, list(self.transpose))
        return self.scale * out

    def is_real(self) -> bool:
        if self.conjugate is None:
            return True
        c = self.conjugate
        data = c.data if sp.issparse(c) else c
        return not np.iscomplexobj(data) or float(np.abs(data.imag).max()) == 0.0


IDENTITY_MAP = BlockMap.identity()


@dataclass(frozen=True)
class Term:
    """One additive contribution ``coeff . map(block)`` to a constraint.

    In a scalar context the pairing is ``tr[coeff @ map(X)]`` for PSD blocks
    and ``coeff * x`` for free scalars; in a matrix context PSD blocks take a
    scalar coefficient and free scalars a constant matrix.
    """

    block: str
    coeff: float | np.ndarray
    map: BlockMap = IDENTITY_MAP


@dataclass(frozen=True)
class Constraint:
    sense: str
    terms: tuple[Term, ...]
    rhs: float | np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")
        if not self.terms:
            raise ValueError("constraint needs at least one term")

    @property
    def is_matrix(self) -> bool:
        return _is_matrix(self.rhs)


@dataclass(frozen=True)
class SdpProblem:
    """A maximization over PSD blocks and free scalars, to hand to solve()."""

    blocks: tuple[Block, ...]
    objective: tuple[Term, ...]
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names")
        seen = set()
        labeled = []
        for i, c in enumerate(self.constraints):
            if not c.name:
                c = Constraint(c.sense, c.terms, c.rhs, name=f"c{i}")
                labeled.append(c)
            else:
                labeled.append(c)
            if labeled[-1].name in seen:
                raise ValueError(f"duplicate constraint name {labeled[-1].name!r}")
            seen.add(labeled[-1].name)
        object.__setattr__(self, "constraints", tuple(labeled))
        for t in self.objective:
            self._check_term(t, matrix_context=False, where="objective")
        for c in self.constraints:
            for t in c.terms:
                self._check_term(t, matrix_context=c.is_matrix, where=c.name)
            if c.is_matrix:
                _check_hermitian(f"constraint {c.name} rhs", c.rhs)
                dim = c.rhs.shape[0]
                for t in c.terms:
                    out = t.map.output_dim(self.block(t.block).dim)
                    tdim = t.coeff.shape[0] if _is_matrix(t.coeff) else out
                    if tdim != dim:
                        raise ValueError(
                            f"constraint {c.name}: term dimension {tdim} "
                            f"does not match rhs dimension {dim}"
                        )

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(f"block {name!r} not declared")

    def _check_term(self, t: Term, matrix_context: bool, where: str) -> None:
        b = self.block(t.block)
        if b.cone == "free-scalar":
            want_matrix = matrix_context
            if _is_matrix(t.coeff) != want_matrix:
                raise ValueError(
                    f"{where}: free-scalar term coefficient must be "
                    f"{'a matrix' if want_matrix else 'a scalar'}"
                )
            if _is_matrix(t.coeff):
                _check_hermitian(f"{where} coefficient", t.coeff)
            if t.map.tag != "identity":
                raise ValueError(f"{where}: free-scalar terms take no map")
            return
        out = t.map.output_dim(b.dim)
        if matrix_context:
            if _is_matrix(t.coeff):
                raise ValueError(
                    f"{where}: PSD-block term in a matrix constraint takes a "
                    "scalar coefficient"
                )
        else:
            if not _is_matrix(t.coeff):
                raise ValueError(f"{where}: trace pairing needs a matrix coefficient")
            _check_hermitian(f"{where} coefficient", t.coeff)
            if t.coeff.shape[0] != out:
                raise ValueError(
                    f"{where}: coefficient dimension {t.coeff.shape[0]} does not "
                    f"match mapped block dimension {out}"
                )

    def is_real(self) -> bool:
        def real_mat(m) -> bool:
            return not np.iscomplexobj(m) or float(np.abs(m.imag).max()) == 0.0

        for t in self.objective:
            if _is_matrix(t.coeff) and not real_mat(t.coeff):
                return False
        for c in self.constraints:
            if _is_matrix(c.rhs) and not real_mat(c.rhs):
                return False
            for t in c.terms:
                if _is_matrix(t.coeff) and not real_mat(t.coeff):
                    return False
                if not t.map.is_real():
                    return False
        return True

    def to_json_dict(self) -> dict:
        def mat(m):
            a = np.asarray(m, dtype=complex)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        def coeff(c):
            return mat(c) if _is_matrix(c) else float(c)

        def map_dict(m: BlockMap):
            d = {"kind": m.tag, "scale": m.scale}
            if m.dims is not None:
                d["dims"] = list(m.dims)
            if m.keep is not None:
                d["keep"] = list(m.keep)
            if m.transpose:
                d["transpose"] = list(m.transpose)
            if m.conjugate is not None:
                c = m.conjugate
                d["conjugate"] = mat(c.todense() if sp.issparse(c) else c)
                if m.post_dims is not None:
                    d["post_dims"] = list(m.post_dims)
            return d

        def term(t: Term):
            return {"block": t.block, "coeff": coeff(t.coeff), "map": map_dict(t.map)}

        return {
            "blocks": [
                {"name": b.name, "dim": b.dim, "cone": b.cone} for b in self.blocks
            ],
            "objective": [term(t) for t in self.objective],
            "constraints": [
                {
                    "name": c.name,
                    "sense": c.sense,
                    "terms": [term(t) for t in c.terms],
                    "rhs": coeff(c.rhs),
                }
                for c in self.constraints
            ],
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class SdpSolution:
    status: str
    primal_objective: float
    dual_objective: float
    block_values: dict = field(default_factory=dict)
    constraint_duals: dict = field(default_factory=dict)

    @property
    def duality_gap(self) -> float:
        return self.dual_objective - self.primal_objective


# ---------------------------------------------------------------------------
# complex -> real embedding


def embed_matrix(m: np.ndarray) -> np.ndarray:
    """The real representation [[Re, -Im], [Im, Re]] of a complex matrix."""
    a = np.asarray(m, dtype=complex)
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def unembed_matrix(y: np.ndarray) -> np.ndarray:
    """Invert embed_matrix on (averages over) a real 2d x 2d matrix."""
    d = y.shape[0] // 2
    y11, y12 = y[:d, :d], y[:d, d:]
    y21, y22 = y[d:, :d], y[d:, d:]
    return (y11 + y22) / 2 + 1j * (y21 - y12) / 2


def _embed_map(m: BlockMap) -> BlockMap:
    """Rewrite a block map so it acts on the real-embedded block.

    The embedding is the algebra homomorphism X -> I2 (x) Re(X) + J (x) Im(X),
    so conjugation embeds to conjugation by the embedded matrix, and partial
    trace / partial transpose act on the original factors shifted past a new
    leading factor of dimension 2 that is always kept and never transposed.
    """
    conjugate = m.conjugate
    if conjugate is not None:
        c = conjugate.todense() if sp.issparse(conjugate) else conjugate
        conjugate = embed_matrix(np.asarray(c))
        if sp.issparse(m.conjugate):
            conjugate = sp.csr_matrix(conjugate)
    working = m._work_dims()
    dims = None if m.dims is None else (2,) + m.dims
    post = None
    if conjugate is not None:
        dims = (2 * m.conjugate.shape[1],)
        post = (2,) + (working if working is not None else ())
    keep = None
    if m.keep is not None:
        keep = (0,) + tuple(k + 1 for k in m.keep)
    transpose = tuple(t + 1 for t in m.transpose)
    return BlockMap(
        dims=dims,
        conjugate=conjugate,
        post_dims=post,
        keep=keep,
        transpose=transpose,
        scale=m.scale,
    )


def embed_complex(p: SdpProblem) -> SdpProblem:
    """Lower a complex-valued problem to an equivalent real one.

    Every PSD block X of dimension d becomes a real symmetric block of
    dimension 2d standing for [[Re X, -Im X], [Im X, Re X]]; trace pairings
    pick up a factor 1/2 so objective and constraint values are unchanged.
    Problems that are already real are returned as-is.
    """
    if p.is_real():
        return p

    psd = {b.name for b in p.blocks if b.cone == "PSD"}
    blocks = tuple(
        Block(b.name, 2 * b.dim, b.cone) if b.cone == "PSD" else b for b in p.blocks
    )

    def scalar_term(t: Term) -> Term:
        if t.block in psd:
            return Term(t.block, embed_matrix(t.coeff) / 2, _embed_map(t.map))
        return t

    def matrix_term(t: Term) -> Term:
        if t.block in psd:
            return Term(t.block, float(t.coeff), _embed_map(t.map))
        return Term(t.block, embed_matrix(t.coeff), t.map)

    constraints = []
    for c in p.constraints:
        if c.is_matrix:
            terms = tuple(matrix_term(t) for t in c.terms)
            constraints.append(Constraint(c.sense, terms, embed_matrix(c.rhs), c.name))
        else:
            terms = tuple(scalar_term(t) for t in c.terms)
            constraints.append(Constraint(c.sense, terms, float(c.rhs), c.name))

    objective = tuple(scalar_term(t) for t in p.objective)
    return SdpProblem(blocks, objective, tuple(constraints))


# ---------------------------------------------------------------------------
# solver adapter


def _realize(m):
    """Drop a zero imaginary part so cvxpy sees real data as real."""
    if isinstance(m, np.ndarray) and np.iscomplexobj(m):
        return np.ascontiguousarray(m.real)
    if sp.issparse(m) and np.iscomplexobj(m.data):
        return m.real
    return m


def _ptrace_vec_matrix(dims, keep) -> sp.csr_matrix:
    """Sparse matrix sending row-major vec(X) to vec of the kept marginal."""
    n = int(np.prod(dims))
    kept = [dims[k] for k in keep]
    rest = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod(kept)) if kept else 1
    strides = np.cumprod((list(dims[1:]) + [1])[::-1])[::-1]

    def offset(assign):
        return sum(strides[i] * assign[i] for i in range(len(dims)))

    rows, cols = [], []
    for ki in range(dk):
        kidx = np.unravel_index(ki, kept) if kept else ()
        for kj in range(dk):
            kjdx = np.unravel_index(kj, kept) if kept else ()
            row = ki * dk + kj
            dr = int(np.prod([dims[r] for r in rest])) if rest else 1
            for r in range(dr):
                ridx = np.unravel_index(r, [dims[t] for t in rest]) if rest else ()
                ai = [0] * len(dims)
                aj = [0] * len(dims)
                for pos, k in enumerate(keep):
                    ai[k], aj[k] = kidx[pos], kjdx[pos]
                for pos, t in enumerate(rest):
                    ai[t] = aj[t] = ridx[pos]
                rows.append(row)
                cols.append(offset(ai) * n + offset(aj))
    data = np.ones(len(rows))
    return sp.csr_matrix((data, (rows, cols)), shape=(dk * dk, n * n))


def _ptranspose_vec_matrix(dims, axes) -> sp.csr_matrix:
    """Row-major vec permutation realizing a partial transpose."""
    n = int(np.prod(dims))
    src = np.arange(n * n).reshape(tuple(dims) * 2)
    order = list(range(2 * len(dims)))
    for a in axes:
        order[a], order[len(dims) + a] = order[len(dims) + a], order[a]
    perm = src.transpose(order).reshape(-1)
    return sp.csr_matrix(
        (np.ones(n * n), (np.arange(n * n), perm)), shape=(n * n, n * n)
    )


def _vec_operator(m: BlockMap, block_dim: int) -> sp.csr_matrix | None:
    """Lower a block map to one sparse operator on row-major vec(X).

    Identity maps return None so plain variables skip the reshape entirely.
    """
    if m.tag == "identity" and m.scale == 1.0:
        return None
    total = None

    def compose(op):
        nonlocal total
        total = op if total is None else op @ total

    if m.conjugate is not None:
        c = _realize(m.conjugate)
        c = sp.csr_matrix(c) if not sp.issparse(c) else c
        compose(sp.kron(c, c.conj(), format="csr"))
    working = m._work_dims()
    if working is not None:
        dims = list(working)
        if m.keep is not None:
            compose(_ptrace_vec_matrix(dims, list(m.keep)))
            dims = [dims[k] for k in m.keep]
        if m.transpose:
            compose(_ptranspose_vec_matrix(dims, list(m.transpose)))
    if total is None:
        total = sp.identity(block_dim * block_dim, format="csr")
    if m.scale != 1.0:
        total = m.scale * total
    return sp.csr_matrix(total)


def _cvx_apply(m: BlockMap, expr, block_dim: int):
    import cvxpy as cp

    op = _vec_operator(m, block_dim)
    if op is None:
        return expr
    out_dim = m.output_dim(block_dim)
    return cp.reshape(op @ cp.vec(expr, order="C"), (out_dim, out_dim), order="C")


def _max_cone_dim(p: SdpProblem) -> int:
    dims = [b.dim for b in p.blocks if b.cone == "PSD"]
    dims += [c.rhs.shape[0] for c in p.constraints if c.is_matrix and c.sense != "="]
    return max(dims) if dims else 1


def _numeric_lhs(p: SdpProblem, c: Constraint, values: dict):
    total = None
    for t in c.terms:
        b = p.block(t.block)
        if b.cone == "free-scalar":
            contrib = t.coeff * values[t.block]
        else:
            mapped = t.map.apply(values[t.block])
            if c.is_matrix:
                contrib = t.coeff * mapped
            else:
                contrib = float(np.real(np.trace(t.coeff @ mapped)))
        total = contrib if total is None else total + contrib
    return total


def constraint_residual(p: SdpProblem, c: Constraint, values: dict) -> float:
    """Infeasibility of one constraint at the given block values (0 if met)."""
    lhs = _numeric_lhs(p, c, values)
    if c.is_matrix:
        gap = lhs - c.rhs
        if c.sense == "=":
            return float(np.abs(gap).max())
        eigs = np.linalg.eigvalsh((gap + gap.conj().T) / 2)
        return max(0.0, float(eigs[-1]) if c.sense == "<=" else -float(eigs[0]))
    gap = float(lhs) - float(c.rhs)
    if c.sense == "=":
        return abs(gap)
    return max(0.0, gap if c.sense == "<=" else -gap)


def _hermitize(m: np.ndarray) -> np.ndarray:
    h = (m + m.conj().T) / 2
    if np.iscomplexobj(h) and float(np.abs(h.imag).max()) == 0.0:
        return h.real
    return h


_STATUS_MAP = {
    "optimal": "optimal",
    "optimal_inaccurate": "near-optimal",
    "infeasible": "infeasible",
    "infeasible_inaccurate": "infeasible",
    "unbounded": "unbounded",
    "unbounded_inaccurate": "unbounded",
}


def solve(p: SdpProblem, tol: float = DEFAULT_TOL) -> SdpSolution:
    """Maximize the problem's objective and report primal/dual values.

    Complex problems are embedded first.  The backend is chosen by the
    largest semidefinite cone: an interior-point solver up to dimension
    100, a first-order splitting solver beyond.  On an optimal status the
    constraint residuals are re-checked against 10*tol and the status is
    downgraded to near-optimal when they fail.
    """
    import cvxpy as cp

    original = p
    p = embed_complex(p)
    embedded = p is not original

    var = {}
    for b in p.blocks:
        if b.cone == "free-scalar":
            var[b.name] = cp.Variable(name=b.name)
        else:
            var[b.name] = cp.Variable((b.dim, b.dim), symmetric=True, name=b.name)

    def lhs_expr(terms, matrix_context):
        parts = []
        for t in terms:
            b = p.block(t.block)
            if b.cone == "free-scalar":
                coeff = _realize(t.coeff) if _is_matrix(t.coeff) else t.coeff
                parts.append(coeff * var[t.block])
            elif matrix_context:
                parts.append(float(t.coeff) * _cvx_apply(t.map, var[t.block], b.dim))
            else:
                parts.append(
                    cp.trace(_realize(t.coeff) @ _cvx_apply(t.map, var[t.block], b.dim))
                )
        return sum(parts)

    cons = []
    handles = []
    for b in p.blocks:
        if b.cone == "PSD":
            cons.append(var[b.name] >> 0)
    for c in p.constraints:
        lhs = lhs_expr(c.terms, c.is_matrix)
        rhs = _realize(c.rhs) if c.is_matrix else c.rhs
        if c.is_matrix:
            gap = rhs - lhs if c.sense == "<=" else lhs - rhs
            gap = (gap + gap.T) / 2
            handle = gap == 0 if c.sense == "=" else gap >> 0
        else:
            if c.sense == "=":
                handle = lhs == rhs
            elif c.sense == "<=":
                handle = lhs <= rhs
            else:
                handle = lhs >= rhs
        cons.append(handle)
        handles.append((c, handle))

    objective = cp.Maximize(lhs_expr(p.objective, matrix_context=False))
    problem = cp.Problem(objective, cons)

    try:
        import warnings

        with warnings.catch_warnings():
            # accuracy warnings are folded into the near-optimal status
            warnings.simplefilter("ignore")
            if _max_cone_dim(p) <= _INTERIOR_POINT_MAX_DIM:
                problem.solve(
                    solver=cp.CLARABEL, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol
                )
            else:
                problem.solve(
                    solver=cp.SCS, eps_abs=tol, eps_rel=tol, max_iters=200_000
                )
    except Exception:
        return SdpSolution("solver-failure", math.nan, math.nan)

    status = _STATUS_MAP.get(problem.status, "solver-failure")
    if status in ("infeasible", "unbounded", "solver-failure"):
        return SdpSolution(status, math.nan, math.nan)

    values = {}
    for b in original.blocks:
        raw = var[b.name].value
        if b.cone == "free-scalar":
            values[b.name] = float(raw)
        else:
            if embedded:
                raw = unembed_matrix(raw)
            values[b.name] = _hermitize(np.asarray(raw))

    duals = {}
    dual_objective = 0.0
    for c, handle in handles:
        lam = handle.dual_value
        if lam is None:
            duals[c.name] = None
            dual_objective = math.nan
            continue
        if c.is_matrix:
            lam = np.asarray(lam)
            if embedded:
                # the dual pairs with the embedded constraint; fold the two
                # real copies back into one Hermitian multiplier
                lam = 2 * unembed_matrix(lam)
            lam = _hermitize(lam)
            pairing = float(np.real(np.trace(_as_original_rhs(original, c.name) @ lam)))
        else:
            lam = float(lam)
            pairing = float(_as_original_rhs(original, c.name)) * lam
        duals[c.name] = lam
        dual_objective += pairing if c.sense != ">=" else -pairing

    primal = float(problem.value)
    if status == "optimal":
        worst = max(
            constraint_residual(original, c, values) for c in original.constraints
        )
        if worst > RESIDUAL_FACTOR * tol:
            status = "near-optimal"

    return SdpSolution(status, primal, dual_objective, values, duals)


def _as_original_rhs(p: SdpProblem, name: str):
    for c in p.constraints:
        if c.name == name:
            return c.rhs
    raise KeyError(name)
