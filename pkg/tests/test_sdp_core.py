import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distil.sdp_core import (
    Block,
    BlockMap,
    Constraint,
    SdpProblem,
    Term,
    constraint_residual,
    embed_complex,
    embed_matrix,
    solve,
    unembed_matrix,
)


def trace_cap_problem(dim: int) -> SdpProblem:
    return SdpProblem(
        blocks=(Block("X", dim),),
        objective=(Term("X", np.eye(dim)),),
        constraints=(
            Constraint("<=", (Term("X", 1.0),), np.eye(dim), name="cap"),
        ),
    )


# ---------------------------------------------------------------------------
# solve: toy problems with known optima


def test_trace_cap_reaches_dimension():
    sol = solve(trace_cap_problem(4))
    assert sol.status == "optimal"
    assert abs(sol.primal_objective - 4.0) < 1e-7
    assert np.abs(sol.block_values["X"] - np.eye(4)).max() < 1e-6


def test_trace_cap_dual_is_identity():
    sol = solve(trace_cap_problem(4))
    assert np.abs(sol.constraint_duals["cap"] - np.eye(4)).max() < 1e-6
    assert sol.duality_gap > -1e-7
    assert abs(sol.dual_objective - 4.0) < 1e-6


def test_infeasible_trace():
    p = SdpProblem(
        blocks=(Block("X", 2),),
        objective=(Term("X", np.zeros((2, 2))),),
        constraints=(Constraint("=", (Term("X", np.eye(2)),), -1.0),),
    )
    assert solve(p).status == "infeasible"


def test_unbounded_scalar():
    p = SdpProblem(
        blocks=(Block("y", 1, "free-scalar"), Block("X", 2)),
        objective=(Term("y", 1.0),),
        constraints=(Constraint(">=", (Term("X", np.eye(2)),), 0.0),),
    )
    assert solve(p).status == "unbounded"


def test_scalar_equality_picks_top_eigenvalue():
    c = np.diag([1.0, 2.0, 3.0, 4.0])
    p = SdpProblem(
        blocks=(Block("X", 4),),
        objective=(Term("X", c),),
        constraints=(Constraint("=", (Term("X", np.eye(4)),), 1.0),),
    )
    sol = solve(p)
    assert abs(sol.primal_objective - 4.0) < 1e-7
    assert abs(sol.dual_objective - 4.0) < 1e-6


def test_scalar_lower_bound_dual_sign():
    # maximize -tr X subject to tr X >= 2: optimum -2, multiplier 1
    p = SdpProblem(
        blocks=(Block("X", 2),),
        objective=(Term("X", -np.eye(2)),),
        constraints=(Constraint(">=", (Term("X", np.eye(2)),), 2.0, name="floor"),),
    )
    sol = solve(p)
    assert abs(sol.primal_objective + 2.0) < 1e-7
    assert abs(sol.dual_objective + 2.0) < 1e-6
    assert sol.duality_gap > -1e-7
    assert abs(sol.constraint_duals["floor"] - 1.0) < 1e-6


def test_marginal_constraint():
    # maximize tr Y with the first-factor marginal capped at the identity
    p = SdpProblem(
        blocks=(Block("Y", 4),),
        objective=(Term("Y", np.eye(4)),),
        constraints=(
            Constraint(
                "<=",
                (Term("Y", 1.0, BlockMap.marginal((2, 2), keep=(0,))),),
                np.eye(2),
            ),
        ),
    )
    sol = solve(p)
    assert sol.status == "optimal"
    assert abs(sol.primal_objective - 2.0) < 1e-7


def test_ppt_cap_on_entangled_overlap():
    # max overlap with the maximally entangled state over PPT states is 1/2
    from distil.qmath import max_entangled

    p = SdpProblem(
        blocks=(Block("X", 4),),
        objective=(Term("X", max_entangled(2)),),
        constraints=(
            Constraint("=", (Term("X", np.eye(4)),), 1.0),
            Constraint(
                ">=",
                (Term("X", 1.0, BlockMap.partial_transpose((2, 2), (1,))),),
                np.zeros((4, 4)),
            ),
        ),
    )
    sol = solve(p)
    assert abs(sol.primal_objective - 0.5) < 1e-7
    assert sol.duality_gap > -1e-7


def test_conjugation_constraint():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(4, 2)))
    p = SdpProblem(
        blocks=(Block("W", 2),),
        objective=(Term("W", np.eye(2)),),
        constraints=(
            Constraint("<=", (Term("W", 1.0, BlockMap.conjugation(q)),), np.eye(4)),
        ),
    )
    sol = solve(p)
    assert abs(sol.primal_objective - 2.0) < 1e-7


def test_free_scalar_spectral_bound():
    # minimize y with y*I >= C: optimum is the top eigenvalue of C
    c = np.array([[1.0, 0.7], [0.7, 2.0]])
    top = np.linalg.eigvalsh(c)[-1]
    p = SdpProblem(
        blocks=(Block("y", 1, "free-scalar"),),
        objective=(Term("y", -1.0),),
        constraints=(Constraint(">=", (Term("y", np.eye(2)),), c),),
    )
    sol = solve(p)
    assert abs(sol.primal_objective + top) < 1e-7
    assert sol.duality_gap > -1e-7


def test_complex_objective_spectral_oracle():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    c = (a + a.conj().T) / 2
    p = SdpProblem(
        blocks=(Block("X", 3),),
        objective=(Term("X", c),),
        constraints=(Constraint("=", (Term("X", np.eye(3)),), 1.0),),
    )
    sol = solve(p)
    assert abs(sol.primal_objective - np.linalg.eigvalsh(c)[-1]) < 1e-7
    x = sol.block_values["X"]
    assert np.abs(x - x.conj().T).max() < 1e-9
    assert np.linalg.eigvalsh(x)[0] > -1e-8
    assert sol.duality_gap > -1e-7


def test_complex_ppt_overlap_with_phase():
    # same PPT toy as above but with a phase twist on the target; the
    # rotated problem must reach the same value through the embedding
    from distil.qmath import max_entangled

    u = np.diag([1.0, np.exp(0.3j)])
    phi = np.kron(u, np.eye(2)) @ max_entangled(2) @ np.kron(u, np.eye(2)).conj().T
    p = SdpProblem(
        blocks=(Block("X", 4),),
        objective=(Term("X", phi),),
        constraints=(
            Constraint("=", (Term("X", np.eye(4)),), 1.0),
            Constraint(
                ">=",
                (Term("X", 1.0, BlockMap.partial_transpose((2, 2), (1,))),),
                np.zeros((4, 4)),
            ),
        ),
    )
    sol = solve(p)
    assert abs(sol.primal_objective - 0.5) < 1e-7


# ---------------------------------------------------------------------------
# embedding


def hermitian_strategy(dim: int):
    reals = st.floats(-1, 1, allow_nan=False, width=32)
    return st.lists(reals, min_size=2 * dim * dim, max_size=2 * dim * dim).map(
        lambda v: _to_hermitian(np.array(v), dim)
    )


def _to_hermitian(v: np.ndarray, dim: int) -> np.ndarray:
    a = v[: dim * dim].reshape(dim, dim) + 1j * v[dim * dim :].reshape(dim, dim)
    return (a + a.conj().T) / 2


@settings(max_examples=60, deadline=None)
@given(hermitian_strategy(3), hermitian_strategy(3))
def test_embedding_preserves_trace_pairing(c, x):
    lhs = np.real(np.trace(c @ x))
    rhs = np.trace(embed_matrix(c) @ embed_matrix(x)) / 2
    assert abs(lhs - rhs) < 1e-6


@settings(max_examples=60, deadline=None)
@given(hermitian_strategy(3))
def test_embedding_round_trip_and_spectrum(x):
    y = embed_matrix(x)
    assert np.abs(y - y.T).max() < 1e-12
    assert np.abs(unembed_matrix(y) - x).max() < 1e-12
    doubled = np.sort(np.concatenate([np.linalg.eigvalsh(x)] * 2))
    assert np.abs(np.linalg.eigvalsh(y) - doubled).max() < 1e-6


def test_embed_real_problem_is_identity():
    p = trace_cap_problem(3)
    assert embed_complex(p) is p


def test_embed_scalar_block_doubles_dimension():
    # a 1x1 block riding along in a genuinely complex problem becomes a 2x2
    # real block whose doubled trace is absorbed by the 1/2 pairing scale
    c = np.array([[1.0, 0.5j], [-0.5j, 1.0]])
    p = SdpProblem(
        blocks=(Block("X", 2), Block("t", 1)),
        objective=(Term("X", c), Term("t", np.eye(1))),
        constraints=(
            Constraint("=", (Term("X", np.eye(2)),), 1.0),
            Constraint("<=", (Term("t", np.eye(1)),), 2.0),
        ),
    )
    e = embed_complex(p)
    assert e.block("X").dim == 4
    assert e.block("t").dim == 2
    sol_e, sol_p = solve(e), solve(p)
    assert abs(sol_e.primal_objective - sol_p.primal_objective) < 1e-7
    assert abs(sol_p.primal_objective - 3.5) < 1e-7  # top eig 1.5 plus cap 2


def test_explicit_embedding_matches_automatic_solve():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    c = (a + a.conj().T) / 2
    p = SdpProblem(
        blocks=(Block("X", 3),),
        objective=(Term("X", c),),
        constraints=(Constraint("=", (Term("X", np.eye(3)),), 1.0),),
    )
    direct = solve(p)
    via_embed = solve(embed_complex(p))
    assert abs(direct.primal_objective - via_embed.primal_objective) < 1e-7


def test_embedded_partial_transpose_commutes():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    x = (a + a.conj().T) / 2
    m = BlockMap.partial_transpose((2, 2), (1,))
    from distil.sdp_core import _embed_map

    lhs = embed_matrix(m.apply(x))
    rhs = _embed_map(m).apply(embed_matrix(x))
    assert np.abs(lhs - rhs).max() < 1e-12


def test_embedded_marginal_commutes():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    x = (a + a.conj().T) / 2
    m = BlockMap.marginal((2, 2, 2), keep=(0, 2), transpose=(1,), scale=1.5)
    from distil.sdp_core import _embed_map

    lhs = embed_matrix(m.apply(x))
    rhs = _embed_map(m).apply(embed_matrix(x))
    assert np.abs(lhs - rhs).max() < 1e-12


def test_embedded_conjugation_commutes():
    rng = np.random.default_rng(13)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    x = (a + a.conj().T) / 2
    pmat = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    m = BlockMap.conjugation(pmat, post_dims=(2, 3), keep=(1,))
    from distil.sdp_core import _embed_map

    lhs = embed_matrix(m.apply(x))
    rhs = _embed_map(m).apply(embed_matrix(x))
    assert np.abs(lhs - rhs).max() < 1e-10


# ---------------------------------------------------------------------------
# block maps


def test_map_apply_matches_hand_kron():
    a = np.diag([1.0, 2.0])
    b = np.array([[3.0, 1.0], [1.0, 4.0]])
    k = np.kron(a, b)
    assert np.abs(
        BlockMap.marginal((2, 2), keep=(0,)).apply(k) - np.trace(b) * a
    ).max() < 1e-12
    assert np.abs(
        BlockMap.partial_transpose((2, 2), (1,)).apply(k) - np.kron(a, b.T)
    ).max() < 1e-12


def test_map_conjugation_apply():
    rng = np.random.default_rng(1)
    pmat = rng.normal(size=(3, 2))
    x = np.array([[1.0, 0.2], [0.2, 2.0]])
    out = BlockMap.conjugation(pmat, scale=2.0).apply(x)
    assert np.abs(out - 2.0 * pmat @ x @ pmat.T).max() < 1e-12


def test_vec_lowering_matches_apply():
    from distil.sdp_core import _vec_operator

    rng = np.random.default_rng(7)
    pmat = rng.normal(size=(12, 6))
    maps = [
        BlockMap.identity(),
        BlockMap.partial_transpose((2, 3), (1,), scale=0.5),
        BlockMap.marginal((2, 3), keep=(1,)),
        BlockMap.marginal((2, 2, 3), keep=(0, 2), transpose=(1,), scale=2.0),
        BlockMap.conjugation(pmat, post_dims=(2, 3, 2), keep=(0, 2), transpose=(1,)),
    ]
    for m in maps:
        dim = m.input_dim() or 6
        a = rng.normal(size=(dim, dim))
        x = a + a.T
        op = _vec_operator(m, dim)
        if op is None:
            assert np.abs(m.apply(x) - x).max() < 1e-12
            continue
        out_dim = m.output_dim(dim)
        lowered = (op @ x.reshape(-1)).reshape(out_dim, out_dim)
        assert np.abs(lowered - m.apply(x)).max() < 1e-10


def test_map_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        BlockMap.marginal((2, 2), keep=(1, 0))
    with pytest.raises(ValueError, match="out of range"):
        BlockMap.marginal((2, 2), keep=(0,), transpose=(1,))
    with pytest.raises(ValueError, match="factor dimensions"):
        BlockMap(keep=(0,))


# ---------------------------------------------------------------------------
# model validation and serialization


def test_problem_validation_errors():
    with pytest.raises(KeyError):
        SdpProblem(
            blocks=(Block("X", 2),),
            objective=(Term("Y", np.eye(2)),),
            constraints=(),
        )
    with pytest.raises(ValueError, match="Hermitian"):
        SdpProblem(
            blocks=(Block("X", 2),),
            objective=(Term("X", np.array([[0.0, 1.0], [0.0, 0.0]])),),
            constraints=(),
        )
    with pytest.raises(ValueError, match="does not match"):
        SdpProblem(
            blocks=(Block("X", 2),),
            objective=(Term("X", np.eye(3)),),
            constraints=(),
        )
    with pytest.raises(ValueError, match="scalar coefficient"):
        SdpProblem(
            blocks=(Block("X", 2),),
            objective=(Term("X", np.eye(2)),),
            constraints=(
                Constraint("<=", (Term("X", np.eye(2)),), np.eye(2)),
            ),
        )
    with pytest.raises(ValueError, match="unknown sense"):
        Constraint("<", (Term("X", 1.0),), 0.0)
    with pytest.raises(ValueError, match="duplicate block"):
        SdpProblem(
            blocks=(Block("X", 2), Block("X", 3)),
            objective=(),
            constraints=(),
        )
    with pytest.raises(ValueError, match="free-scalar"):
        Block("y", 2, "free-scalar")


def test_json_dump_schema(tmp_path):
    p = SdpProblem(
        blocks=(Block("X", 2), Block("y", 1, "free-scalar")),
        objective=(Term("X", np.eye(2) * (1 + 0j)),),
        constraints=(
            Constraint(
                "<=",
                (
                    Term("X", 1.0, BlockMap.partial_transpose((2,), ())),
                    Term("y", np.eye(2, dtype=complex)),
                ),
                np.eye(2),
                name="cap",
            ),
        ),
    )
    d = p.to_json_dict()
    assert {b["name"] for b in d["blocks"]} == {"X", "y"}
    assert d["constraints"][0]["name"] == "cap"
    assert "re" in d["objective"][0]["coeff"]
    out = tmp_path / "problem.json"
    p.dump(out)
    import json

    parsed = json.loads(out.read_text())
    assert parsed["constraints"][0]["sense"] == "<="


def test_constraint_residual_reports_violation():
    p = trace_cap_problem(2)
    ok = {"X": np.eye(2) * 0.5}
    bad = {"X": np.eye(2) * 1.5}
    cap = p.constraints[0]
    assert constraint_residual(p, cap, ok) == 0.0
    assert abs(constraint_residual(p, cap, bad) - 0.5) < 1e-12
