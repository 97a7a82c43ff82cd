import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distil.qmath import (
    ChoiBranch,
    DensityMatrix,
    StructuredOperator,
    Subsystem,
    SubsystemLayout,
    apply_via_choi,
    choi_of_kraus,
    fidelity_to_target,
    from_json,
    is_ppt,
    kron,
    max_entangled,
    max_entangled_vec,
    partial_trace,
    partial_transpose,
    pauli_twirl,
    permute_subsystems,
    sym_antisym_projectors,
    to_json,
    twirl,
    validate_choi_family,
)
from conftest import (
    bell_diag_matrix,
    bell_vecs,
    op,
    random_density,
    random_hermitian,
    two_qubit_layout,
)

X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.array([[1.0, 0.0], [0.0, -1.0]])


def qubit(label: str, party: str) -> SubsystemLayout:
    return SubsystemLayout.of((label, party, 2))


def phi2() -> StructuredOperator:
    return op(max_entangled(2), two_qubit_layout())


# ---------------------------------------------------------------------------
# layouts and constructors


def test_layout_rejects_duplicate_labels():
    with pytest.raises(ValueError):
        SubsystemLayout.of(("A1", "Alice", 2), ("A1", "Bob", 2))


def test_subsystem_rejects_unknown_party():
    with pytest.raises(ValueError):
        Subsystem("A1", "Carol", 2)


def test_structured_operator_symmetrizes_small_drift():
    m = np.eye(2, dtype=complex)
    m = m + np.array([[0, 1e-11], [0, 0]])
    o = StructuredOperator(m, qubit("A1", "Alice"))
    assert np.abs(o.matrix - o.matrix.conj().T).max() == 0.0


def test_structured_operator_rejects_large_drift():
    m = np.eye(2) + np.array([[0, 1e-6], [0, 0]])
    with pytest.raises(ValueError, match="Hermitian"):
        StructuredOperator(m, qubit("A1", "Alice"))


def test_density_matrix_validation():
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix(np.eye(2), qubit("A1", "Alice"))
    neg = np.diag([1.5, -0.5])
    with pytest.raises(ValueError, match="eigenvalue"):
        DensityMatrix(neg, qubit("A1", "Alice"))


# ---------------------------------------------------------------------------
# kron / trace / transpose / permute


def test_kron_identity_case():
    a = op(np.eye(2), qubit("A1", "Alice"))
    b = op(np.eye(2), qubit("B1", "Bob"))
    out = kron(a, b)
    assert np.array_equal(out.matrix, np.eye(4))
    assert out.layout.labels == ("A1", "B1")


def test_kron_of_phi_is_rank_one_trace_one():
    a = phi2()
    b = op(max_entangled(2), SubsystemLayout.of(("A2", "Alice", 2), ("B2", "Bob", 2)))
    out = kron(a, b)
    assert out.dim == 16
    eigs = np.linalg.eigvalsh(out.matrix)
    assert abs(out.trace() - 1.0) < 1e-12
    assert np.sum(eigs > 1e-12) == 1


def test_kron_matches_hand_expansion():
    a = op(X, qubit("A1", "Alice"))
    b = op(Z, qubit("B1", "Bob"))
    expected = np.array(
        [
            [0, 0, 1, 0],
            [0, 0, 0, -1],
            [1, 0, 0, 0],
            [0, -1, 0, 0],
        ],
        dtype=float,
    )
    assert np.abs(kron(a, b).matrix - expected).max() == 0.0


def test_kron_label_collision():
    with pytest.raises(ValueError, match="collision"):
        kron(op(np.eye(2), qubit("A1", "Alice")), op(np.eye(2), qubit("A1", "Alice")))


def test_partial_trace_of_phi_is_maximally_mixed():
    red = partial_trace(phi2(), ["A1"])
    assert np.abs(red.matrix - np.eye(2) / 2).max() < 1e-14


def test_partial_trace_to_scalar():
    full = partial_trace(phi2(), [])
    assert full.matrix.shape == (1, 1)
    assert abs(full.matrix[0, 0] - 1.0) < 1e-14


def test_partial_trace_mixed_state():
    e01 = np.zeros((4, 4))
    e01[1, 1] = 1.0
    rho = op(0.8 * max_entangled(2) + 0.2 * e01, two_qubit_layout())
    red = partial_trace(rho, ["A1"])
    assert np.abs(red.matrix - np.diag([0.6, 0.4])).max() < 1e-14


def test_partial_trace_unknown_label():
    with pytest.raises(KeyError):
        partial_trace(phi2(), ["C9"])


def test_partial_transpose_of_phi():
    pt = partial_transpose(phi2())
    eigs = np.sort(np.linalg.eigvalsh(pt.matrix))
    assert np.abs(eigs - np.array([-0.5, 0.5, 0.5, 0.5])).max() < 1e-12
    ps, pa = sym_antisym_projectors(2)
    assert np.abs(pt.matrix - (ps - pa) / 2).max() < 1e-12


def test_partial_transpose_reflects_bell_coords():
    # coordinates r_i are the sigma_i (x) sigma_i expectations; transpose on
    # Bob flips the Y (x) Y one only
    p = (0.55, 0.25, 0.15, 0.05)
    rho = op(bell_diag_matrix(*p), two_qubit_layout())
    pt = partial_transpose(rho)
    vecs = bell_vecs()
    weights = [np.real(v @ pt.matrix @ v) for v in vecs]
    r = lambda q: (q[0] + q[1] - q[2] - q[3], -q[0] + q[1] + q[2] - q[3], q[0] - q[1] + q[2] - q[3])
    r_in, r_out = r(p), r(weights)
    assert abs(r_out[0] - r_in[0]) < 1e-12
    assert abs(r_out[1] + r_in[1]) < 1e-12
    assert abs(r_out[2] - r_in[2]) < 1e-12


def test_partial_transpose_involution(rng):
    layout = SubsystemLayout.of(("A1", "Alice", 2), ("B1", "Bob", 3))
    m = op(random_hermitian(rng, 6), layout)
    back = partial_transpose(partial_transpose(m))
    assert np.abs(back.matrix - m.matrix).max() < 1e-14


def test_permute_identity_and_double_swap(rng):
    layout = SubsystemLayout.of(("A1", "Alice", 2), ("B1", "Bob", 3))
    m = op(random_hermitian(rng, 6), layout)
    same = permute_subsystems(m, ["A1", "B1"])
    assert np.abs(same.matrix - m.matrix).max() == 0.0
    swapped = permute_subsystems(m, ["B1", "A1"])
    back = permute_subsystems(swapped, ["A1", "B1"])
    assert np.abs(back.matrix - m.matrix).max() == 0.0
    assert np.abs(np.sort(np.linalg.eigvalsh(swapped.matrix)) - np.sort(np.linalg.eigvalsh(m.matrix))).max() < 1e-12


def test_permute_rejects_non_permutation():
    with pytest.raises(ValueError):
        permute_subsystems(phi2(), ["A1", "A1"])


@settings(max_examples=20, deadline=None)
@given(st.permutations(["A1", "A2", "B1", "B2"]))
def test_permute_preserves_trace_and_spectrum(order):
    rng = np.random.default_rng(7)
    layout = SubsystemLayout.of(
        ("A1", "Alice", 2), ("A2", "Alice", 2), ("B1", "Bob", 2), ("B2", "Bob", 2)
    )
    m = op(random_hermitian(rng, 16), layout)
    out = permute_subsystems(m, list(order))
    assert abs(out.trace() - m.trace()) < 1e-12
    assert np.abs(np.sort(np.linalg.eigvalsh(out.matrix)) - np.sort(np.linalg.eigvalsh(m.matrix))).max() < 1e-10


# ---------------------------------------------------------------------------
# fidelity / twirl


def test_fidelity_of_target_states():
    assert abs(fidelity_to_target(phi2(), 2) - 1.0) < 1e-14
    mixed = op(np.eye(4) / 4, two_qubit_layout())
    assert abs(fidelity_to_target(mixed, 2) - 0.25) < 1e-14
    layout3 = SubsystemLayout.of(("A1", "Alice", 3), ("B1", "Bob", 3))
    assert abs(fidelity_to_target(op(max_entangled(3), layout3), 3) - 1.0) < 1e-14


def test_fidelity_of_isotropic_state():
    rho = op(0.7 * max_entangled(2) + 0.3 * np.eye(4) / 4, two_qubit_layout())
    assert abs(fidelity_to_target(rho, 2) - 0.775) < 1e-14


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        fidelity_to_target(phi2(), 3)


def test_twirl_fixes_target():
    out = twirl(phi2(), 2)
    assert np.abs(out.matrix - max_entangled(2)).max() < 1e-14


def test_twirl_idempotent(rng):
    rho = op(random_density(rng, 4), two_qubit_layout())
    once = twirl(rho, 2)
    twice = twirl(once, 2)
    assert np.abs(twice.matrix - once.matrix).max() < 1e-13


def test_twirl_eigenvalue_groups(rng):
    rho = op(random_density(rng, 4), two_qubit_layout())
    out = twirl(rho, 2)
    f = fidelity_to_target(StructuredOperator(out.matrix, out.layout), 2)
    eigs = np.sort(np.linalg.eigvalsh(out.matrix))
    expected = np.sort([f, (1 - f) / 3, (1 - f) / 3, (1 - f) / 3])
    assert np.abs(eigs - expected).max() < 1e-12


def test_twirl_with_bystander_registers(rng):
    # twirling (Ahat, Bhat) must act as identity on the primed registers:
    # the overlap blocks against Phi and its complement are preserved
    layout = SubsystemLayout.of(
        ("Ahat", "Alice", 2), ("Ap", "Alice", 2), ("Bhat", "Bob", 2), ("Bp", "Bob", 2)
    )
    m = op(random_hermitian(rng, 16, real=True), layout)
    front = permute_subsystems(m, ["Ahat", "Bhat", "Ap", "Bp"])
    x = front.matrix.reshape(4, 4, 4, 4)
    phi = max_entangled(2)
    n_phi = np.einsum("ab,bras->rs", phi, x)
    n_rest = np.einsum("ab,bras->rs", np.eye(4) - phi, x)
    out = permute_subsystems(twirl(m, 2), ["Ahat", "Bhat", "Ap", "Bp"])
    y = out.matrix.reshape(4, 4, 4, 4)
    assert np.abs(np.einsum("ab,bras->rs", phi, y) - n_phi).max() < 1e-12
    assert np.abs(np.einsum("ab,bras->rs", np.eye(4) - phi, y) - n_rest).max() < 1e-12
    expected = np.kron(phi, n_phi) + np.kron((np.eye(4) - phi) / 3, n_rest)
    assert np.abs(out.matrix - expected).max() < 1e-12


def test_pauli_twirl_fixes_bell_diagonal():
    rho = op(bell_diag_matrix(0.4, 0.3, 0.2, 0.1), two_qubit_layout())
    out = pauli_twirl(rho)
    assert np.abs(out.matrix - rho.matrix).max() < 1e-13


def test_pauli_twirl_output_is_bell_diagonal(rng):
    rho = op(random_density(rng, 4), two_qubit_layout())
    out = pauli_twirl(rho)
    vecs = bell_vecs()
    for i in range(4):
        for j in range(4):
            if i != j:
                assert abs(vecs[i] @ out.matrix @ vecs[j]) < 1e-12
    for v in vecs:
        before = np.real(v @ rho.matrix @ v)
        after = np.real(v @ out.matrix @ v)
        assert abs(before - after) < 1e-12


def test_pauli_twirl_of_s_state():
    # p Phi+ + (1-p)|11><11| twirls to (p + (1-p)/2) Phi+ + ((1-p)/2) Phi-
    # because |11> = (|Phi+> - |Phi->)/sqrt(2)
    p = 0.6
    e11 = np.zeros((4, 4))
    e11[3, 3] = 1.0
    rho = op(p * max_entangled(2) + (1 - p) * e11, two_qubit_layout())
    out = pauli_twirl(rho)
    vecs = bell_vecs()
    weights = [np.real(v @ out.matrix @ v) for v in vecs]
    assert np.abs(np.array(weights) - np.array([0.8, 0.0, 0.2, 0.0])).max() < 1e-12


def test_pauli_twirl_rejects_wrong_dims():
    layout = SubsystemLayout.of(("A1", "Alice", 3), ("B1", "Bob", 3))
    with pytest.raises(ValueError):
        pauli_twirl(op(np.eye(9) / 9, layout))


# ---------------------------------------------------------------------------
# projectors / PPT


def test_sym_antisym_projectors_basic():
    for d in (2, 3):
        ps, pa = sym_antisym_projectors(d)
        assert np.abs(ps + pa - np.eye(d * d)).max() < 1e-14
        assert np.abs(ps @ pa).max() < 1e-14
        assert round(np.trace(ps).real) == d * (d + 1) // 2
        assert round(np.trace(pa).real) == d * (d - 1) // 2
        layout = SubsystemLayout.of(("A1", "Alice", d), ("B1", "Bob", d))
        pt = partial_transpose(op(max_entangled(d), layout))
        assert np.abs(pt.matrix - (ps - pa) / d).max() < 1e-13


def test_is_ppt_cases():
    assert not is_ppt(phi2(), 1e-9)
    assert is_ppt(op(np.eye(4) / 4, two_qubit_layout()), 1e-9)
    iso_third = op(max_entangled(2) / 3 + (2 / 3) * np.eye(4) / 4, two_qubit_layout())
    assert is_ppt(iso_third, 1e-9)


# ---------------------------------------------------------------------------
# Choi representations


def identity_branch() -> ChoiBranch:
    (br,) = choi_of_kraus([(1, np.eye(2))], 2)
    return br


def test_choi_of_identity_channel():
    br = identity_branch()
    assert np.abs(br.matrix.matrix - max_entangled(2)).max() < 1e-14
    validate_choi_family([br])


def test_choi_of_filtering_branch_marginal():
    eps = 0.25
    a1 = np.array([[np.sqrt(eps), 0.0], [0.0, 1.0]])
    a0 = np.array([[np.sqrt(1 - eps), 0.0], [0.0, 0.0]])
    branches = choi_of_kraus([(1, a1), (0, a0)], 2)
    validate_choi_family(branches)
    br1 = next(b for b in branches if b.flag == 1)
    marg = partial_trace(br1.matrix, br1.in_labels)
    assert np.abs(marg.matrix - np.diag([eps / 2, 0.5])).max() < 1e-14
    assert np.linalg.eigvalsh(np.eye(2) / 2 - marg.matrix)[0] > -1e-12


def test_choi_of_depolarizing_channel():
    d = 2
    kraus = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d))
            k[i, j] = 1.0 / np.sqrt(d)
            kraus.append((1, k))
    (br,) = choi_of_kraus(kraus, d)
    assert np.abs(br.matrix.matrix - np.eye(d * d) / d**2).max() < 1e-14


def test_choi_rejects_non_trace_preserving():
    with pytest.raises(ValueError, match="trace preserving"):
        choi_of_kraus([(1, 0.5 * np.eye(2))], 2)


def test_apply_identity_choi_returns_state(rng):
    rho = op(random_density(rng, 2), qubit("in", "Alice"))
    out = apply_via_choi(identity_branch(), rho)
    assert np.abs(out.matrix - rho.matrix).max() < 1e-13


def test_apply_filtering_branch_trace():
    # success weight on p Phi + (1-p)|01><01| is p*eps + (1-p)*eps^2
    p, eps = 0.8, 0.5
    alice = np.array([[np.sqrt(eps), 0.0], [0.0, 1.0]])
    bob = np.array([[1.0, 0.0], [0.0, np.sqrt(eps)]])
    k1 = np.kron(alice, bob)
    k0_fill = _completion_kraus(k1)
    branches = choi_of_kraus(
        [(1, k1)] + [(0, k) for k in k0_fill],
        4,
        in_layout=SubsystemLayout.of(("Ain", "Alice", 2), ("Bin", "Bob", 2)),
        out_layout=SubsystemLayout.of(("Aout", "Alice", 2), ("Bout", "Bob", 2)),
    )
    e01 = np.zeros((4, 4))
    e01[1, 1] = 1.0
    rho = DensityMatrix(p * max_entangled(2) + (1 - p) * e01, two_qubit_layout())
    br1 = next(b for b in branches if b.flag == 1)
    out = apply_via_choi(br1, rho)
    assert abs(out.trace() - 0.45) < 1e-12


def _completion_kraus(k1: np.ndarray) -> list[np.ndarray]:
    """Kraus operators completing k1 to a trace-preserving family."""
    d = k1.shape[1]
    gap = np.eye(d) - k1.conj().T @ k1
    w, v = np.linalg.eigh(gap)
    out = []
    for wi, vi in zip(w, v.T):
        if wi > 1e-12:
            out.append(np.sqrt(wi) * np.outer(vi, vi.conj()))
    return out


def test_choi_family_invariant_violation_detected():
    br = identity_branch()
    half = ChoiBranch(br.flag, StructuredOperator(br.matrix.matrix * 0.5, br.matrix.layout), br.in_labels)
    with pytest.raises(ValueError, match="marginals"):
        validate_choi_family([half])


# ---------------------------------------------------------------------------
# serialization


def test_json_round_trip(rng):
    layout = SubsystemLayout.of(("A1", "Alice", 2), ("F", "Flag", 2), ("B1", "Bob", 3))
    m = op(random_hermitian(rng, 12), layout)
    back = from_json(to_json(m))
    assert back.layout == m.layout
    assert np.array_equal(back.matrix, m.matrix)
    parsed = json.loads(to_json(m))
    assert set(parsed) == {"layout", "re", "im"}


def test_max_entangled_vec_normalised():
    for d in (2, 3, 4):
        v = max_entangled_vec(d)
        assert abs(v @ v - 1.0) < 1e-14
