import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uscqed import hilbert
from uscqed.hilbert import LayoutError, SpaceLayout

layouts = st.builds(
    SpaceLayout,
    fock_cutoff=st.integers(2, 8),
    n_qubits=st.integers(0, 3),
    has_probe=st.booleans(),
)


def test_dims_put_resonator_first_and_probe_last():
    layout = SpaceLayout(5, 2, True)
    assert layout.dims == (5, 2, 2, 2)
    assert layout.total_dim == 40
    assert layout.probe_subsystem == 3
    assert layout.qubit_subsystem(1) == 2


def test_probe_index_requires_probe():
    with pytest.raises(LayoutError):
        SpaceLayout(5, 1).probe_subsystem


@pytest.mark.parametrize("bad", [1, 0, -3])
def test_cutoff_must_hold_two_levels(bad):
    with pytest.raises(LayoutError):
        SpaceLayout(bad)


def test_embed_matches_explicit_kron():
    layout = SpaceLayout(3, 2)
    op = np.array([[1, 2], [3, 4]], dtype=complex)
    expected = np.kron(np.kron(np.eye(3), op), np.eye(2))
    assert np.array_equal(hilbert.embed(layout, 1, op), expected)


def test_embed_rejects_wrong_shape():
    with pytest.raises(LayoutError):
        hilbert.embed(SpaceLayout(3, 1), 1, np.eye(3))


@given(layouts)
def test_field_quadrature_is_hermitian_and_number_diagonal(layout):
    x = hilbert.field_quadrature(layout)
    assert np.allclose(x, x.conj().T)
    n = hilbert.number(layout)
    assert np.allclose(n, np.diag(np.diag(n)))


@given(st.integers(2, 12))
def test_ladder_commutator_is_identity_below_cutoff(n):
    a = hilbert.destroy_local(n)
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(n)
    expected[-1, -1] = 1 - n  # truncation artefact in the top level
    assert np.allclose(comm, expected)


@given(layouts)
def test_parity_squares_to_one_and_flips_field(layout):
    p = hilbert.parity_operator(layout)
    assert np.allclose(p @ p, np.eye(layout.total_dim))
    x = hilbert.field_quadrature(layout)
    assert np.allclose(p @ x @ p, -x)
    for i in range(layout.n_two_level):
        sx = hilbert.pauli(layout, i, "x")
        sz = hilbert.pauli(layout, i, "z")
        assert np.allclose(p @ sx @ p, -sx)
        assert np.allclose(p @ sz @ p, sz)


def test_ground_of_qubit_has_sigma_z_minus_one():
    layout = SpaceLayout(2, 1)
    sz = hilbert.pauli(layout, 0, "z")
    assert sz[0, 0].real == -1.0
    assert hilbert.excited_projector(layout, 0)[0, 0] == 0
