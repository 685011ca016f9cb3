"""Matrix-product-state construction, expansion and reduction tests."""

import numpy as np
import pytest

from mpslearn import errors, linalg, mps


def expand_by_matrix_products(state):
    """Independent expansion: amplitude = trace of the per-site matrix chain."""
    n, d = state.n, state.d
    out = np.zeros(d**n, dtype=complex)
    for flat in range(d**n):
        digits = np.unravel_index(flat, (d,) * n)
        chain = state.tensors[0][digits[0]]
        for k in range(1, n):
            chain = chain @ state.tensors[k][digits[k]]
        out[flat] = np.trace(chain)
    return out


def rdm_by_amplitude_sums(psi, dims, block):
    """Independent block RDM: contract the environment legs directly."""
    n = len(dims)
    tensor = psi.reshape(dims)
    order = list(block) + [k for k in range(n) if k not in block]
    moved = np.transpose(tensor, order)
    block_dim = int(np.prod([dims[k] for k in block]))
    mat = moved.reshape(block_dim, -1)
    return mat @ mat.conj().T


@pytest.mark.parametrize("boundary", ["open", "periodic"])
def test_expand_matches_matrix_product_oracle(boundary):
    rng = np.random.default_rng(0)
    for trial in range(8):
        n = int(rng.integers(2, 6))
        d = int(rng.integers(2, 4))
        state = mps.random_mps(
            mps.StateSpec(n=n, d=d, D=2, boundary=boundary, seed=trial)
        )
        np.testing.assert_allclose(
            mps.expand(state), expand_by_matrix_products(state), atol=1e-12
        )


def test_expand_is_big_endian():
    # |0 0 1> must land at flat index 1 (site 1 is the most significant digit).
    tensors = [np.zeros((2, 1, 1), dtype=complex) for _ in range(3)]
    tensors[0][0] = 1.0
    tensors[1][0] = 1.0
    tensors[2][1] = 1.0
    state = mps.MatrixProductState(n=3, d=2, boundary="open", tensors=tensors)
    psi = mps.expand(state)
    assert psi[1] == 1.0
    assert np.count_nonzero(psi) == 1


def test_random_mps_is_normalized_with_capped_bonds():
    for boundary in ("open", "periodic"):
        spec = mps.StateSpec(n=7, d=2, D=3, boundary=boundary, seed=5)
        state = mps.random_mps(spec)
        assert abs(np.linalg.norm(mps.expand(state)) - 1.0) < 1e-12
        for t in state.tensors:
            assert t.shape[0] == 2
            assert t.shape[1] <= 3 if boundary == "open" else t.shape[1] == 3


def test_ghz_expansion():
    state = mps.random_mps(mps.StateSpec(n=4, d=2, D=2, kind="ghz"))
    psi = mps.expand(state)
    expected = np.zeros(16, dtype=complex)
    expected[0] = expected[-1] = 1 / np.sqrt(2)
    np.testing.assert_allclose(psi, expected, atol=1e-12)

    qutrit = mps.random_mps(mps.StateSpec(n=3, d=3, D=3, kind="ghz"))
    psi3 = mps.expand(qutrit)
    expected3 = np.zeros(27, dtype=complex)
    for i in range(3):
        expected3[i * 9 + i * 3 + i] = 1 / np.sqrt(3)
    np.testing.assert_allclose(psi3, expected3, atol=1e-12)


def test_w_state_expansion():
    state = mps.random_mps(mps.StateSpec(n=4, d=2, D=2, kind="w-state"))
    psi = mps.expand(state)
    expected = np.zeros(16, dtype=complex)
    for k in range(4):
        expected[2 ** (3 - k)] = 0.5
    np.testing.assert_allclose(psi, expected, atol=1e-12)


def test_product_state_has_unit_bonds_and_factorizes():
    state = mps.random_mps(mps.StateSpec(n=5, d=2, D=1, kind="product", seed=9))
    psi = mps.expand(state)
    assert all(t.shape[1] == t.shape[2] == 1 for t in state.tensors)
    for cut in range(1, 5):
        assert mps.schmidt_rank(psi, cut, dims=(2,) * 5) == 1


def test_block_rdm_matches_amplitude_oracle():
    rng = np.random.default_rng(21)
    for boundary in ("open", "periodic"):
        for trial in range(5):
            n = int(rng.integers(3, 7))
            state = mps.random_mps(
                mps.StateSpec(n=n, d=2, D=2, boundary=boundary, seed=100 + trial)
            )
            psi = mps.expand(state)
            dims = (2,) * n
            start = int(rng.integers(0, n - 1))
            stop = int(rng.integers(start + 1, n))
            block = list(range(start, stop + 1))
            got = mps.block_rdm(psi, dims, block)
            np.testing.assert_allclose(
                got, rdm_by_amplitude_sums(psi, dims, block), atol=1e-12
            )


def test_block_rdm_accepts_density_input():
    state = mps.random_mps(mps.StateSpec(n=4, d=2, D=2, seed=2))
    psi = mps.expand(state)
    rho = np.outer(psi, psi.conj())
    dims = (2,) * 4
    np.testing.assert_allclose(
        mps.block_rdm(rho, dims, [1, 2]),
        mps.block_rdm(psi, dims, [1, 2]),
        atol=1e-12,
    )


def test_block_rdm_handles_gapped_blocks_like_partial_trace():
    state = mps.random_mps(mps.StateSpec(n=4, d=2, D=2, seed=6))
    psi = mps.expand(state)
    rho = np.outer(psi, psi.conj())
    np.testing.assert_allclose(
        mps.block_rdm(psi, (2,) * 4, [0, 2]),
        linalg.partial_trace(rho, (2,) * 4, [0, 2]),
        atol=1e-12,
    )


def test_schmidt_rank_tracks_bond_profile():
    state = mps.random_mps(mps.StateSpec(n=6, d=2, D=3, boundary="open", seed=4))
    psi = mps.expand(state)
    for cut in range(1, 6):
        expected = min(3, 2**cut, 2 ** (6 - cut))
        assert mps.schmidt_rank(psi, cut, dims=(2,) * 6) == expected


def test_periodic_schmidt_rank_bounded_by_bond_squared():
    state = mps.random_mps(mps.StateSpec(n=6, d=2, D=2, boundary="periodic", seed=8))
    psi = mps.expand(state)
    for cut in range(1, 6):
        assert mps.schmidt_rank(psi, cut, dims=(2,) * 6) <= 4


def test_contiguous_block_rank_capped_by_bond_squared():
    rng = np.random.default_rng(33)
    for boundary in ("open", "periodic"):
        for trial in range(4):
            D = int(rng.integers(2, 4))
            state = mps.random_mps(
                mps.StateSpec(n=8, d=2, D=D, boundary=boundary, seed=200 + trial)
            )
            psi = mps.expand(state)
            dims = (2,) * 8
            for start in range(8):
                for stop in range(start, 8):
                    rdm = mps.block_rdm(psi, dims, range(start, stop + 1))
                    assert linalg.numerical_rank(rdm, tol=1e-10) <= D * D


def test_mps_parameter_count():
    assert mps.mps_parameter_count(4, 2, 1) == 4 * 2
    open_profile = mps.mps_parameter_count(6, 2, 3, boundary="open")
    periodic = mps.mps_parameter_count(6, 2, 3, boundary="periodic")
    assert periodic == 6 * 2 * 9
    assert open_profile < periodic


def test_save_load_round_trip(tmp_path):
    state = mps.random_mps(mps.StateSpec(n=5, d=2, D=2, seed=12))
    path = tmp_path / "state.json"
    mps.save_mps(state, path)
    loaded = mps.load_mps(path)
    assert loaded.n == state.n and loaded.d == state.d
    for a, b in zip(loaded.tensors, state.tensors):
        np.testing.assert_array_equal(a, b)
    first = path.read_bytes()
    mps.save_mps(loaded, path)
    assert path.read_bytes() == first


def test_load_rejects_foreign_documents(tmp_path):
    path = tmp_path / "bogus.json"
    path.write_text('{"format":"something-else","version":1}\n')
    with pytest.raises(errors.InvalidSpec):
        mps.load_mps(path)


def test_spec_validation():
    with pytest.raises(errors.InvalidSpec):
        mps.StateSpec(n=0, d=2, D=2)
    with pytest.raises(errors.InvalidSpec):
        mps.StateSpec(n=3, d=2, D=2, boundary="twisted")
    with pytest.raises(errors.InvalidSpec):
        mps.StateSpec(n=3, d=2, D=3, kind="ghz")
