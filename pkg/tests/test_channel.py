import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_otfs.channel import (
    FractionalTapError, LinkChannel, MimoChannel, PathTap, SparseChannelMatrix, apply_channel, build_H_link,
    build_H_mimo, effective_gain, fixed_mimo_channel, gen_random_mimo_channel, read_profile_file,
    taps_from_profile,
)
from mimo_otfs.core import (
    REFERENCE_DELAYS_US, REFERENCE_DOPPLERS_HZ, DdGrid, GridDims, stream_rng, unvectorize, vectorize,
)
from mimo_otfs.transforms import oracle_apply, tf_channel_gains

D32 = GridDims(32, 32, 15e3)
REF = ((1, 0), (2, 1), (3, 2), (4, 3), (5, 4))


def dense_from_oracle(taps, dims):
    """Probe oracle_apply with basis vectors to build the matrix column by column."""
    cols = []
    for j in range(dims.size):
        e = np.zeros(dims.size, complex)
        e[j] = 1
        cols.append(vectorize(oracle_apply(unvectorize(e, dims), taps)))
    return np.array(cols).T


def test_reference_profile_maps_to_integer_taps():
    taps = taps_from_profile(np.array(REFERENCE_DELAYS_US) * 1e-6, REFERENCE_DOPPLERS_HZ, None, D32)
    assert [t.alpha for t in taps] == [1, 2, 3, 4, 5]
    assert [t.beta for t in taps] == [0, 1, 2, 3, 4]


def test_zero_delay_zero_doppler():
    (t,) = taps_from_profile([0.0], [0.0], None, D32)
    assert (t.alpha, t.beta) == (0, 0)


def test_half_tap_delay_rejected():
    with pytest.raises(FractionalTapError):
        taps_from_profile([1.04e-6], [0.0], None, D32)


def test_profile_outside_span_rejected():
    with pytest.raises(FractionalTapError):
        taps_from_profile([0.0], [32 * 468.75], None, D32)


def test_random_channel_unit_power():
    rng = stream_rng(3, "lln")
    total = [sum(abs(t.gain) ** 2 for t in gen_random_mimo_channel(rng, REF, 1).links[0][0].taps)
             for _ in range(10_000)]
    assert 0.97 <= np.mean(total) <= 1.03


def test_random_channel_support_and_seeds():
    a = gen_random_mimo_channel(stream_rng(1, "c"), REF, 2)
    b = gen_random_mimo_channel(stream_rng(2, "c"), REF, 2)
    for q in range(2):
        for p in range(2):
            assert len(a.links[q][p].taps) == 5
            assert a.links[q][p].support == REF
    assert a.links[0][0].taps[0].gain != b.links[0][0].taps[0].gain
    # each link gets its own gains
    assert a.links[0][0].taps[0].gain != a.links[1][0].taps[0].gain


def test_mimo_channel_requires_common_support():
    l1 = LinkChannel((PathTap(0, 0, 1),))
    l2 = LinkChannel((PathTap(1, 0, 1),))
    with pytest.raises(ValueError):
        MimoChannel(2, ((l1, l1), (l1, l2)))


def test_effective_gain_examples():
    assert effective_gain(PathTap(0, 3, 2 + 1j), GridDims(4, 4)) == 2 + 1j
    assert effective_gain(PathTap(1, 1, 1), GridDims(2, 2)) == pytest.approx(-1j)
    g = effective_gain(PathTap(5, 4, 1), D32)
    assert g == pytest.approx(np.exp(-2j * np.pi * 20 / 1024))
    assert g == pytest.approx(tf_channel_gains([PathTap(5, 4, 1)], D32).data[0, 0])


def test_single_tap_identity_and_permutation():
    d = GridDims(2, 2)
    np.testing.assert_array_equal(build_H_link(LinkChannel((PathTap(0, 0, 1),)), d).to_dense(), np.eye(4))
    perm = [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]]
    np.testing.assert_array_equal(build_H_link(LinkChannel((PathTap(1, 0, 1),)), d).to_dense(), perm)


def test_duplicate_taps_rejected():
    with pytest.raises(ValueError):
        LinkChannel((PathTap(1, 1, 1), PathTap(1, 1, 2)))
    with pytest.raises(ValueError):
        SparseChannelMatrix.from_entries(2, [0, 0], [1, 1], [1, 1])


def test_reference_profile_degrees():
    ch = gen_random_mimo_channel(stream_rng(0, "c"), REF, 2)
    H1 = build_H_link(ch.links[0][0], D32)
    assert set(H1.row_degrees()) == {5} and set(H1.col_degrees()) == {5}
    H = build_H_mimo(ch, D32)
    assert H.dim == 2048
    assert set(H.row_degrees()) == {10} and set(H.col_degrees()) == {10}


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([2, 3, 4, 6]), st.sampled_from([2, 4, 5]), st.integers(0, 2**32 - 1))
def test_matrix_matches_oracle_probe(N, M, seed):
    rng = np.random.default_rng(seed)
    d = GridDims(N, M)
    P = int(rng.integers(1, min(4, N * M) + 1))
    cells = rng.choice(N * M, P, replace=False)
    taps = [PathTap(int(c // N), int(c % N), complex(*rng.standard_normal(2))) for c in cells]
    H = build_H_link(LinkChannel(tuple(taps)), d)
    assert np.max(np.abs(H.to_dense() - dense_from_oracle(taps, d))) < 1e-12
    assert set(H.row_degrees()) == {P} and set(H.col_degrees()) == {P}


def test_mimo_degenerate_and_all_identity():
    d = GridDims(4, 4)
    ch = gen_random_mimo_channel(stream_rng(4, "c"), ((0, 1), (2, 3)), 1)
    np.testing.assert_array_equal(build_H_mimo(ch, d).to_dense(), build_H_link(ch.links[0][0], d).to_dense())
    ident = LinkChannel((PathTap(0, 0, 1),))
    H = build_H_mimo(MimoChannel(2, ((ident, ident), (ident, ident))), d)
    x = np.random.default_rng(0).standard_normal(32) + 0j
    y = apply_channel(H, x, 0.0)
    np.testing.assert_allclose(y[:16], x[:16] + x[16:])
    np.testing.assert_allclose(y[16:], x[:16] + x[16:])


def test_mimo_block_layout():
    # block (q, p) carries the tx p -> rx q link
    d = GridDims(2, 2)
    links = [[LinkChannel((PathTap(0, 0, 10 * q + p + 1),)) for p in range(2)] for q in range(2)]
    H = build_H_mimo(MimoChannel(2, links), d).to_dense()
    for q in range(2):
        for p in range(2):
            np.testing.assert_array_equal(H[4 * q:4 * q + 4, 4 * p:4 * p + 4], (10 * q + p + 1) * np.eye(4))


def test_apply_channel_noiseless():
    d = GridDims(4, 4)
    rng = np.random.default_rng(7)
    x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    np.testing.assert_array_equal(apply_channel(build_H_link(LinkChannel((PathTap(0, 0, 1),)), d), x, 0), x)
    H = build_H_link(LinkChannel((PathTap(1, 2, 0.3 - 1j), PathTap(3, 0, 0.5j))), d)
    assert np.max(np.abs(apply_channel(H, x, 0) - H.to_dense() @ x)) < 1e-12


def test_apply_channel_noise_variance():
    d = GridDims(100_000, 1)
    H = build_H_link(LinkChannel((PathTap(0, 0, 1),)), d)
    y = apply_channel(H, np.zeros(d.size), 1.0, np.random.default_rng(8))
    assert 0.99 <= np.mean(np.abs(y) ** 2) <= 1.01


def test_apply_channel_errors():
    H = build_H_link(LinkChannel((PathTap(0, 0, 1),)), GridDims(2, 2))
    with pytest.raises(ValueError):
        apply_channel(H, np.zeros(3), 0)
    with pytest.raises(ValueError):
        apply_channel(H, np.zeros(4), 1.0)


def test_profile_file_with_overrides(tmp_path):
    d = GridDims(8, 8, 15e3)  # one tap = 1/120 kHz, one Doppler bin = 1875 Hz
    path = tmp_path / "p.csv"
    path.write_text("# test profile\ndelay_us,doppler_hz,rx,tx,gain_re,gain_im\n"
                    "0,0,,,1,0\n8.3333333,1875,0,1,0,0.5\n")
    profile, overrides = read_profile_file(path, d)
    assert profile == ((0, 0), (1, 1))
    ch = fixed_mimo_channel(profile, 2, overrides)
    assert ch.links[0][1].taps[1].gain == 0.5j
    assert ch.links[1][1].taps[1].gain == 0
    assert all(ch.links[q][p].taps[0].gain == 1 for q in range(2) for p in range(2))


def test_profile_file_needs_columns(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_profile_file(path, D32)


def test_grid_type_is_accepted_by_oracle():
    d = GridDims(2, 2)
    x = DdGrid(d, [[1, 2], [3, 4]])
    y = oracle_apply(x, [PathTap(1, 0, 1)])
    np.testing.assert_allclose(y.data, [[2, 1], [4, 3]], atol=1e-12)
