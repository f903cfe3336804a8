import numpy as np
import pytest

from sparsetrack.channel import ModelParams, ParameterError
from sparsetrack.measurement import (
    MeasurementSystem,
    equivalent_noise_sigma,
    gen_matrix,
    load_matrix,
    measure,
    save_matrix,
)

from conftest import crandn

P = ModelParams(N=400, M=200)


def test_gaussian_entry_power(rng):
    sys = gen_matrix(P, rng)
    assert sys.phi.shape == (200, 400)
    assert 0.99 <= np.mean(np.abs(sys.phi) ** 2) <= 1.01
    assert abs(sys.phi.mean()) < 0.02


def test_zero_sigma_gives_zero_matrix(rng):
    assert not gen_matrix(P.replace(sigma_phi=0.0), rng).phi.any()


def test_columns_semi_orthogonal(rng):
    sys = gen_matrix(P, rng)
    i = rng.integers(0, 400, 2000)
    j = rng.integers(0, 400, 2000)
    keep = i != j
    inner = np.abs(np.sum(sys.phi[:, i[keep]].conj() * sys.phi[:, j[keep]], axis=0))
    assert np.mean(inner / 200 < 0.25) >= 0.99


def test_toeplitz_layout(rng):
    p = ModelParams(N=12, M=5, sigma_phi=1.0)
    sys = gen_matrix(p, rng, kind="toeplitz")
    c = sys.training
    assert c.shape == (12,)
    for i in range(5):
        for j in range(12):
            assert sys.phi[i, j] == c[(i - j) % 12]
    # each column is a cyclic window of c
    np.testing.assert_array_equal(sys.phi[:, 3], np.roll(c, 3)[:5])


def test_unknown_kind(rng):
    with pytest.raises(ParameterError):
        gen_matrix(P, rng, kind="hadamard")


def test_system_is_read_only(rng):
    sys = gen_matrix(ModelParams(N=8, M=4), rng)
    with pytest.raises(ValueError):
        sys.phi[0, 0] = 1.0


def test_measure_noiseless(rng):
    sys = gen_matrix(ModelParams(N=40, M=20), rng)
    h = crandn(rng, 40)
    np.testing.assert_allclose(measure(sys, h, 0.0).y, sys.phi @ h, rtol=0, atol=1e-13)
    assert not measure(sys, np.zeros(40), 0.0).y.any()


def test_measure_noise_power(rng):
    sys = gen_matrix(ModelParams(N=40, M=20), rng)
    y = measure(sys, np.zeros((5000, 40)), 0.05, rng).y
    assert y.size == 100_000
    assert np.mean(np.abs(y) ** 2) == pytest.approx(0.0025, rel=0.05)


def test_measure_dimension_mismatch(rng):
    sys = gen_matrix(ModelParams(N=40, M=20), rng)
    with pytest.raises(ParameterError):
        measure(sys, np.zeros(39), 0.0)


def test_measure_linear(rng):
    sys = gen_matrix(ModelParams(N=40, M=20), rng)
    h1, h2 = crandn(rng, 40), crandn(rng, 40)
    lhs = measure(sys, h1 + h2, 0.0).y
    rhs = measure(sys, h1, 0.0).y + measure(sys, h2, 0.0).y
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_equivalent_noise_value():
    # 0.05 * sqrt(200) / 400
    assert equivalent_noise_sigma(200, 400, 0.05, 1.0) == pytest.approx(0.00176776695, abs=1e-11)
    assert equivalent_noise_sigma(200, 400, 0.0, 1.0) == 0.0
    with pytest.raises(ParameterError):
        equivalent_noise_sigma(200, 400, 0.05, 0.0)
    with pytest.raises(ParameterError):
        equivalent_noise_sigma(200, 0, 0.05, 1.0)


@pytest.mark.slow
def test_equivalent_noise_finite_size(rng):
    # Brute-force pseudo-inverse on fresh draws. The inverse complex Wishart
    # mean E[(phi phi^H)^-1] = I / ((N - M) sigma_phi^2) gives a per-entry
    # std of sigma_n sqrt(M / (N (N - M))) / sigma_phi, a factor
    # sqrt(N / (N - M)) above the large-N approximation.
    # The approximation itself is checked in test_acceptance.
    samples = []
    for _ in range(1000):
        sys = gen_matrix(P, rng)
        n = 0.05 * crandn(rng, 200)
        z = np.linalg.solve(sys.phi @ sys.phi.conj().T, n)
        samples.append(sys.phi[:, 0].conj() @ z)
    std = np.sqrt(np.mean(np.abs(samples) ** 2))
    assert std == pytest.approx(0.05 * np.sqrt(200 / (400 * 200)), rel=0.10)
    approx = equivalent_noise_sigma(200, 400, 0.05, 1.0)
    assert std / approx == pytest.approx(np.sqrt(2), rel=0.10)


def test_matched_filter_noise_matches_approximation(rng):
    # with phi phi^H replaced by N sigma_phi^2 I the formula is exact
    sys = gen_matrix(P, rng)
    n = 0.05 * crandn(rng, 200, 2000)
    z = sys.phi.conj().T @ n / 400
    assert np.sqrt(np.mean(np.abs(z) ** 2)) == pytest.approx(equivalent_noise_sigma(200, 400, 0.05, 1.0), rel=0.02)


@pytest.mark.parametrize("kind", ["gaussian", "toeplitz"])
def test_matrix_file_roundtrip(tmp_path, rng, kind):
    sys = gen_matrix(ModelParams(N=9, M=4), rng, kind=kind)
    path = tmp_path / "phi.sptk"
    save_matrix(path, sys)
    raw = path.read_bytes()
    assert raw[:4] == b"SPTK"
    assert int.from_bytes(raw[4:8], "little") == 4
    assert int.from_bytes(raw[8:12], "little") == 9
    assert raw[12] == (0 if kind == "gaussian" else 1)
    assert len(raw) == 13 + 16 * 36
    first = np.frombuffer(raw[13:29], dtype="<f8")
    assert first[0] == sys.phi[0, 0].real and first[1] == sys.phi[0, 0].imag
    back = load_matrix(path)
    assert back.kind == kind
    np.testing.assert_array_equal(back.phi, sys.phi)


def test_matrix_file_errors(tmp_path):
    bad = tmp_path / "bad.sptk"
    bad.write_bytes(b"NOPE" + bytes(9))
    with pytest.raises(ValueError, match="magic"):
        load_matrix(bad)
    sys = MeasurementSystem(np.eye(2, 3))
    path = tmp_path / "short.sptk"
    save_matrix(path, sys)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(ValueError, match="bytes"):
        load_matrix(path)
