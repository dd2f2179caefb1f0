import numpy as np
import pytest

from vpsim.lattice import LatticeProblem, brute_force_perturbation
from vpsim.modem import make_constellation, map_bits
from vpsim.precoding import (
    SingularChannelError,
    analytic_mse,
    form_transmit,
    mmse_precoder,
    perturbed_frame,
    robust_precoder,
    solve_perturbation,
    triangular_factor,
    zf_precoder,
)


def random_channel(rng, n_r=2, n_t=4):
    return (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / np.sqrt(2)


def random_symbols(rng, n=2, order=16):
    c = make_constellation(order)
    return map_bits(rng.integers(0, 2, size=n * c.bits_per_symbol), c)


def test_zf_identity_channel():
    ps = zf_precoder(np.eye(2, dtype=complex))
    assert np.allclose(ps.matrix, np.eye(2), atol=1e-12)
    assert ps.alpha == 0.0
    assert ps.scheme == "cvp"


def test_zf_is_right_inverse(rng):
    for _ in range(20):
        h = random_channel(rng)
        ps = zf_precoder(h)
        assert np.linalg.norm(h @ ps.matrix - np.eye(2)) < 1e-8


def test_zf_matches_pseudo_inverse(rng):
    # independent construction through the SVD-based pseudo-inverse
    for _ in range(20):
        h = random_channel(rng)
        assert np.linalg.norm(zf_precoder(h).matrix - np.linalg.pinv(h)) < 1e-8


def test_factor_inverts_the_gram_matrix(rng):
    for _ in range(20):
        h = random_channel(rng)
        for ps in (zf_precoder(h), mmse_precoder(h, 0.05), robust_precoder(h, 0.05, 0.02)):
            gram = h @ h.conj().T + ps.alpha * np.eye(2)
            residual = ps.factor.conj().T @ ps.factor @ gram - np.eye(2)
            assert np.linalg.norm(residual) < 1e-8 * 2


def test_singular_channel_rejected():
    row = np.array([1.0 + 0.5j, -0.3 + 0.2j, 0.7 - 1.0j, 0.1 + 0.9j])
    h = np.vstack([row, row])  # rank one
    with pytest.raises(SingularChannelError):
        zf_precoder(h)


def test_channel_shape_validation():
    with pytest.raises(ValueError):
        zf_precoder(np.ones((4, 2), dtype=complex))  # more users than antennas
    with pytest.raises(ValueError):
        zf_precoder(np.full((2, 4), np.nan, dtype=complex))


def test_mmse_scalar_value():
    ps = mmse_precoder(np.array([[1.0 + 0j]]), 1.0, n_users=1)
    assert ps.matrix[0, 0] == pytest.approx(0.5)
    assert ps.alpha == 1.0


def test_mmse_without_noise_is_zf(rng):
    h = random_channel(rng)
    zf, mmse = zf_precoder(h), mmse_precoder(h, 0.0)
    assert np.array_equal(zf.matrix, mmse.matrix)
    assert np.array_equal(zf.factor, mmse.factor)
    assert mmse.alpha == 0.0


def test_mmse_approaches_zf_monotonically(rng):
    for _ in range(10):
        h = random_channel(rng)
        zf = zf_precoder(h).matrix
        gaps = [
            np.linalg.norm(mmse_precoder(h, s).matrix - zf) for s in (1e-2, 1e-4, 1e-6)
        ]
        assert gaps[0] > gaps[1] > gaps[2]


def test_robust_reduces_to_mmse(rng):
    h = random_channel(rng)
    a = robust_precoder(h, 0.1, 0.0)
    b = mmse_precoder(h, 0.1)
    assert np.array_equal(a.matrix, b.matrix)
    assert a.alpha == b.alpha


def test_robust_effective_regularization(rng):
    h = random_channel(rng)
    assert robust_precoder(h, 0.0, 0.04).alpha == pytest.approx(2 * 0.04)
    # sigma_eff^2 = sigma_q^2 + sigma_n^2 (1 + sigma_q^2)
    assert robust_precoder(h, 0.1, 0.0398).alpha == pytest.approx(2 * 0.14378)


def test_rejects_negative_variances(rng):
    h = random_channel(rng)
    with pytest.raises(ValueError):
        mmse_precoder(h, -0.1)
    with pytest.raises(ValueError):
        robust_precoder(h, 0.1, -0.1)
    with pytest.raises(ValueError):
        mmse_precoder(h, 0.1, n_users=3)


def test_triangular_factor_identity_and_scalar():
    assert np.allclose(triangular_factor(np.eye(3, dtype=complex)), np.eye(3))
    assert triangular_factor(np.array([[4.0 + 0j]]))[0, 0] == pytest.approx(0.5)


def test_triangular_factor_quadratic_form(rng):
    for _ in range(20):
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        pd = a @ a.conj().T + 3 * np.eye(3)
        fac = triangular_factor(pd)
        s = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        direct = np.real(np.vdot(s, np.linalg.solve(pd, s)))
        via_factor = np.linalg.norm(fac @ s) ** 2
        assert via_factor == pytest.approx(direct, rel=1e-8)


def test_triangular_factor_rejects_bad_input():
    with pytest.raises(ValueError, match="Hermitian"):
        triangular_factor(np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex))
    with pytest.raises(ValueError, match="positive definite"):
        triangular_factor(np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex))


def test_solve_perturbation_identity_channel():
    ps = zf_precoder(np.eye(2, dtype=complex))
    u = np.array([1 + 1j, -3 + 3j])  # inside the 16QAM region, tau = 8
    sol = solve_perturbation(ps, u, 8.0)
    assert np.all(sol.perturbation == 0)


def test_solve_perturbation_never_worse_than_zero(rng):
    for _ in range(20):
        h = random_channel(rng)
        ps = mmse_precoder(h, 0.05)
        u = random_symbols(rng)
        sol = solve_perturbation(ps, u, 8.0)
        assert sol.metric <= np.linalg.norm(ps.factor @ u) ** 2 + 1e-12


def test_solve_perturbation_matches_oracle(rng):
    for _ in range(50):
        h = random_channel(rng)
        ps = zf_precoder(h)
        if np.linalg.cond(ps.factor) >= 100:
            continue
        u = random_symbols(rng)
        sol = solve_perturbation(ps, u, 8.0)
        ref = brute_force_perturbation(LatticeProblem(ps.factor, u, 8.0), 2)
        assert sol.metric == pytest.approx(ref.metric, rel=1e-9)


def test_cvp_metric_equals_transmit_power(rng):
    # for the ZF right inverse, ||L s||^2 = s^H (HH^H)^-1 s = ||P s||^2
    for _ in range(20):
        h = random_channel(rng)
        ps = zf_precoder(h)
        s = random_symbols(rng)
        assert np.linalg.norm(ps.factor @ s) ** 2 == pytest.approx(
            np.linalg.norm(ps.matrix @ s) ** 2, rel=1e-8
        )


def test_form_transmit_basic():
    ps = zf_precoder(np.eye(2, dtype=complex))
    beta, x = form_transmit(ps, np.array([3.0 + 0j, 4.0 + 0j]))
    assert beta == pytest.approx(5.0)
    assert np.allclose(x, [0.6, 0.8])


def test_form_transmit_unit_norm_and_homogeneity(rng):
    h = random_channel(rng)
    ps = mmse_precoder(h, 0.1)
    s = random_symbols(rng)
    beta, x = form_transmit(ps, s)
    assert abs(np.linalg.norm(x) - 1.0) < 1e-12
    beta3, x3 = form_transmit(ps, 3.0 * s)
    assert beta3 == pytest.approx(3.0 * beta, rel=1e-12)
    assert np.allclose(x3, x, atol=1e-12)


def test_form_transmit_rejects_zero():
    ps = zf_precoder(np.eye(2, dtype=complex))
    with pytest.raises(ValueError):
        form_transmit(ps, np.zeros(2, dtype=complex))


def test_perturbed_frame_consistency(rng):
    h = random_channel(rng)
    ps = robust_precoder(h, 0.01, 0.0398)
    u = random_symbols(rng)
    frame = perturbed_frame(ps, u, 8.0)
    assert np.array_equal(frame.perturbed, frame.data + frame.perturbation)
    assert frame.beta == pytest.approx(np.linalg.norm(ps.matrix @ frame.perturbed), rel=1e-12)
    assert abs(np.linalg.norm(frame.transmit) - 1.0) < 1e-12
    assert np.all(frame.perturbation.real % 8.0 == 0)
    assert np.all(frame.perturbation.imag % 8.0 == 0)


def test_analytic_mse_zero_forcing_noise_only(rng):
    h = random_channel(rng)
    ps = zf_precoder(h)
    frame = perturbed_frame(ps, random_symbols(rng), 8.0)
    # HP = I, so only the amplified-noise term survives
    expected = 2 * frame.beta**2 * 0.05
    assert analytic_mse(ps, h, frame.perturbed, frame.beta, 0.05) == pytest.approx(
        expected, rel=1e-6
    )


def test_analytic_mse_noiseless_is_residual_power(rng):
    h = random_channel(rng)
    ps = mmse_precoder(h, 0.1)
    frame = perturbed_frame(ps, random_symbols(rng), 8.0)
    expected = np.linalg.norm((h @ ps.matrix - np.eye(2)) @ frame.perturbed) ** 2
    assert analytic_mse(ps, h, frame.perturbed, frame.beta, 0.0) == pytest.approx(
        expected, rel=1e-12
    )


def test_analytic_mse_equals_quadratic_form(rng):
    # the closed form collapses to alpha * s^H (HH^H + alpha I)^-1 s, which is
    # exactly what the lattice metric minimizes (times the dropped constant)
    for _ in range(10):
        h = random_channel(rng)
        sigma_n2 = 0.05
        ps = mmse_precoder(h, sigma_n2)
        frame = perturbed_frame(ps, random_symbols(rng), 8.0)
        mse = analytic_mse(ps, h, frame.perturbed, frame.beta, sigma_n2)
        quad = ps.alpha * np.linalg.norm(ps.factor @ frame.perturbed) ** 2
        assert mse == pytest.approx(quad, rel=1e-8)


def test_mmse_design_never_loses_to_cvp(rng):
    # joint (precoder, perturbation) optimality under the error-free MSE
    sigma_n2 = 0.1
    for _ in range(50):
        h = random_channel(rng)
        u = random_symbols(rng)
        cvp = perturbed_frame(zf_precoder(h), u, 8.0)
        mmse_ps = mmse_precoder(h, sigma_n2)
        mmse = perturbed_frame(mmse_ps, u, 8.0)
        e_cvp = analytic_mse(zf_precoder(h), h, cvp.perturbed, cvp.beta, sigma_n2)
        e_mmse = analytic_mse(mmse_ps, h, mmse.perturbed, mmse.beta, sigma_n2)
        assert e_mmse <= e_cvp * (1 + 1e-9)


def test_reduction_chain_robust_to_mmse_to_zf(rng):
    h = random_channel(rng)
    zf = zf_precoder(h).matrix
    prev = np.inf
    for sigma in (1e-1, 1e-3, 1e-5):
        gap = np.linalg.norm(robust_precoder(h, sigma, sigma).matrix - zf)
        assert gap < prev
        prev = gap
