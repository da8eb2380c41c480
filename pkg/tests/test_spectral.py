import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal

from kglab.geometry import make_model, trapezoid_weights
from kglab.spectral import (SpectralError, SpectralResonance, SpectralTable,
                            TransformValidityError, band_filter, build_partition,
                            cached_table, count_bound_states, phi, phi0,
                            solve_eigenfunctions, uniform_lambda_grid)
import kglab.spectral as spectral

from conftest import gaussian


def test_partition_of_unity():
    part = build_partition(-3, 6)
    lam = part.samples
    assert lam.size == 10_000
    assert np.max(np.abs(part.total(lam) - 1.0)) <= 1e-12


def test_partition_examples():
    part = build_partition(0, 4)
    assert part.total(np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-12)
    assert phi0(np.array([0.3]))[0] == 1.0
    assert phi(np.array([3.0]))[0] == 0.0


def test_phi_support_and_range():
    lam = np.linspace(0.0, 5.0, 50001)
    v = phi(lam)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(v[(lam <= 0.5) | (lam >= 2.0)] == 0.0)


def test_low_tail_is_sum_of_lower_bands():
    lam = np.logspace(-3, 0.5, 2000)
    tail = sum(phi(lam * 2.0**j) for j in range(1, 40))
    assert np.max(np.abs(tail - phi0(lam))) < 1e-12


def test_partition_band_out_of_range():
    part = build_partition(0, 2)
    with pytest.raises(SpectralError):
        part.band(3, np.ones(3))
    with pytest.raises(SpectralError):
        build_partition(1, 3)


def test_free_eigenfunctions_are_sines(free_model):
    lam = np.array([0.5, 1.0, 7.25])
    table = solve_eigenfunctions(free_model, lam)
    assert np.max(np.abs(table.e - np.sin(np.outer(lam, free_model.r)))) <= 1e-8
    assert np.all(table.delta == 0)


def test_regular_solution_against_scipy(bump_model):
    lam = np.array([0.7, 3.0, 11.0])
    table = solve_eigenfunctions(bump_model, lam)
    for i, k in enumerate(lam):
        sol = solve_ivp(lambda r, y: [y[1], (bump_model.potential(np.array([r]))[0] - k * k) * y[0]],
                        (0, 4.0), [0.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-12,
                        t_eval=bump_model.r[bump_model.r <= 4.0])
        ref = sol.y[0] / table.amplitude[i]
        assert np.max(np.abs(ref - table.e[i, : ref.size])) < 1e-7


def _dense_phase_shifts(V, h, kappa_max=1.0):
    """Phase shifts from eigenvectors of the 3-point discretization of H."""
    n = V.size - 2
    r = np.arange(1, n + 1) * h
    diag = 2.0 / h**2 + V[1:-1]
    off = np.full(n - 1, -1.0 / h**2)
    w, vec = eigh_tridiagonal(diag, off, select="v", select_range=(0.0, kappa_max**2))
    kappa = (2.0 / h) * np.arcsin(np.sqrt(w) * h / 2.0)
    far = r > 4.0
    out = []
    for j, k in enumerate(kappa):
        A = np.column_stack([np.sin(k * r[far]), np.cos(k * r[far])])
        (alpha, beta), *_ = np.linalg.lstsq(A, vec[far, j], rcond=None)
        out.append(math.atan2(beta, alpha))
    return kappa, np.array(out)


def test_phase_shifts_match_dense_eigensolver():
    model = make_model("perturbed_conic", (0.1, 1.0, 3.0), 3, 60.0, 0.01)
    kappa, dense = _dense_phase_shifts(model.V, model.dr)
    table = solve_eigenfunctions(model, kappa)
    diff = np.angle(np.exp(1j * (table.delta - dense)) ** 2) / 2  # modulo pi
    assert kappa.size > 10
    assert np.max(np.abs(diff)) <= 1e-4


def test_completeness_round_trip_free(free_model, free_table):
    f = gaussian(free_model, 0.0, 1.0)
    back = free_table.inverse(free_table.forward(f))
    w = free_model.phi**2 * trapezoid_weights(free_model.size, free_model.dr)
    rel = math.sqrt(np.sum(w * (back - f) ** 2) / np.sum(w * f**2))
    assert rel <= 1e-6


def test_completeness_round_trip_bump(bump_model, bump_table):
    f = gaussian(bump_model, 2.0, 1.0)
    back = bump_table.inverse(bump_table.forward(f))
    w = bump_model.phi**2 * trapezoid_weights(bump_model.size, bump_model.dr)
    rel = math.sqrt(np.sum(w * (back - f) ** 2) / np.sum(w * f**2))
    assert rel <= 1e-6


@pytest.mark.parametrize("fixture,tol", [("free", 1e-6), ("bump", 1e-4)])
def test_parseval(request, fixture, tol):
    model = request.getfixturevalue(f"{fixture}_model")
    table = request.getfixturevalue(f"{fixture}_table")
    f = gaussian(model, 3.0, 1.0)
    w = model.phi**2 * trapezoid_weights(model.size, model.dr)
    l2 = math.sqrt(np.sum(w * f**2))
    assert table.l2_spectral(table.forward(f)) == pytest.approx(l2, rel=tol)


def test_kernel_symmetry(bump_table):
    for i in (0, 17, 100):
        assert bump_table.kernel(i, 12, 345) == bump_table.kernel(i, 345, 12)


def test_reduced_kernel_amplitudes_bounded(free_table):
    """(2/pi) sin(lr) sin(lr') splits into e^{+-il(r-r')}, e^{+-il(r+r')} terms
    with coefficients of modulus 1/(2 pi) each."""
    lam = free_table.lam[::50]
    r, rp = 3.7, 1.2
    k = (2 / math.pi) * np.sin(lam * r) * np.sin(lam * rp)
    parts = [np.exp(1j * lam * (r - rp)), np.exp(-1j * lam * (r - rp)),
             -np.exp(1j * lam * (r + rp)), -np.exp(-1j * lam * (r + rp))]
    coef = 1 / (2 * math.pi)
    assert np.allclose(coef * sum(parts), k, atol=1e-14)
    assert coef <= 1.0


def test_band_filter_partition_sum(free_model, free_table, partition):
    f = gaussian(free_model, 0.0, 0.7)
    total = sum(band_filter(f, k, free_table, partition) for k in partition.bands)
    back = free_table.inverse(free_table.forward(f))
    assert np.max(np.abs(total - back)) <= 1e-6 * np.max(np.abs(f))


def test_band_filter_single_mode(free_table, partition):
    """A narrow packet around lam0 = 1.3 is multiplied by about phi(1.3)."""
    lam = free_table.lam
    F = np.exp(-(((lam - 1.3) / 0.3) ** 2))
    f = free_table.inverse(F)
    out = band_filter(f, 0, free_table, partition)
    exact = free_table.inverse(phi(lam) * F)
    assert np.max(np.abs(out - exact)) <= 1e-6 * np.max(np.abs(f))
    ratio = free_table.l2_spectral(free_table.forward(out)) / free_table.l2_spectral(F)
    # packet width 0.3 smears phi around 1.3
    assert ratio == pytest.approx(phi(np.array([1.3]))[0], abs=0.06)


def test_band_filter_zero(free_model, free_table, partition):
    assert np.all(band_filter(np.zeros(free_model.size), 2, free_table, partition) == 0)
    with pytest.raises(SpectralError):
        band_filter(np.zeros(free_model.size), 9, free_table, partition)


def test_grid_validation(free_model):
    with pytest.raises(SpectralError):
        solve_eigenfunctions(free_model, np.array([0.0, 1.0]))
    with pytest.raises(SpectralError):
        solve_eigenfunctions(free_model, np.array([2.0, 1.0]))
    with pytest.raises(SpectralError):
        solve_eigenfunctions(free_model, np.array([1.0, 200.0]))


def test_resonance_reported(monkeypatch, bump_model):
    monkeypatch.setattr(spectral, "RESONANCE_TOL", 1e6)
    with pytest.raises(SpectralResonance, match="spectral resonance"):
        solve_eigenfunctions(bump_model, np.array([1.0]))


def test_check_time(free_table):
    free_table.check_time(40.0)
    with pytest.raises(TransformValidityError) as exc:
        free_table.check_time(1000.0)
    assert exc.value.required_n_lambda > free_table.lam.size


def test_save_load_bit_exact(tmp_path, bump_model):
    table = solve_eigenfunctions(bump_model, uniform_lambda_grid(bump_model, 4.0))
    path = tmp_path / "t.npz"
    table.save(path)
    back = SpectralTable.load(path)
    for name in ("lam", "e", "delta", "amplitude", "weights"):
        assert np.array_equal(getattr(back, name), getattr(table, name))
    assert back.model.key() == table.model.key()


def test_cache_reuses_file(tmp_path, bump_model):
    lam = uniform_lambda_grid(bump_model, 2.0)
    a = cached_table(bump_model, lam, tmp_path)
    assert len(list(tmp_path.iterdir())) == 1
    b = cached_table(bump_model, lam, tmp_path)
    assert np.array_equal(a.e, b.e)


def test_no_bound_states(bump_model):
    assert count_bound_states(bump_model) == 0
