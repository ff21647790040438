import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alphamhd.burgers import (
    Burgers1DState, burgers_alpha_max_dt, characteristics_solution, entropy_reference,
    godunov_flux, l1_distance, riemann_ic, run_burgers_alpha, run_burgers_viscous, shock_position,
    sine_ic, smoothed_velocity, step_burgers_alpha, step_burgers_viscous,
)

T_POST_SHOCK = 1.5 / np.pi


def smooth_profile(seed, n=256):
    rng = np.random.default_rng(seed)
    x = 2.0 * np.arange(n) / n
    v = sum(rng.normal() / k * np.sin(np.pi * k * x + rng.uniform(0, 2 * np.pi)) for k in range(1, 5))
    return Burgers1DState(0.0, v)


class TestState:
    def test_validation(self):
        with pytest.raises(ValueError):
            Burgers1DState(0.0, np.zeros(8))
        with pytest.raises(FloatingPointError, match="blow-up"):
            Burgers1DState(0.0, np.full(32, np.nan))

    def test_sine_ic(self):
        s = sine_ic(64)
        assert s.dx == pytest.approx(2 / 64)
        assert s.mass() == pytest.approx(0.0, abs=1e-14)
        assert s.energy() == pytest.approx(0.5, rel=1e-12)  # (1/2) * int_0^2 sin^2(pi x) dx


class TestBurgersAlpha:
    def test_constant_state_is_steady(self):
        s = Burgers1DState(0.0, np.full(64, 0.7))
        out = run_burgers_alpha(s, 0.1, 0.5)
        np.testing.assert_allclose(out.v, 0.7, atol=1e-14)

    def test_discrete_helmholtz_inverse(self):
        s = smooth_profile(0)
        u = smoothed_velocity(s.v, 0.2, s.dx)
        d2 = (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / s.dx ** 2
        np.testing.assert_allclose(u - 0.04 * d2, s.v, atol=1e-12)

    @given(st.integers(0, 10 ** 6), st.floats(0.02, 0.2))
    def test_max_principle_and_mass(self, seed, alpha):
        s = smooth_profile(seed)
        lo, hi, m0 = s.v.min(), s.v.max(), s.mass()
        out = run_burgers_alpha(s, alpha, 0.5)
        assert out.v.max() <= hi + 1e-12 and out.v.min() >= lo - 1e-12
        assert abs(out.mass() - m0) <= 1e-10

    def test_step_requires_positive_alpha(self):
        with pytest.raises(ValueError):
            step_burgers_alpha(sine_ic(64), 0.0, 1e-3)

    def test_cfl_step(self):
        s = sine_ic(128)
        dt = burgers_alpha_max_dt(s, 0.1, cfl=0.5)
        u = smoothed_velocity(s.v, 0.1, s.dx)
        assert dt == pytest.approx(0.5 * s.dx / np.max(np.abs(u)))

    def test_converges_before_the_shock(self):
        # smooth regime: errors against characteristics shrink with alpha
        t = 0.2
        errs = []
        for alpha in (0.1, 0.05, 0.025):
            out = run_burgers_alpha(sine_ic(1024), alpha, t)
            errs.append(np.max(np.abs(out.v - characteristics_solution(out.x, t))))
        assert errs[0] > errs[1] > errs[2]


class TestViscousBurgers:
    def test_pure_diffusion_is_exact(self):
        s = sine_ic(64)
        out = step_burgers_viscous(s, 0.1, 0.01, advect=False)
        np.testing.assert_allclose(out.v, np.exp(-0.01 * 0.01 * np.pi ** 2) * s.v, atol=1e-12)

    def test_energy_strictly_decreases_and_mass_is_kept(self):
        s = sine_ic(512)
        energies, masses = [s.energy()], [s.mass()]

        def rec(st):
            energies.append(st.energy())
            masses.append(st.mass())

        run_burgers_viscous(s, 0.05, 1.0, 2e-4, on_step=rec)
        assert np.all(np.diff(energies) < 0)
        assert np.max(np.abs(np.array(masses) - masses[0])) <= 1e-10

    def test_requires_positive_epsilon(self):
        with pytest.raises(ValueError):
            step_burgers_viscous(sine_ic(64), 0.0, 1e-3)

    @pytest.mark.parametrize("scale", [0.05, 0.1])
    def test_viscous_energy_decays_faster_after_the_shock(self, scale):
        rates = {}
        for kind in ("alpha", "viscous"):
            rec = []
            cb = lambda st: rec.append((st.t, st.energy()))  # noqa: E731
            if kind == "alpha":
                run_burgers_alpha(sine_ic(1024), scale, T_POST_SHOCK, on_step=cb)
            else:
                run_burgers_viscous(sine_ic(1024), scale, T_POST_SHOCK, 2e-4, on_step=cb)
            r = np.array(rec)
            t1 = 1 / np.pi
            rates[kind] = (np.interp(t1, r[:, 0], r[:, 1]) - r[-1, 1]) / (r[-1, 0] - t1)
        assert rates["viscous"] > rates["alpha"] > 0


class TestEntropyReference:
    def test_godunov_flux_cases(self):
        ul = np.array([1.0, 0.0, -1.0, -1.0, 2.0])
        ur = np.array([0.0, 1.0, 1.0, -2.0, -1.0])
        # shock right, rarefaction right, transonic rarefaction, shock left, shock right
        np.testing.assert_allclose(godunov_flux(ul, ur), [0.5, 0.0, 0.0, 2.0, 2.0])

    def test_riemann_shock_speed(self):
        x, v = entropy_reference("riemann", 1.0, n_fine=8192, boundary="outflow")
        assert abs(shock_position(x, v) - 1.5) <= 2 * (2 / 8192)

    def test_rarefaction_fan(self):
        n = 8192
        x = 2.0 * (np.arange(n) + 0.5) / n
        init = np.where(x < 1.0, 0.0, 1.0)
        x, v = entropy_reference(init, 0.5, n_fine=n, boundary="outflow")
        fan = (x > 1.05) & (x < 1.45)
        np.testing.assert_allclose(v[fan], (x[fan] - 1.0) / 0.5, atol=0.01)

    def test_matches_characteristics_before_breaking(self):
        x, v = entropy_reference("sine", 0.05)
        assert np.max(np.abs(v - characteristics_solution(x, 0.05))) <= 1e-4

    def test_first_order_convergence(self):
        errs = []
        for n in (4096, 8192):
            x, v = entropy_reference("sine", 0.25, n_fine=n)
            errs.append(np.max(np.abs(v - characteristics_solution(x, 0.25))))
        assert 1.8 < errs[0] / errs[1] < 2.2

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            entropy_reference("sine", 0.1, n_fine=1024)
        with pytest.raises(ValueError):
            entropy_reference("square", 0.1)
        with pytest.raises(ValueError):
            entropy_reference("sine", 0.1, boundary="reflect")
        with pytest.raises(ValueError):
            characteristics_solution(np.array([0.5]), 0.4)

    def test_shock_position_helper(self):
        x = np.linspace(0, 1, 11)
        assert shock_position(x, np.where(x < 0.45, 1.0, 0.0)) == pytest.approx(0.45)
        with pytest.raises(ValueError):
            shock_position(x, np.zeros_like(x))

    def test_l1_distance_to_itself(self):
        x, v = entropy_reference("sine", 0.1, n_fine=4096)
        s = Burgers1DState(0.1, np.interp(2.0 * np.arange(512) / 512, x, v, period=2.0))
        assert l1_distance(s, x, v) < 1e-12

    def test_riemann_ic(self):
        s = riemann_ic(64)
        assert s.v[:32].tolist() == [1.0] * 32 and s.v[32:].tolist() == [0.0] * 32
