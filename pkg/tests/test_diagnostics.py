import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alphamhd.diagnostics import (
    COLUMNS, DiagnosticsRecord, csv_text, energy_balance_residual, energy_spectrum, invariants,
    magnetic_potential, physical_quadrature, read_csv, relative_drift, vector_potential, write_csv,
)
from alphamhd.initial import orszag_tang, random_state, taylor_green_mhd
from alphamhd.models import MODELS, ModelSpec, make_state
from alphamhd.spectral import PeriodicGrid, PhysicalField, SpectralField, transform
from alphamhd.timestepper import StepperConfig, integrate


def record(t, e, diss):
    return DiagnosticsRecord(t, e, 0, None, None, None, diss, 0, 0, 0, 0, 0, 0, 0, 0, 0)


def spec_for(model):
    dim = 2 if model == "leray_alpha_mhd_2d" else 3
    return ModelSpec(model, nu=0.01, eta=0.02, alpha=0.0 if model == "mhd" else 0.3,
                     alpha_m=0.2 if model == "lamhd_alpha" else 0.0, dim=dim)


class TestAnalyticValues:
    def test_energy_of_single_mode(self):
        # u = (0, sin x, 0), B = 0, alpha = 0.5: E = 1/2 (1 + 0.25) * (2 pi)^3 / 2
        g = PeriodicGrid(8, dim=3)
        x = g.coordinates()[0]
        u = g.forward(np.stack([0 * x, np.sin(x), 0 * x]))
        state = make_state(g, u, np.zeros_like(u))
        rec = invariants(ModelSpec("mhd_alpha", alpha=0.5), state)
        assert rec.E_alpha == pytest.approx(1.25 / 4 * (2 * np.pi) ** 3, rel=1e-14)

    def test_vector_potential_of_single_mode(self):
        g = PeriodicGrid(8, dim=3)
        x = g.coordinates()[0]
        b = transform(PhysicalField(g, np.stack([0 * x, 0 * x, np.cos(x)])), "forward", True)
        a = transform(vector_potential(b), "inverse").values
        np.testing.assert_allclose(a, np.stack([0 * x, np.sin(x), 0 * x]), atol=1e-14)

    def test_vector_potential_rejects_divergent_field(self):
        g = PeriodicGrid(8, dim=3)
        x = g.coordinates()[0]
        b = transform(PhysicalField(g, np.stack([np.sin(x), 0 * x, 0 * x])), "forward", True)
        with pytest.raises(ValueError, match="solenoidal"):
            vector_potential(b)

    def test_magnetic_potential_convention(self, grid2):
        x, y = grid2.coordinates()
        psi = np.sin(x) * np.cos(2 * y)
        b = np.stack([2 * np.sin(x) * np.sin(2 * y), np.cos(x) * np.cos(2 * y)])  # (-psi_y, psi_x)
        out = transform(magnetic_potential(transform(PhysicalField(grid2, b), "forward", True)),
                        "inverse").values
        np.testing.assert_allclose(out, psi, atol=1e-13)

    def test_beltrami_magnetic_helicity(self):
        # B = (sin z, cos z, 0) is curl-eigen with eigenvalue 1: A = B, H_M = 1/2 |B|^2
        g = PeriodicGrid(8, dim=3)
        z = g.coordinates()[2]
        b = g.forward(np.stack([np.sin(z), np.cos(z), 0 * z]))
        state = make_state(g, np.zeros_like(b), b)
        rec = invariants(ModelSpec("mhd"), state)
        assert rec.H_M == pytest.approx(0.5 * (2 * np.pi) ** 3, rel=1e-14)

    def test_orszag_tang_values(self, grid2):
        state = orszag_tang(grid2)
        rec = invariants(ModelSpec("leray_alpha_mhd_2d", dim=2), state)
        area = (2 * np.pi) ** 2
        assert rec.E_alpha == pytest.approx(0.5 * (1.0 + 1.0) * area, rel=1e-13)
        quad = physical_quadrature(ModelSpec("leray_alpha_mhd_2d", dim=2), state)
        assert rec.A_msq == pytest.approx(quad["A_msq"], rel=1e-13)


class TestSpectralVersusQuadrature:
    @pytest.mark.parametrize("model", MODELS)
    def test_agree(self, model):
        spec = spec_for(model)
        g = PeriodicGrid(16 if spec.dim == 3 else 32, dim=spec.dim)
        state = random_state(g, seed=2)
        rec = invariants(spec, state)
        quad = physical_quadrature(spec, state)
        for key, value in quad.items():
            assert getattr(rec, key) == pytest.approx(value, rel=1e-12, abs=1e-12)

    def test_spectrum_sums_to_energy(self, grid3):
        spec = ModelSpec("mhd_alpha", alpha=0.2)
        state = taylor_green_mhd(grid3)
        ek, eb = energy_spectrum(spec, state)
        assert ek.sum() + eb.sum() == pytest.approx(invariants(spec, state).E_alpha, rel=1e-13)


class TestEnergyBalance:
    def test_exact_for_linear_decay(self):
        # E = e^{-2t}, dissipation 2 e^{-2t}: residual is pure quadrature error
        t = np.linspace(0, 1, 101)
        series = [record(s, np.exp(-2 * s), 2 * np.exp(-2 * s)) for s in t]
        bal = energy_balance_residual(series)
        assert bal.quadrature == "simpson" and bal.max_abs < 1e-8
        assert energy_balance_residual(series, "trapezoid").max_abs > bal.max_abs

    def test_rejects_irregular_sampling(self):
        series = [record(s, 1.0, 0.0) for s in (0.0, 0.1, 0.3)]
        with pytest.raises(ValueError, match="uniformly"):
            energy_balance_residual(series)

    def test_single_sample(self):
        assert energy_balance_residual([record(0.0, 2.0, 1.0)]).max_abs == 0.0

    def test_zero_initial_energy(self):
        with pytest.raises(ValueError):
            energy_balance_residual([record(0.0, 0.0, 0.0), record(1.0, 0.0, 0.0)])

    @pytest.mark.parametrize("model", ["mhd_alpha", "lamhd_alpha", "leray_alpha_mhd_3d",
                                       "ml_alpha_mhd", "leray_alpha_mhd_2d"])
    def test_viscous_run_balances(self, model):
        spec = spec_for(model)
        g = PeriodicGrid(16 if spec.dim == 3 else 32, dim=spec.dim)
        traj = integrate(spec, random_state(g, seed=3, kmax=3), StepperConfig(dt=2e-3, t_end=0.2))
        assert energy_balance_residual(traj.records).max_abs < 1e-7

    @given(st.floats(0.1, 10.0))
    def test_drift_is_scale_free(self, scale):
        series = [record(0, scale, 0), record(1, 1.01 * scale, 0), record(2, 0.98 * scale, 0)]
        assert relative_drift(series, "E_alpha") == pytest.approx(0.02)


class TestCsv:
    def test_roundtrip(self, grid3, tmp_path):
        spec = ModelSpec("lamhd_alpha", alpha=0.1, alpha_m=0.1)
        traj = integrate(spec, random_state(grid3), StepperConfig(dt=0.01, t_end=0.03))
        path = write_csv(tmp_path / "d.csv", traj.records, spec, grid3)
        back = read_csv(path)
        assert back == traj.records
        assert back[0].A_msq is None and back[0].H_M_s is not None

    def test_header_and_metadata(self, grid3):
        spec = ModelSpec("mhd_alpha", alpha=0.1)
        text = csv_text([invariants(spec, random_state(grid3))], spec, grid3)
        meta, header = text.splitlines()[:2]
        assert "mode=ideal-diagnostic" in meta and "conserved=E_alpha|H_C|H_M" in meta
        assert header.split(",")[0] == "t [time]"
        assert len(header.split(",")) == len(COLUMNS)

    def test_anisotropic_box_is_flagged(self):
        g = PeriodicGrid((16, 16, 8), length=(2 * np.pi, 2 * np.pi, np.pi))
        spec = ModelSpec("mhd", nu=0.1, eta=0.1)
        text = csv_text([invariants(spec, random_state(g, kmax=2))], spec, g)
        assert "scope=anisotropic-box-extension" in text.splitlines()[0]

    def test_records_are_finite(self, grid3):
        rec = invariants(ModelSpec("mhd"), random_state(grid3))
        assert rec.finite()
        assert not DiagnosticsRecord(math.nan, *([0.0] * (len(COLUMNS) - 1))).finite()
