import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slotqed.errors import DomainError, SingularInputError
from slotqed.greens import (
    SELF_IMAG,
    coupling_matrices,
    gamma_1d,
    greens_free_space_tensor,
    greens_free_space_xx,
    greens_total,
    greens_waveguide,
    purcell_factor,
    waveguide_decay_rate,
)
from slotqed.ingest import read_oracle_table
from slotqed.mode import ModeProfile


@pytest.mark.parametrize("kr", [1e-4, 1e-5, 1e-6])
def test_imaginary_part_self_limit(params, kr):
    g = greens_free_space_xx((0, 0, 0), (0, kr / params.k, 0), params.k)
    assert g.imag == pytest.approx(SELF_IMAG, rel=1e-6)


def test_matches_symbolic_oracle_table(params):
    _, _, _, rows = read_oracle_table("greens_xx.txt")
    k = params.k
    for r in rows:
        u, n = float(r[1]), np.array(r[2:5], dtype=float)
        ref = complex(float(r[5]), float(r[6]))
        g = greens_free_space_xx((0.0, 0.0, 0.0), n * u / k, k)
        assert abs(g - ref) <= 1e-10 * abs(ref), (r[0], u)


def test_side_by_side_at_kr_01_against_table(params):
    _, _, _, rows = read_oracle_table("greens_xx.txt")
    row = next(r for r in rows if r[0] == "side" and float(r[1]) == 0.1)
    g = greens_free_space_xx((0, 0, 0), (0, 0.1 / params.k, 0), params.k)
    ref = complex(float(row[5]), float(row[6]))
    assert abs(g - ref) / abs(ref) <= 1e-10


def test_near_field_signs(params):
    k = params.k
    side = greens_free_space_xx((0, 0, 0), (0, 0.1 / k, 0), k)
    head = greens_free_space_xx((0, 0, 0), (0.1 / k, 0, 0), k)
    # side-by-side: J = -3 pi Gamma0 Re G > 0 (repulsive); head-to-tail: attractive
    assert side.real < 0 and head.real > 0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 50), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_reciprocity_and_tensor(u, theta, phi):
    k = 1.0
    d = u * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    a, b = np.zeros(3), d
    gab = greens_free_space_xx(a, b, k)
    gba = greens_free_space_xx(b, a, k)
    assert gab == pytest.approx(gba, rel=1e-13, abs=1e-15)
    t = greens_free_space_tensor(a, b, k)
    assert t[0, 0] == pytest.approx(gab, rel=1e-12, abs=1e-15)
    assert np.allclose(t, t.T, rtol=1e-13, atol=1e-15)
    # trace of Im G is the local density of states, sin(u) / (2 pi u)
    assert np.trace(t).imag == pytest.approx(math.sin(u) / (2 * math.pi * u), rel=1e-9, abs=1e-12)


def test_coincident_points_rejected():
    with pytest.raises(SingularInputError):
        greens_free_space_xx((1, 2, 3), (1, 2, 3), 1.0)


def test_purcell_identity_on_grid(slot_mode):
    x = np.linspace(-100e-9, 100e-9, 21)
    y = np.linspace(0, 250e-9, 11)
    X, Y = np.meshgrid(x, y, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=-1)
    g1d = gamma_1d(slot_mode, pts, pts)
    pf = np.array([purcell_factor(v, 1.0) for v in g1d])
    assert np.max(np.abs(pf - slot_mode.purcell(X.ravel(), Y.ravel()))) < 1e-12
    assert purcell_factor(0.0, 1.0) == 1.0
    with pytest.raises(DomainError):
        purcell_factor(-1.0, 1.0)


def test_waveguide_green_phase_and_rate(params, slot_mode, slot):
    a = (0.0, slot.h / 2, 0.0)
    dz = 0.37e-6
    b = (0.0, slot.h / 2, dz)
    g = greens_waveguide(a, b, slot_mode)
    pf = 35.0
    assert abs(g) == pytest.approx((pf - 1) / (6 * math.pi), rel=1e-12)
    assert np.angle(g / 1j) == pytest.approx(np.angle(np.exp(1j * slot_mode.beta0 * dz)), abs=1e-12)
    total = greens_total(a, b, params.k, slot_mode)
    assert total == pytest.approx(g + greens_free_space_xx(a, b, params.k), rel=1e-14)
    assert waveguide_decay_rate(1.0, 4 * math.pi) == pytest.approx(1.0)


def test_coupling_matrix_conventions(params, slot_mode, slot):
    g0, k = params.gamma0, params.k
    pos = np.array([[0, slot.h / 2, 0], [0, slot.h / 2, 0.3e-6], [10e-9, 0.1e-6, 0.9e-6]])
    cm = coupling_matrices(pos, k, slot_mode, g0)
    assert np.allclose(cm.J, cm.J.T) and np.allclose(cm.Gamma, cm.Gamma.T)
    assert np.all(np.diag(cm.J) == 0)
    assert np.allclose(np.diag(cm.Gamma), cm.decay)
    assert cm.decay[0] == pytest.approx(g0 * 35.0, rel=1e-12)
    g01 = greens_total(pos[0], pos[1], k, slot_mode)
    assert cm.J[0, 1] == pytest.approx(-3 * math.pi * g0 * g01.real, rel=1e-12)
    assert cm.Gamma[0, 1] == pytest.approx(6 * math.pi * g0 * g01.imag, rel=1e-12)
    assert np.linalg.eigvalsh(cm.Gamma).min() >= -1e-8 * g0


def test_exclusion_zeroes_only_dispersive(params):
    k, g0 = params.k, params.gamma0
    lam = params.lambda_probe
    pos = np.array([[0, 0, 0], [0, lam / 1000, 0]])
    cm = coupling_matrices(pos, k, None, g0, waveguide=False)
    assert cm.excluded[0, 1] and cm.J[0, 1] == 0
    assert cm.Gamma[0, 1] == pytest.approx(g0, rel=1e-4)
    free = coupling_matrices(pos, k, None, g0, waveguide=False, r_min=0.0)
    assert free.J[0, 1] != 0


def test_free_space_profile_has_no_guided_coupling(params):
    mode = ModeProfile.free_space(params)
    pos = np.array([[0, 0, 0], [0, 0.1e-6, 0]])
    cm = coupling_matrices(pos, params.k, mode, params.gamma0)
    assert np.allclose(cm.decay, params.gamma0)
