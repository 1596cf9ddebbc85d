"""Signed distance, foot-point projection, and the normal field."""

import numpy as np
import pytest

from dfindex import zoo
from dfindex.distance import (boundary_batch, cut_locus_mask, delta_jet,
                              foot_points, normal_n, project_to_boundary,
                              signed_distance)
from dfindex.errors import AmbiguousFoot, StencilLeak


def test_ball_radial_projection_outside(ball):
    bp = project_to_boundary(ball.domain, np.array([2.0, 0, 0, 0]))
    np.testing.assert_allclose(bp.position, [1, 0, 0, 0], atol=1e-12)
    d = signed_distance(ball.domain, np.array([[2.0, 0, 0, 0]]))
    assert abs(d[0] - 1.0) < 1e-12


def test_ball_radial_projection_inside(ball):
    for th in (0.3, 2.1, 4.4):
        z = np.array([0.5 * np.cos(th), 0.5 * np.sin(th), 0, 0])
        bp = project_to_boundary(ball.domain, z)
        np.testing.assert_allclose(bp.position,
                                   [np.cos(th), np.sin(th), 0, 0], atol=1e-10)
        d = signed_distance(ball.domain, z)
        assert abs(d[0] + 0.5) < 1e-12


def _bidisc_boundary_param(bidisc, X):
    # (x1, y1, phi) -> boundary point of the fattened bidisc
    r = bidisc.domain.meta["r"]
    M = bidisc.domain.meta["M"]
    s = X[:, 0] ** 2 + X[:, 1] ** 2 - r * r
    hinge = M * np.where(s > 0, s, 0.0) ** 4
    rad = np.sqrt(np.maximum(1.0 - hinge, 0.0))
    return np.stack([X[:, 0], X[:, 1],
                     rad * np.cos(X[:, 2]), rad * np.sin(X[:, 2])], axis=1)


def test_bidisc_foot_matches_dense_search(bidisc):
    # independent oracle: dense parametric grid search with local zooming
    Z = bidisc.interior_mesh(8, seed=1)
    feet, _ = foot_points(bidisc.domain, Z)
    R_mesh = 1.05
    coarse = np.stack(np.meshgrid(np.linspace(-R_mesh, R_mesh, 41),
                                  np.linspace(-R_mesh, R_mesh, 41),
                                  np.linspace(0, 2 * np.pi, 41),
                                  indexing="ij"), axis=-1).reshape(-1, 3)
    Pc = _bidisc_boundary_param(bidisc, coarse)
    for k in range(Z.shape[0]):
        dc = np.linalg.norm(Pc - Z[k], axis=1)
        seeds = coarse[np.argsort(dc)[:24]]
        brute = np.inf
        best = None
        for seed_center in seeds:
            center = seed_center.copy()
            span = np.array([0.08, 0.08, 0.25])
            for level in range(14):
                g = np.stack(np.meshgrid(*[np.linspace(c - s, c + s, 11)
                                           for c, s in zip(center, span)],
                                         indexing="ij"),
                             axis=-1).reshape(-1, 3)
                P = _bidisc_boundary_param(bidisc, g)
                d = np.linalg.norm(P - Z[k], axis=1)
                j = int(np.argmin(d))
                center = g[j]
                span = span * 0.4
            if d[j] < brute:
                brute = d[j]
                best = P[j]
        newton = np.linalg.norm(feet[k] - Z[k])
        assert abs(newton - brute) < 1e-6
        assert np.linalg.norm(feet[k] - best) < 1e-5


def test_projection_idempotent(zoo_entries):
    for entry in zoo_entries:
        P = entry.boundary_mesh(200, seed=2)
        feet, _ = foot_points(entry.domain, P)
        feet2, _ = foot_points(entry.domain, feet)
        assert np.max(np.linalg.norm(feet2 - feet, axis=1)) < 1e-10


def test_ambiguous_foot_at_center(ball):
    with pytest.raises(AmbiguousFoot):
        project_to_boundary(ball.domain, np.zeros(4))


def test_cut_locus_mask(ball):
    pts = np.array([[0.0, 0, 0, 0], [0.5, 0, 0, 0]])
    mask = cut_locus_mask(ball.domain, pts)
    assert mask[0] and not mask[1]


def test_stencil_leak_when_collar_too_small(ball):
    with pytest.raises(StencilLeak):
        delta_jet(ball.domain, np.array([[1.0, 0, 0, 0]]), order=2,
                  collar=1e-6)


# ---------------------------------------------------------------------------
# delta-jets against the ball's closed form
# ---------------------------------------------------------------------------

def test_ball_delta_jets_match_closed_form(ball):
    rng = np.random.default_rng(3)
    v = rng.normal(size=(300, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    P = v * rng.uniform(0.9, 1.1, 300)[:, None]
    jet = delta_jet(ball.domain, P, order=3)
    ref = zoo.ball_delta_jet(P, 1.0, order=3)
    rel2 = np.abs(jet.rhess - ref.rhess) / np.maximum(np.abs(ref.rhess), 0.1)
    rel1 = np.abs(jet.rgrad - ref.rgrad) / np.maximum(np.abs(ref.rgrad), 0.1)
    assert rel1.max() < 1e-6
    assert rel2.max() < 1e-6
    rel3 = np.abs(jet.rthird - ref.rthird) / np.maximum(np.abs(ref.rthird), 1.0)
    assert rel3.max() < 1e-4


def test_ball_restricted_levi_is_half(ball):
    bp = project_to_boundary(ball.domain, np.array([1.0, 0, 0, 0]))
    tangent = np.array([0.0, 1.0 + 0j])
    val = bp.jet.hess(tangent, tangent)[0]
    assert abs(val - 0.5) < 1e-6


def test_eikonal(zoo_entries):
    for entry in zoo_entries:
        P = entry.boundary_mesh(100, seed=4)
        rng = np.random.default_rng(5)
        jets = entry.domain.jet(P, order=1)
        nhat = jets.rgrad / np.linalg.norm(jets.rgrad, axis=1, keepdims=True)
        Q = P - rng.uniform(0.2, 0.8, 100)[:, None] * \
            (0.25 * entry.domain.collar_width) * nhat
        Q = Q[~cut_locus_mask(entry.domain, Q)]
        jet = delta_jet(entry.domain, Q, order=1)
        assert np.max(np.abs(np.linalg.norm(jet.rgrad, axis=1) - 1.0)) < 1e-6


def test_normal_properties_on_every_zoo_boundary(zoo_entries):
    # N delta = 1/2, N + conj N = grad delta, unit coefficient vector
    for entry in zoo_entries:
        P = entry.boundary_mesh(1000, seed=6)
        batch = boundary_batch(entry.domain, P, order=1)
        w = batch.jet.wgrad
        nd = np.einsum("kj,kj->k", batch.N, w)
        assert np.max(np.abs(nd - 0.5)) < 1e-6
        v = np.empty_like(batch.grad_delta)
        v[:, 0::2] = batch.N.real
        v[:, 1::2] = batch.N.imag
        assert np.max(np.linalg.norm(v - batch.grad_delta, axis=1)) < 1e-6
        norms = np.einsum("kj,kj->k", batch.N, np.conj(batch.N)).real
        assert np.max(np.abs(norms - 1.0)) < 1e-6


def test_quadric_normal_derivative_is_half(ball, quartic):
    # N delta = 1/2 at quadric-style boundaries
    for entry in (ball, quartic):
        P = entry.boundary_mesh(200, seed=7)
        batch = boundary_batch(entry.domain, P, order=1)
        nd = np.einsum("kj,kj->k", batch.N, batch.jet.wgrad)
        assert np.max(np.abs(nd - 0.5)) < 1e-6


def test_worm_normal_matches_defining_function_normal(worm):
    # on the boundary the normalized rho-gradient gives the same N
    P = worm.boundary_mesh(300, seed=8)
    batch = boundary_batch(worm.domain, P, order=1)
    jr = worm.domain.jet(batch.positions, order=1)
    w = jr.wgrad
    s = np.sqrt(np.einsum("kj,kj->k", w, np.conj(w)).real)
    N_rho = np.conj(w) / s[:, None]
    assert np.max(np.abs(N_rho - batch.N)) < 1e-6


def test_transversal_field_tangency(zoo_entries):
    for entry in zoo_entries:
        P = entry.boundary_mesh(300, seed=9)
        batch = boundary_batch(entry.domain, P, order=1)
        for i in range(0, 300, 60):
            bp = batch.point(i)
            assert bp.nu.tangency_defect(bp.grad_delta) < 1e-6


def test_normal_n_single_jet(ball):
    jet = delta_jet(ball.domain, np.array([[1.0, 0, 0, 0]]), order=1)
    N = normal_n(jet)
    np.testing.assert_allclose(N[0], [1.0, 0.0], atol=1e-8)
