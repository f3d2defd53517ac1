import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossland.core import DimensionMismatch, RngStream
from lossland import net
from lossland.curve import init_bend, train_curve
from lossland.data import make_gaussians
from lossland.landscape import (
    DegeneratePlaneError,
    SegmentScan,
    build_plane,
    default_ranges,
    detect_barrier,
    eval_surface,
    plane_point,
    project_iterate,
    project_linear,
    scan_segment,
)
from lossland.net import MlpSpec


def manual_scan(losses, grid=None):
    losses = np.asarray(losses, dtype=np.float64)
    if grid is None:
        grid = np.linspace(0, 1, losses.shape[0])
    return SegmentScan(w_m=np.zeros(1), w_n=np.zeros(1), lambda_grid=np.asarray(grid),
                       losses=losses)


def mlp_setup(seed=61):
    spec = MlpSpec((2, 5, 3), activation="tanh")
    w_m = net.init_params(spec, RngStream(seed, "m"))
    w_n = net.init_params(spec, RngStream(seed + 1, "n"))
    ds = make_gaussians(14, 3, 2, 2.0, RngStream(seed + 2, "d"))
    return spec, w_m, w_n, ds


class TestScanSegment:
    def test_endpoint_convention(self):
        spec, w_m, w_n, ds = mlp_setup()
        scan = scan_segment(w_m, w_n, np.linspace(0, 1, 5), spec, ds)
        batch = ds.as_batch()
        assert scan.losses[-1] == net.forward_loss(spec, w_m, batch).cross_entropy
        assert scan.losses[0] == net.forward_loss(spec, w_n, batch).cross_entropy

    def test_equal_endpoints_constant(self):
        spec, w_m, _, ds = mlp_setup()
        scan = scan_segment(w_m, w_m, np.linspace(0, 1, 7), spec, ds)
        assert np.ptp(scan.losses) == 0

    def test_matches_naive_recombination(self):
        spec, w_m, w_n, ds = mlp_setup(seed=71)
        grid = np.linspace(0, 1, 11)
        scan = scan_segment(w_m, w_n, grid, spec, ds)
        batch = ds.as_batch()
        for lam, loss in zip(grid, scan.losses):
            w = np.array([lam * a + (1 - lam) * b for a, b in zip(w_m, w_n)])
            assert loss == net.forward_loss(spec, w, batch).cross_entropy

    def test_dimension_mismatch(self):
        spec, w_m, _, ds = mlp_setup()
        with pytest.raises(DimensionMismatch):
            scan_segment(w_m, w_m[:-1], np.linspace(0, 1, 3), spec, ds)


class TestDetectBarrier:
    def test_simple_barrier(self):
        report = detect_barrier(manual_scan([1.0, 3.0, 1.5]))
        assert report.has_barrier
        assert report.barrier_height == 1.5
        assert report.max_interior_loss == 3.0
        assert report.argmax_lambda == 0.5

    def test_no_barrier(self):
        report = detect_barrier(manual_scan([1.0, 0.9, 1.2]))
        assert not report.has_barrier
        assert report.barrier_height == pytest.approx(-0.3)

    def test_tie_breaks_to_smallest_lambda(self):
        report = detect_barrier(manual_scan([0.0, 2.0, 2.0, 0.0]))
        assert report.argmax_lambda == pytest.approx(1 / 3)

    def test_convex_quadratic_has_no_barrier(self):
        # dense-grid analytic oracle: |w|^2 on the segment (1,0)->(0,1) is
        # maximized at the endpoints
        grid = np.linspace(0, 1, 101)
        w_m, w_n = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        losses = [(lam * w_m + (1 - lam) * w_n) @ (lam * w_m + (1 - lam) * w_n) for lam in grid]
        report = detect_barrier(manual_scan(losses, grid))
        assert not report.has_barrier

    def test_double_well_has_barrier(self):
        grid = np.linspace(0, 1, 101)
        losses = [((w := (lam * 1.0 + (1 - lam) * -1.0)) ** 2 - 1.0) ** 2 for lam in grid]
        report = detect_barrier(manual_scan(losses, grid))
        assert report.has_barrier
        assert report.max_interior_loss == pytest.approx(1.0)
        assert report.argmax_lambda == pytest.approx(0.5)

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            detect_barrier(manual_scan([1.0, 2.0], grid=[0.0, 1.0]))

    @given(st.lists(st.floats(0, 100), min_size=3, max_size=40))
    @settings(max_examples=200)
    def test_matches_brute_force(self, losses):
        report = detect_barrier(manual_scan(losses))
        # independent brute force
        end = max(losses[0], losses[-1])
        interior = losses[1:-1]
        best, arg = -np.inf, None
        for i, v in enumerate(interior):
            if v > best:
                best, arg = v, i
        assert report.has_barrier == (best > end)
        assert report.max_interior_loss == best
        assert report.barrier_height == best - end
        grid = np.linspace(0, 1, len(losses))
        assert report.argmax_lambda == grid[1 + arg]


class TestBuildPlane:
    def test_axis_aligned(self):
        plane = build_plane(np.zeros(3), np.array([1.0, 0, 0]), np.array([0.0, 2, 0]))
        np.testing.assert_allclose(plane.u, [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(plane.v, [0, 1, 0], atol=1e-15)
        np.testing.assert_array_equal(plane.anchor_coords[0], [0, 0])
        np.testing.assert_allclose(plane.anchor_coords[1], [1, 0], atol=1e-15)
        np.testing.assert_allclose(plane.anchor_coords[2], [0, 2], atol=1e-15)

    def test_reconstruction_from_coords(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p0, p1, p2 = rng.normal(size=(3, 12))
            plane = build_plane(p0, p1, p2)
            for anchor, (x, y) in zip((p0, p1, p2), plane.anchor_coords):
                rebuilt = plane_point(plane, x, y)
                err = np.linalg.norm(rebuilt - anchor) / max(np.linalg.norm(anchor), 1.0)
                assert err < 1e-10

    def test_orthonormal_basis(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            p0, p1, p2 = rng.normal(size=(3, 30))
            plane = build_plane(p0, p1, p2)
            assert abs(plane.u @ plane.v) < 1e-12
            assert abs(plane.u @ plane.u - 1) < 1e-12
            assert abs(plane.v @ plane.v - 1) < 1e-12

    def test_degenerate_anchors(self):
        p0 = np.array([1.0, 2.0, 3.0])
        with pytest.raises(DegeneratePlaneError):
            build_plane(p0, p0, np.array([0.0, 0.0, 1.0]))
        with pytest.raises(DegeneratePlaneError):
            build_plane(p0, 2 * p0, 3 * p0)  # collinear through origin direction p0


class TestProjectIterate:
    def test_anchor_projects_to_itself(self):
        rng = np.random.default_rng(7)
        p0, p1, p2 = rng.normal(size=(3, 9))
        plane = build_plane(p0, p1, p2)
        coords, projected, residual = project_iterate(plane, p1)
        assert residual < 1e-10
        np.testing.assert_allclose(projected, p1, atol=1e-10)

    def test_hand_constructed_orthogonal_decomposition(self):
        p0 = np.zeros(3)
        p1 = np.array([2.0, 0.0, 0.0])
        p2 = np.array([0.0, 5.0, 0.0])
        plane = build_plane(p0, p1, p2)
        n = np.array([0.0, 0.0, 1.0])
        w = p0 + 3.0 * plane.u + 4.0 * plane.v + 5.0 * n
        coords, projected, residual = project_iterate(plane, w)
        np.testing.assert_allclose(coords, [3.0, 4.0], atol=1e-12)
        assert residual == pytest.approx(5.0, abs=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(8)
        p0, p1, p2, w = rng.normal(size=(4, 11))
        plane = build_plane(p0, p1, p2)
        coords1, projected1, _ = project_iterate(plane, w)
        coords2, projected2, residual2 = project_iterate(plane, projected1)
        np.testing.assert_allclose(projected2, projected1, atol=1e-12)
        np.testing.assert_allclose(coords2, coords1, atol=1e-12)
        assert residual2 < 1e-10

    def test_residual_orthogonal_to_basis(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            p0, p1, p2, w = rng.normal(size=(4, 25))
            plane = build_plane(p0, p1, p2)
            _, projected, _ = project_iterate(plane, w)
            r = w - projected
            assert abs(r @ plane.u) < 1e-10
            assert abs(r @ plane.v) < 1e-10

    def test_trained_bend_lies_in_its_own_plane(self):
        spec, w_a, w_b, ds = mlp_setup(seed=81)
        chain = init_bend(w_a, w_b)
        chain = train_curve(chain, spec, ds, 40, 0.05, RngStream(82, "t"), batch_size=8)
        plane = build_plane(chain.w_a, chain.w_b, chain.theta)
        _, _, residual = project_iterate(plane, chain.theta)
        assert residual < 1e-10 * max(1.0, np.linalg.norm(chain.theta))


class TestProjectLinear:
    def test_anchor_recovers_unit_coefficients(self):
        rng = np.random.default_rng(10)
        p0, p1, p2 = rng.normal(size=(3, 8))
        lam, projected = project_linear(p0, p1, p2, p1)
        np.testing.assert_allclose(lam, [0, 1, 0], atol=1e-10)
        np.testing.assert_allclose(projected, p1, atol=1e-10)

    def test_orthogonal_target_projects_to_zero(self):
        p0 = np.array([1.0, 0, 0, 0])
        p1 = np.array([0.0, 1, 0, 0])
        p2 = np.array([0.0, 0, 1, 0])
        w = np.array([0.0, 0, 0, 7.0])
        _, projected = project_linear(p0, p1, p2, w)
        np.testing.assert_allclose(projected, 0.0, atol=1e-12)

    def test_matches_explicit_normal_equations(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p0, p1, p2, w = rng.normal(size=(4, 5))
            lam, projected = project_linear(p0, p1, p2, w)
            A = np.stack([p0, p1, p2], axis=1)
            lam_oracle = np.linalg.inv(A.T @ A) @ (A.T @ w)
            np.testing.assert_allclose(lam, lam_oracle, atol=1e-10)
            np.testing.assert_allclose(projected, A @ lam_oracle, atol=1e-10)

    def test_span_projection_differs_from_affine_in_general(self):
        rng = np.random.default_rng(12)
        p0, p1, p2, w = rng.normal(size=(4, 6))
        plane = build_plane(p0, p1, p2)
        _, affine, _ = project_iterate(plane, w)
        _, span = project_linear(p0, p1, p2, w)
        assert np.linalg.norm(affine - span) > 1e-6

    def test_singular_anchors_rejected(self):
        p0 = np.array([1.0, 0.0, 0.0])
        with pytest.raises(np.linalg.LinAlgError):
            project_linear(p0, 2 * p0, np.array([0.0, 1.0, 0.0]), np.ones(3))


class TestEvalSurface:
    def test_single_point_grid_is_base_anchor(self):
        spec, w_m, w_n, ds = mlp_setup(seed=91)
        theta = 0.5 * (w_m + w_n) + 0.1
        plane = build_plane(w_m, w_n, theta)
        grid = eval_surface(plane, (0.0, 0.0), (0.0, 0.0), (1, 1), spec, ds, ds)
        direct = net.forward_loss(spec, w_m, ds.as_batch()).cross_entropy
        assert grid.train_loss[0, 0] == direct

    def test_anchor_grid_points_match_direct_evaluation(self):
        spec, w_m, w_n, ds = mlp_setup(seed=92)
        theta = 0.5 * (w_m + w_n) + 0.05
        plane = build_plane(w_m, w_n, theta)
        (x1, _), (x2, y2) = plane.anchor_coords[1], plane.anchor_coords[2]
        grid = eval_surface(plane, (0.0, x1), (0.0, y2), (2, 2), spec, ds, ds)
        batch = ds.as_batch()
        assert grid.train_loss[0, 0] == net.forward_loss(spec, w_m, batch).cross_entropy
        assert grid.train_loss[0, 1] == pytest.approx(
            net.forward_loss(spec, w_n, batch).cross_entropy, rel=1e-12, abs=1e-12)

    def test_matches_naive_per_point_oracle(self):
        spec, w_m, w_n, ds = mlp_setup(seed=93)
        theta = 0.5 * (w_m + w_n) + 0.2
        plane = build_plane(w_m, w_n, theta)
        (xr, yr) = default_ranges(plane)
        grid = eval_surface(plane, xr, yr, (5, 5), spec, ds, ds)
        batch = ds.as_batch()
        for iy, y in enumerate(grid.ys):
            for ix, x in enumerate(grid.xs):
                w = plane.p0 + x * plane.u + y * plane.v
                expected = net.forward_loss(spec, w, batch).cross_entropy
                assert abs(grid.train_loss[iy, ix] - expected) <= 1e-12

    def test_ranges_excluding_anchor_warn(self):
        spec, w_m, w_n, ds = mlp_setup(seed=94)
        theta = 0.5 * (w_m + w_n) + 0.3
        plane = build_plane(w_m, w_n, theta)
        grid = eval_surface(plane, (0.0, 0.1), (0.0, 0.1), (2, 2), spec, ds, ds)
        assert grid.warnings
        assert any("anchor" in w for w in grid.warnings)

    def test_default_ranges_cover_anchors(self):
        rng = np.random.default_rng(13)
        p0, p1, p2 = rng.normal(size=(3, 40))
        plane = build_plane(p0, p1, p2)
        (x_lo, x_hi), (y_lo, y_hi) = default_ranges(plane, margin=0.2)
        for cx, cy in plane.anchor_coords:
            assert x_lo <= cx <= x_hi and y_lo <= cy <= y_hi

    def test_iterates_projected_into_sidecar(self, tmp_path):
        spec, w_m, w_n, ds = mlp_setup(seed=95)
        theta = 0.5 * (w_m + w_n) + 0.1
        plane = build_plane(w_m, w_n, theta)
        xr, yr = default_ranges(plane)
        grid = eval_surface(plane, xr, yr, (3, 3), spec, ds, ds,
                            iterates=[(7, w_m), (9, theta)])
        assert [it["epoch"] for it in grid.projected_iterates] == [7, 9]
        assert grid.projected_iterates[0]["residual_norm"] < 1e-10
        csv_path, meta_path = tmp_path / "s.csv", tmp_path / "s.json"
        grid.to_csv(str(csv_path))
        grid.to_sidecar_json(str(meta_path))
        rows = csv_path.read_text().strip().splitlines()
        assert rows[0] == "x,y,train_loss,val_loss"
        assert len(rows) == 1 + 9
        meta = json.loads(meta_path.read_text())
        assert len(meta["anchors"]) == 3
        assert len(meta["projected_iterates"]) == 2
