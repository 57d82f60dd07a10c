"""Unit and property tests for the coordinate math in equiwarp.sphere."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equiwarp.errors import DomainError
from equiwarp.sphere import (
    AngularTerms,
    EquirectSpec,
    PixelCoord,
    PlanePoint,
    SphereCoord,
    TangentGridSpec,
    distorted_kernel_grid,
    forward_gnomonic,
    inverse_gnomonic,
    pixel_to_sphere,
    plane_coords,
    solid_angle_of_mask,
    sphere_to_pixel,
    wrap_theta,
)
from equiwarp.warp import ValidMask

# Frozen reference values, each computed by a one-line independent
# evaluation (plain math-module arithmetic, separate from the library code).
TAN_2PI_OVER_512 = 0.012272462379566276
TAN_PI_OVER_256 = 0.012272462379566276  # pi/256 == 2*pi/512
NEG2_TAN_PI_OVER_256 = -0.02454492475913255
POS3_TAN_PI_OVER_256 = 0.03681738713869882
# inverse projection of plane point (0.1, 0.2) at tangent (0.3, 0.7),
# evaluated through the textbook trig-of-view-angle formulas.
INV_REF_THETA = 0.4559562079765953
INV_REF_PHI = 0.8914347514718791
ATAN_037 = 0.3543799191234378

thetas = st.floats(min_value=-math.pi, max_value=math.pi, exclude_max=True, allow_nan=False)
phis = st.floats(min_value=-math.pi / 2, max_value=math.pi / 2, allow_nan=False)
# box inscribed in the rho <= 3 disc
plane_box = st.floats(min_value=-2.1, max_value=2.1, allow_nan=False)


def spec_2to1(width=512):
    return EquirectSpec(width=width, height=width // 2)


def circ_diff(a: float, b: float) -> float:
    return abs(wrap_theta(a - b))


class TestSphereCoord:
    def test_theta_normalized_into_range(self):
        s = SphereCoord(theta=3 * math.pi, phi=0.0)
        assert s.theta == -math.pi

    def test_negative_pi_kept(self):
        assert SphereCoord(-math.pi, 0.0).theta == -math.pi

    def test_inner_value_untouched(self):
        assert SphereCoord(0.25, -0.5).theta == 0.25

    @pytest.mark.parametrize("phi", [math.pi / 2 + 1e-9, -2.0, math.pi])
    def test_phi_out_of_range_rejected(self, phi):
        with pytest.raises(DomainError):
            SphereCoord(0.0, phi)

    def test_poles_allowed(self):
        assert SphereCoord(0.0, math.pi / 2).phi == math.pi / 2
        assert SphereCoord(0.0, -math.pi / 2).phi == -math.pi / 2

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            SphereCoord(math.nan, 0.0)
        with pytest.raises(DomainError):
            SphereCoord(0.0, math.inf)


class TestEquirectSpec:
    def test_steps_are_derived(self):
        spec = spec_2to1(512)
        assert spec.delta_theta == 2 * math.pi / 512
        assert spec.delta_phi == math.pi / 256
        with pytest.raises(AttributeError):
            spec.delta_theta = 1.0

    def test_too_small_rejected(self):
        with pytest.raises(DomainError):
            EquirectSpec(1, 4)
        with pytest.raises(DomainError):
            EquirectSpec(8, 0)

    def test_non_square_pixels_warn(self):
        with pytest.warns(UserWarning, match="non-square"):
            EquirectSpec(512, 100)

    def test_two_to_one_is_silent(self, recwarn):
        EquirectSpec(512, 256)
        assert not recwarn.list


class TestSmallTypes:
    def test_pixel_coord_finite_only(self):
        with pytest.raises(DomainError):
            PixelCoord(math.inf, 0.0)

    def test_plane_point_finite_only(self):
        with pytest.raises(DomainError):
            PlanePoint(0.0, math.nan)

    def test_grid_spec_validation(self):
        tangent = SphereCoord(0.0, 0.0)
        with pytest.raises(DomainError):
            TangentGridSpec(4, tangent, 0.01, 0.01)
        with pytest.raises(DomainError):
            TangentGridSpec(1, tangent, 0.01, 0.01)
        with pytest.raises(DomainError):
            TangentGridSpec(5, tangent, 0.0, 0.01)

    def test_grid_for_spec(self):
        grid = TangentGridSpec.for_spec(5, SphereCoord(0.0, 0.0), spec_2to1(512))
        assert grid.step_u == TAN_2PI_OVER_512
        assert grid.step_t == TAN_PI_OVER_256
        assert grid.half == 2
        assert grid.u_max == 2 * grid.step_u

    def test_angular_terms(self):
        terms = AngularTerms.from_plane(PlanePoint(3.0, 4.0))
        assert terms.rho == 5.0
        assert terms.v == math.atan(5.0)
        assert AngularTerms.from_plane(PlanePoint(0.0, 0.0)).v == 0.0
        with pytest.raises(DomainError):
            AngularTerms(rho=0.0, v=0.5)
        with pytest.raises(DomainError):
            AngularTerms(rho=-1.0, v=-math.atan(1.0))


class TestSphereToPixel:
    def test_center(self):
        p = sphere_to_pixel(SphereCoord(0.0, 0.0), spec_2to1(512))
        assert (p.x, p.y) == (256.0, 128.0)

    def test_corner(self):
        p = sphere_to_pixel(SphereCoord(-math.pi, math.pi / 2), spec_2to1(512))
        assert (p.x, p.y) == (0.0, 0.0)

    def test_quarter_turn(self):
        p = sphere_to_pixel(SphereCoord(math.pi / 2, -math.pi / 4), EquirectSpec(1024, 512))
        assert (p.x, p.y) == (768.0, 384.0)

    @given(t1=thetas, t2=thetas, phi=phis)
    def test_monotone_in_theta(self, t1, t2, phi):
        # strictness is asserted above float resolution of the contraction
        if abs(t1 - t2) < 1e-9:
            return
        lo, hi = sorted([t1, t2])
        spec = spec_2to1(2048)
        assert sphere_to_pixel(SphereCoord(lo, phi), spec).x < sphere_to_pixel(SphereCoord(hi, phi), spec).x

    @given(p1=phis, p2=phis, theta=thetas)
    def test_antitone_in_phi(self, p1, p2, theta):
        if abs(p1 - p2) < 1e-9:
            return
        lo, hi = sorted([p1, p2])
        spec = spec_2to1(2048)
        assert sphere_to_pixel(SphereCoord(theta, lo), spec).y > sphere_to_pixel(SphereCoord(theta, hi), spec).y


class TestPixelToSphere:
    def test_center(self):
        s = pixel_to_sphere(PixelCoord(256.0, 128.0), spec_2to1(512))
        assert (s.theta, s.phi) == (0.0, 0.0)

    def test_corner(self):
        s = pixel_to_sphere(PixelCoord(0.0, 0.0), spec_2to1(512))
        assert (s.theta, s.phi) == (-math.pi, math.pi / 2)

    def test_quarter_turn(self):
        s = pixel_to_sphere(PixelCoord(768.0, 384.0), EquirectSpec(1024, 512))
        assert abs(s.theta - math.pi / 2) <= 1e-12
        assert abs(s.phi + math.pi / 4) <= 1e-12

    def test_seam_column_wraps(self):
        s = pixel_to_sphere(PixelCoord(512.0, 10.0), spec_2to1(512))
        assert s.theta == -math.pi

    def test_out_of_range_rejected(self):
        spec = spec_2to1(512)
        with pytest.raises(DomainError):
            pixel_to_sphere(PixelCoord(-0.001, 0.0), spec)
        with pytest.raises(DomainError):
            pixel_to_sphere(PixelCoord(0.0, 256.001), spec)

    @given(theta=thetas, phi=phis)
    def test_round_trip_from_sphere(self, theta, phi):
        spec = EquirectSpec(1024, 512)
        s = SphereCoord(theta, phi)
        back = pixel_to_sphere(sphere_to_pixel(s, spec), spec)
        assert circ_diff(back.theta, s.theta) <= 1e-12
        assert abs(back.phi - s.phi) <= 1e-12


class TestPlaneCoords:
    def test_origin(self):
        grid = TangentGridSpec.for_spec(9, SphereCoord(0.0, 0.0), spec_2to1(512))
        p = plane_coords(0, 0, grid)
        assert (p.u, p.t) == (0.0, 0.0)

    def test_unit_step(self):
        grid = TangentGridSpec.for_spec(9, SphereCoord(0.0, 0.0), spec_2to1(512))
        p = plane_coords(1, 0, grid)
        assert (p.u, p.t) == (TAN_2PI_OVER_512, 0.0)

    def test_signed_indices(self):
        grid = TangentGridSpec(9, SphereCoord(0.0, 0.0), math.tan(math.pi / 256), math.tan(math.pi / 256))
        p = plane_coords(-2, 3, grid)
        assert (p.u, p.t) == (NEG2_TAN_PI_OVER_256, POS3_TAN_PI_OVER_256)

    def test_out_of_grid_rejected(self):
        grid = TangentGridSpec.for_spec(5, SphereCoord(0.0, 0.0), spec_2to1(512))
        with pytest.raises(DomainError):
            plane_coords(3, 0, grid)
        with pytest.raises(DomainError):
            plane_coords(0, -3, grid)


class TestInverseGnomonic:
    def test_origin_returns_tangent_exactly(self):
        tangent = SphereCoord(0.3, 0.7)
        s = inverse_gnomonic(PlanePoint(0.0, 0.0), tangent)
        assert (s.theta, s.phi) == (tangent.theta, tangent.phi)

    @given(u=st.floats(min_value=-3.0, max_value=3.0, allow_nan=False))
    def test_equator_degeneracy(self, u):
        s = inverse_gnomonic(PlanePoint(u, 0.0), SphereCoord(0.0, 0.0))
        assert s.phi == 0.0
        assert abs(s.theta - math.atan(u)) <= 1e-15

    def test_frozen_reference_point(self):
        s = inverse_gnomonic(PlanePoint(0.1, 0.2), SphereCoord(0.3, 0.7))
        assert abs(s.theta - INV_REF_THETA) <= 1e-12
        assert abs(s.phi - INV_REF_PHI) <= 1e-12

    def test_atan_example(self):
        s = inverse_gnomonic(PlanePoint(0.37, 0.0), SphereCoord(0.0, 0.0))
        assert abs(s.theta - ATAN_037) <= 1e-15

    def test_pole_tangent_finite(self):
        s = inverse_gnomonic(PlanePoint(0.5, -0.25), SphereCoord(0.0, math.pi / 2))
        assert abs(s.phi) <= math.pi / 2
        assert math.isfinite(s.theta)


class TestForwardGnomonic:
    def test_tangency(self):
        p, visible = forward_gnomonic(SphereCoord(0.4, -0.2), SphereCoord(0.4, -0.2))
        assert visible
        assert abs(p.u) <= 1e-15 and abs(p.t) <= 1e-15

    def test_antipode_invisible(self):
        tangent = SphereCoord(0.4, 0.3)
        _, visible = forward_gnomonic(SphereCoord(0.4 - math.pi, -0.3), tangent)
        assert not visible

    def test_round_trip_reference(self):
        tangent = SphereCoord(0.3, 0.7)
        p, visible = forward_gnomonic(inverse_gnomonic(PlanePoint(0.1, 0.2), tangent), tangent)
        assert visible
        assert abs(p.u - 0.1) <= 1e-9
        assert abs(p.t - 0.2) <= 1e-9


class TestProjectionProperties:
    @settings(max_examples=200)
    @given(u=plane_box, t=plane_box, theta0=thetas, phi0=phis)
    def test_forward_inverts_inverse(self, u, t, theta0, phi0):
        tangent = SphereCoord(theta0, phi0)
        p, visible = forward_gnomonic(inverse_gnomonic(PlanePoint(u, t), tangent), tangent)
        assert visible
        assert abs(p.u - u) <= 1e-9
        assert abs(p.t - t) <= 1e-9

    @given(u=plane_box, t=plane_box, theta0=thetas, phi0=phis,
           delta=st.floats(min_value=-6.0, max_value=6.0, allow_nan=False))
    def test_azimuth_shift_equivariance(self, u, t, theta0, phi0, delta):
        p = PlanePoint(u, t)
        base = inverse_gnomonic(p, SphereCoord(theta0, phi0))
        shifted = inverse_gnomonic(p, SphereCoord(theta0 + delta, phi0))
        assert shifted.phi == base.phi
        assert circ_diff(shifted.theta, base.theta + delta) <= 1e-12

    @given(u=plane_box, t=plane_box, theta0=thetas, phi0=phis)
    def test_u_mirror_negates_azimuth_offset(self, u, t, theta0, phi0):
        tangent = SphereCoord(theta0, phi0)
        pos = inverse_gnomonic(PlanePoint(u, t), tangent)
        neg = inverse_gnomonic(PlanePoint(-u, t), tangent)
        assert neg.phi == pos.phi
        assert circ_diff(neg.theta - tangent.theta, -(pos.theta - tangent.theta)) <= 1e-12

    @given(u=plane_box, t=plane_box, theta0=thetas)
    def test_t_mirror_negates_elevation_at_equator(self, u, t, theta0):
        tangent = SphereCoord(theta0, 0.0)
        pos = inverse_gnomonic(PlanePoint(u, t), tangent)
        neg = inverse_gnomonic(PlanePoint(u, -t), tangent)
        assert neg.phi == -pos.phi


class TestSolidAngle:
    def test_full_sphere(self):
        spec = spec_2to1(512)
        mask = ValidMask.full(spec.width, spec.height, True)
        total = solid_angle_of_mask(mask, spec)
        assert abs(total - 4 * math.pi) / (4 * math.pi) <= 1e-3

    def test_empty(self):
        spec = spec_2to1(128)
        mask = ValidMask.full(spec.width, spec.height, False)
        assert solid_angle_of_mask(mask, spec) == 0.0

    def test_upper_hemisphere(self):
        spec = spec_2to1(512)
        bits = np.zeros((spec.height, spec.width), dtype=bool)
        bits[: spec.height // 2] = True
        total = solid_angle_of_mask(ValidMask.from_array(bits), spec)
        assert abs(total - 2 * math.pi) / (2 * math.pi) <= 1e-3

    def test_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(7)
        spec = EquirectSpec(32, 16)
        bits = rng.random((16, 32)) < 0.4
        total = solid_angle_of_mask(ValidMask.from_array(bits), spec)
        oracle = 0.0
        for r in range(16):
            for c in range(32):
                if bits[r, c]:
                    phi_c = math.pi / 2 - math.pi * (r + 0.5) / 16
                    oracle += spec.delta_theta * spec.delta_phi * math.cos(phi_c)
        assert abs(total - oracle) <= 1e-12

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DomainError):
            solid_angle_of_mask(ValidMask.full(64, 32, True), spec_2to1(512))


class TestDistortedKernelGrid:
    def test_center_entry_exact(self):
        spec = EquirectSpec(1024, 512)
        center = PixelCoord(321.25, 77.5)
        grid = distorted_kernel_grid(spec, 3, center)
        assert len(grid) == 9
        assert grid[4] is center

    def test_equator_is_nearly_regular(self):
        spec = EquirectSpec(1024, 512)
        center = PixelCoord(512.0, 256.0)
        grid = distorted_kernel_grid(spec, 3, center)
        worst = 0.0
        idx = 0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                p = grid[idx]
                worst = max(worst, abs(p.x - (center.x + dx)), abs(p.y - (center.y + dy)))
                idx += 1
        assert worst <= 0.01

    def test_off_equator_deviates(self):
        spec = EquirectSpec(1024, 512)
        center = PixelCoord(512.0, 64.0)  # an eighth of the height from the pole
        grid = distorted_kernel_grid(spec, 3, center)
        worst = 0.0
        idx = 0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                p = grid[idx]
                worst = max(worst, abs(p.x - (center.x + dx)), abs(p.y - (center.y + dy)))
                idx += 1
        assert worst > 0.1

    def test_near_pole_rows_widen_upward(self):
        spec = EquirectSpec(256, 128)
        center = PixelCoord(128.5, 2.5)
        k = 3
        grid = distorted_kernel_grid(spec, k, center)

        def row_spread(row):
            xs = [grid[row * k + i].x for i in range(k)]
            # unwrap around the center column before measuring extent
            dxs = [(x - center.x + spec.width / 2) % spec.width - spec.width / 2 for x in xs]
            return max(dxs) - min(dxs)

        assert row_spread(0) > row_spread(k - 1)

    def test_wraps_across_seam(self):
        spec = EquirectSpec(256, 128)
        center = PixelCoord(0.5, 3.5)
        grid = distorted_kernel_grid(spec, 3, center)
        xs = [p.x for p in grid]
        assert all(0.0 <= x < spec.width or x == spec.width for x in xs)
        assert any(abs(x - center.x) > spec.width / 2 for x in xs)

    def test_bad_arguments_rejected(self):
        spec = EquirectSpec(256, 128)
        with pytest.raises(DomainError):
            distorted_kernel_grid(spec, 4, PixelCoord(10.0, 10.0))
        with pytest.raises(DomainError):
            distorted_kernel_grid(spec, 1, PixelCoord(10.0, 10.0))
        with pytest.raises(DomainError):
            distorted_kernel_grid(spec, 3, PixelCoord(-1.0, 10.0))
