import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import deg, down, mp
from scanplan.geometry import MeasurementPoint
from scanplan.scenarios import box_mesh
from scanplan.uncertainty import UncertaintyBudget, expanded_uncertainty
from scanplan.visibility import (
    AlwaysAccessible,
    Scene,
    SensorBody,
    SensorModel,
    ShellConeOracle,
    Viewpoint,
    VisibilityModel,
    collides,
    determination_set,
    frustum_contains,
    frustum_mask,
    incident_angle,
    robot_accessible,
)

S = SensorModel()


def test_sensor_model_defaults():
    assert S.far_width == 160.0
    assert (S.near_depth, S.far_depth) == (200.0, 300.0)
    with pytest.raises(ValueError):
        SensorModel(near_fov=(200, 60))


def test_frustum_examples():
    vp = down(0, (0, 0, 250))
    assert frustum_contains(S, vp, (0, 0, 0))
    assert not frustum_contains(S, vp, (0, 0, 260))  # behind
    assert not frustum_contains(S, vp, (0, 0, 250 - 301))  # past far plane
    assert frustum_contains(S, vp, (0, 0, 250 - 300))


def test_frustum_widths_follow_depth():
    vp = down(0, (0, 0, 0))
    # at the near plane the half width is 45 along the sensor x axis
    x = vp.frame[:, 0]
    y = vp.frame[:, 1]
    z = vp.frame[:, 2]
    assert frustum_contains(S, vp, 200 * z + 44.9 * x)
    assert not frustum_contains(S, vp, 200 * z + 45.1 * x)
    assert frustum_contains(S, vp, 300 * z + 79.9 * x)
    assert frustum_contains(S, vp, 300 * z + 44.9 * y)
    assert not frustum_contains(S, vp, 300 * z + 45.1 * y)


def test_roll_swaps_width_and_height():
    # half extents at depth 250: width 62.5, height 37.5
    p = np.array([50.0, 0.0, 0.0])
    vp0 = down(0, (0, 0, 250))
    vp90 = down(1, (0, 0, 250), roll=math.pi / 2)
    assert frustum_contains(S, vp0, p) != frustum_contains(S, vp90, p)


def test_frustum_mask_matches_scalar():
    r = np.random.default_rng(1)
    vp = Viewpoint(0, (10, -5, 260), (0.1, 0.2, -np.sqrt(1 - 0.05)), 0.3)
    pts = r.uniform(-150, 150, size=(500, 3))
    mask = frustum_mask(S, vp, pts)
    assert mask.any()
    assert list(mask) == [frustum_contains(S, vp, p) for p in pts]


def test_incident_angle_examples():
    vp = down(0, (0, 0, 250))
    assert incident_angle(vp, mp("a", (0, 0, 0))) == pytest.approx(0.0, abs=1e-12)
    assert incident_angle(vp, mp("a", (0, 0, 0), (1, 0, 0))) == pytest.approx(math.pi / 2)
    n = (0, math.sin(deg(30)), math.cos(deg(30)))
    assert incident_angle(vp, mp("a", (0, 0, 0), n), mode="axis") == pytest.approx(math.pi / 6)
    assert incident_angle(vp, mp("a", (0, 0, 0), n)) == pytest.approx(math.pi / 6)


def test_beam_angle_differs_off_axis():
    vp = down(0, (0, 0, 250))
    off = mp("a", (60, 0, 0))
    beam = incident_angle(vp, off)
    assert beam == pytest.approx(math.atan2(60, 250))
    assert incident_angle(vp, off, mode="axis") == pytest.approx(0.0, abs=1e-12)


def test_fold_keeps_angle_in_quarter_turn():
    vp = down(0, (0, 0, 250))
    # a normal facing away from the sensor folds to the same angle
    assert incident_angle(vp, mp("a", (0, 0, 0), (0, 0, -1))) == pytest.approx(0.0, abs=1e-12)


def test_accessibility_examples():
    o = ShellConeOracle(base=(0, 0, 0), r_min=200, r_max=1300)
    assert not robot_accessible(o, down(0, (0, 0, 0)))
    assert robot_accessible(o, down(0, (0, 0, 750)))
    assert not robot_accessible(o, down(0, (0, 0, 1301)))
    assert robot_accessible(o, down(0, (0, 0, 1300)))
    narrow = ShellConeOracle(base=(0, 0, 0), r_min=200, r_max=1300, cone_half_angle=deg(10))
    tilted = Viewpoint(0, (0, 0, 750), (math.sin(deg(20)), 0, -math.cos(deg(20))))
    assert not robot_accessible(narrow, tilted)
    assert robot_accessible(AlwaysAccessible(), tilted)


def test_collision_examples(plate):
    scene = Scene.from_meshes(plate)
    body = SensorBody()
    assert not collides(scene, body, down(0, (50, 50, 250)))
    # body centre on the plate: the box straddles z = 0
    assert collides(scene, body, down(0, (50, 50, -body.offset)))
    # lowest box face exactly one clearance above the plate: touching is allowed
    assert not collides(scene, body, down(0, (50, 50, body.clearance)))
    assert collides(scene, body, down(0, (50, 50, body.clearance - 1e-6)))


def test_collision_with_tilted_box():
    block = box_mesh((-10, -10, 0), (10, 10, 100))
    scene = Scene.from_meshes(block)
    body = SensorBody(size=(40, 40, 100), offset=50, clearance=0)
    # looking along -x, the box sits behind the viewpoint: x in [px, px + 100]
    assert collides(scene, body, Viewpoint(0, (5, 0, 50), (-1, 0, 0)))
    assert not collides(scene, body, Viewpoint(0, (10, 0, 50), (-1, 0, 0)))
    assert not collides(scene, body, Viewpoint(0, (40, 0, 50), (-1, 0, 0)))


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 200), st.floats(0, 40), st.floats(0, 40))
def test_shrinking_clearance_never_adds_collisions(z, c1, c2):
    from scanplan.scenarios import heightfield

    scene = Scene.from_meshes(heightfield(100.0, 100.0, 2, 2))
    big, small = max(c1, c2), min(c1, c2)
    vp = down(0, (50, 50, z))
    if collides(scene, SensorBody(clearance=small), vp):
        assert collides(scene, SensorBody(clearance=big), vp)


def test_empty_scene_never_collides():
    assert not collides(Scene.from_meshes(), SensorBody(), down(0, (0, 0, 0)))


# -- determination set -----------------------------------------------------


def test_determination_examples(model, curve):
    head_on = mp("a", (50, 50, 0))
    vp = down(0, (50, 50, 250))
    vs = determination_set(vp, [head_on], {"a": deg(60)}, model)
    assert vs.mp_ids == ("a",) and vs.n == 1
    assert vs.u_sen[0] == pytest.approx(0.04)

    class Never:
        def accessible(self, vp):
            return False

    blocked = VisibilityModel(model.sensor, curve, model.scene, oracle=Never())
    assert determination_set(vp, [head_on], {"a": deg(60)}, blocked).n == 0

    steep = mp("b", (50, 50, 0), (math.sin(deg(80)), 0, math.cos(deg(80))))
    assert determination_set(vp, [steep], {"b": deg(60)}, model).n == 0


def test_determination_collision_gate(model):
    vp = down(0, (50, 50, 5))  # sensor body sits on the plate
    assert determination_set(vp, [mp("a", (50, 50, 0))], [deg(60)], model).n == 0


def test_angle_gate_is_inclusive(model):
    vp = down(0, (50, 50, 250))
    target = mp("a", (50 + 250 * math.tan(deg(10)), 50, 0))
    ang = incident_angle(vp, target)
    assert determination_set(vp, [target], [ang], model).n == 1
    assert determination_set(vp, [target], [ang - 1e-6], model).n == 0


def test_permutation_invariance_and_rule(model, curve):
    r = np.random.default_rng(3)
    mps = [mp(f"m{i}", (r.uniform(0, 100), r.uniform(0, 100), 0), tol=r.uniform(0.8, 2.0))
           for i in range(25)]
    budgets = {m.id: UncertaintyBudget.derive(m.tolerance, curve) for m in mps}
    alpha = {k: b.alpha_max for k, b in budgets.items()}
    vp = Viewpoint(0, (40, 60, 240), (0.1, -0.1, -math.sqrt(0.98)))
    a = determination_set(vp, mps, alpha, model)
    b = determination_set(vp, list(reversed(mps)), alpha, model)
    assert a == b and a.n > 0
    for mid, u in zip(a.mp_ids, a.u_sen):
        bud = budgets[mid]
        assert expanded_uncertainty(u, bud.k, bud.u_mat, bud.u_rot) <= bud.tolerance / 8 + 1e-9
