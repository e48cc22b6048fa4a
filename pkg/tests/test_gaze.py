import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from meshsal.gaze import (
    STATIC, Fixation, GazeError, GazeLog, GazeLogError, GazeSample, IVTParams, KernelParams,
    RotationSchedule, SaliencyMap, Scenario, Target, ZeroSaliencyError, classify_fixations,
    closest_point_on_triangle, intersect_log, model_to_world, read_gaze_log, read_saliency,
    read_scenario, smooth_fixations, synth_gaze, world_to_model, write_gaze_log, write_saliency,
)
from meshsal.raycast import Ray, build_bvh
from meshsal.shapes import cube, grid, icosphere

from oracles import brute_force_hits, rodrigues

RATE = 120.0
PERIOD = 1000.0 / RATE
EYE = np.array([0.0, 0.0, 2.0])


@pytest.fixture(scope="module")
def board():
    # 20x20 grid of side 2 centered at the origin, facing +z (towards EYE)
    g = grid(20, 20, size=(2.0, 2.0))
    return g.with_geometry(g.vertices - [1.0, 1.0, 0.0])


def _log(times, dirs, eye=EYE):
    n = len(times)
    return GazeLog(times, np.tile(eye, (n, 1)), dirs, np.tile(eye, (n, 1)), np.tile([0, 0, -1.0], (n, 1)))


def _toward(p, eye=EYE):
    d = np.asarray(p, float) - eye
    return d / np.linalg.norm(d)


def _fix(mesh, face, duration=200.0, eye=EYE):
    p = mesh.face_centers[face]
    return Fixation(face, (1 / 3, 1 / 3, 1 / 3), p, 0.0, duration, duration, float(np.linalg.norm(p - eye)),
                    eye, _toward(p, eye))


# ------------------------------------------------------------- rotation


def test_rotation_identity_at_t0():
    s = GazeSample(1234.0, np.array([0.1, 0.2, -3.0]), np.array([0, 0, 1.0]))
    r = world_to_model(s, RotationSchedule(t0=1234.0))
    np.testing.assert_array_equal(r.origin, s.gaze_origin)
    np.testing.assert_array_equal(r.direction, s.gaze_direction)


def test_rotation_full_turn():
    s = GazeSample(24000.0, np.array([0.3, -0.2, -5.0]), np.array([0.6, 0, 0.8]))
    r = world_to_model(s, RotationSchedule())
    np.testing.assert_allclose(r.origin, s.gaze_origin, atol=1e-9)
    np.testing.assert_allclose(r.direction, s.gaze_direction, atol=1e-9)


def test_rotation_quarter_turn():
    s = GazeSample(6000.0, np.array([0, 0, -5.0]), np.array([0, 0, 1.0]))
    r = world_to_model(s, RotationSchedule())
    oracle = Rotation.from_rotvec(np.radians(90.0) * np.array([0, 1.0, 0])).as_matrix()
    np.testing.assert_allclose(r.origin, oracle @ s.gaze_origin, atol=1e-9)
    np.testing.assert_allclose(r.origin, [-5, 0, 0], atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_schedule_matches_rotation_oracle(seed):
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    sch = RotationSchedule(tuple(axis), float(rng.uniform(0, 90)), int(rng.choice([-1, 1])), float(rng.uniform(0, 1000)))
    t = float(rng.uniform(sch.t0, sch.t0 + 60000))
    deg = sch.sign * sch.angular_speed * (t - sch.t0) / 1000
    np.testing.assert_allclose(sch.model_to_world_matrix(t), rodrigues(axis, deg), atol=1e-12)
    scipy_R = Rotation.from_rotvec(np.radians(deg) * axis / np.linalg.norm(axis)).as_matrix()
    np.testing.assert_allclose(sch.world_to_model_matrix(t), scipy_R.T, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip(seed):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=3)
    s = GazeSample(float(rng.uniform(0, 1e5)), rng.normal(size=3) * 3, d / np.linalg.norm(d))
    sch = RotationSchedule()
    back = model_to_world(world_to_model(s, sch), s.timestamp, sch)
    np.testing.assert_allclose(back.origin, s.gaze_origin, atol=1e-9)
    np.testing.assert_allclose(back.direction, s.gaze_direction, atol=1e-9)


def test_schedule_validation():
    with pytest.raises(ValueError):
        RotationSchedule(angular_speed=-1)
    with pytest.raises(GazeError):
        world_to_model(GazeSample(-1.0, np.zeros(3), np.array([0, 0, 1.0])), RotationSchedule())


# ------------------------------------------------------------- log container and files


def test_log_validation():
    with pytest.raises(GazeError):
        _log([0.0, 0.0], [[0, 0, 1.0]] * 2)
    with pytest.raises(GazeError):
        _log([0.0, 1.0], [[0, 0, 1.0], [0, 0, 0]])
    g = _log([0.0], [[0, 0, 2.0]])
    np.testing.assert_array_equal(g.directions[0], [0, 0, 1])


def test_log_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    d = rng.normal(size=(10, 3))
    g = _log(np.arange(10) * PERIOD, d / np.linalg.norm(d, axis=1, keepdims=True))
    write_gaze_log(tmp_path / "g.csv", g)
    r = read_gaze_log(tmp_path / "g.csv")
    for k in ("timestamps", "origins", "directions", "head_positions", "head_directions"):
        np.testing.assert_array_equal(getattr(r, k), getattr(g, k))


@pytest.mark.parametrize("body, line, msg", [
    ("", 0, "no samples"),
    ("t_ms,ox,oy,oz,dx,dy,dz,hx,hy,hz,hdx,hdy,hdz\n", 0, "no samples"),
    ("t_ms,ox\n", 1, "header"),
    ("t_ms,ox,oy,oz,dx,dy,dz,hx,hy,hz,hdx,hdy,hdz\n0,0,0,0,0,0,1,0,0,0,0,0,1\n1,0,0,0,0,0,x,0,0,0,0,0,1\n", 3, "non-numeric"),
    ("t_ms,ox,oy,oz,dx,dy,dz,hx,hy,hz,hdx,hdy,hdz\n5,0,0,0,0,0,1,0,0,0,0,0,1\n5,0,0,0,0,0,1,0,0,0,0,0,1\n", 3, "increasing"),
    ("t_ms,ox,oy,oz,dx,dy,dz,hx,hy,hz,hdx,hdy,hdz\n5,0,0,0,0,0,0,0,0,0,0,0,1\n", 2, "norm"),
])
def test_log_file_errors(tmp_path, body, line, msg):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(GazeLogError, match=msg) as ei:
        read_gaze_log(p)
    assert ei.value.lineno == line


def test_saliency_file_round_trip(tmp_path):
    m = SaliencyMap(np.array([0.0, 1.5e-7, 0.25, 3.0]))
    write_saliency(tmp_path / "s.csv", m)
    assert (tmp_path / "s.csv").read_text().splitlines()[:3] == ["face_index,value", "0,0", "1,1.5e-07"]
    np.testing.assert_allclose(read_saliency(tmp_path / "s.csv").values, m.values, rtol=1e-9)


def test_scenario_file(tmp_path):
    p = tmp_path / "sc.txt"
    p.write_text("saccade_ms=40\nnoise_deg=0.1\neye=0,0,-3\nface,duration_ms\n5,300\n7,250,1,0,0\n")
    sc = read_scenario(p)
    assert sc.saccade_ms == 40 and sc.eye == (0, 0, -3)
    assert sc.targets == (Target(5, 300.0), Target(7, 250.0, (1.0, 0.0, 0.0)))
    p.write_text("bogus=1\n5,300\n")
    with pytest.raises(GazeLogError):
        read_scenario(p)


# ------------------------------------------------------------- intersection


def test_intersect_hit_and_miss(board):
    g = _log([0.0, PERIOD], [_toward([0.05, 0.05, 0]), [0, 0, 1.0]])
    h = intersect_log(g, board, schedule=STATIC)
    assert h.face[0] >= 0 and h.face[1] == -1


def test_back_facing_dropped(board):
    eye = np.array([0.0, 0.0, -2.0])
    g = _log([0.0], [[0, 0, 1.0]], eye=eye)
    assert intersect_log(g, board, schedule=STATIC).face[0] == -1


def test_empty_log(board):
    with pytest.raises(GazeError, match="no samples"):
        intersect_log(_log([], np.zeros((0, 3))), board, schedule=STATIC)


def test_rotating_cube_face_sequence():
    m = cube()
    sch = RotationSchedule()
    eye = np.array([0.3, 0.1, -4.0])
    d = _toward([0.0, 0.05, 0.0], eye)
    times = np.arange(0, 24000, 250.0)
    g = _log(times, np.tile(d, (len(times), 1)), eye=eye)
    h = intersect_log(g, m, schedule=sch)
    # oracle: rotate the ray with an independent matrix and scan every face
    exp = []
    for t in times:
        R = rodrigues([0, 1, 0], 15.0 * t / 1000.0)  # inverse of the clockwise turn
        f, _ = brute_force_hits(m.vertices, m.faces, (R @ eye)[None], (R @ d)[None])
        exp.append(f[0])
    assert np.array_equal(h.face, exp)
    assert len(set(exp)) >= 8  # a full turn visits all four side walls


# ------------------------------------------------------------- I-VT


def _hits(board, times, dirs):
    return intersect_log(_log(times, dirs), board, schedule=STATIC)


def test_constant_gaze_one_fixation(board):
    times = np.arange(36) * PERIOD
    d = _toward(board.face_centers[300])
    fx = classify_fixations(_hits(board, times, np.tile(d, (36, 1))), board)
    assert len(fx) == 1
    assert fx[0].face == 300
    assert abs(fx[0].duration - 300) <= PERIOD
    assert fx[0].duration == pytest.approx(fx[0].end - fx[0].start)
    assert sum(fx[0].barycentric) == pytest.approx(1, abs=1e-9)


def _rotate_toward(d, axis, deg):
    return Rotation.from_rotvec(np.radians(deg) * axis).apply(d)


def test_two_dwells_with_saccade(board):
    # 300 ms dwell, 50 ms saccade at 200 deg/s (10 degrees), 300 ms dwell
    d0 = _toward([-0.18, 0.0, 0.0])
    axis = np.array([0, 1.0, 0])
    n_dw, n_sac = 36, 6
    dirs = [d0] * n_dw
    dirs += [_rotate_toward(d0, axis, 200.0 * (k + 1) * PERIOD / 1000) for k in range(n_sac)]
    dirs += [dirs[-1]] * n_dw
    times = np.arange(len(dirs)) * PERIOD
    fx = classify_fixations(_hits(board, times, np.array(dirs)), board)
    assert len(fx) == 2


def test_sweep_no_fixations(board):
    d0 = _toward([-0.6, 0.0, 0.0])
    axis = np.array([0, 1.0, 0])
    times = np.arange(60) * PERIOD
    dirs = np.array([_rotate_toward(d0, axis, 45.0 * t / 1000) for t in times])
    assert classify_fixations(_hits(board, times, dirs), board) == []


def test_short_dwell_discarded(board):
    times = np.arange(10) * PERIOD  # 83 ms
    d = _toward(board.face_centers[10])
    assert classify_fixations(_hits(board, times, np.tile(d, (10, 1))), board) == []


def test_gap_splits_segment(board):
    d = _toward(board.face_centers[300])
    times = np.concatenate([np.arange(20) * PERIOD, 1000 + np.arange(20) * PERIOD])
    fx = classify_fixations(_hits(board, times, np.tile(d, (40, 1))), board)
    # same spot but 830 ms apart: not merged
    assert len(fx) == 2


def test_closest_point_regions():
    a, b, c = np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    for p, q in [([0.2, 0.2, 1], [0.2, 0.2, 0]), ([-1, -1, 0], [0, 0, 0]), ([2, -1, 0], [1, 0, 0]),
                 ([1, 1, 0], [0.5, 0.5, 0]), ([0.5, -1, 0], [0.5, 0, 0])]:
        got, w = closest_point_on_triangle(np.array(p, float), a, b, c)
        np.testing.assert_allclose(got, q, atol=1e-12)
        np.testing.assert_allclose(np.asarray(w) @ np.array([a, b, c]), q, atol=1e-12)


# ------------------------------------------------------------- smoothing


def test_single_fixation_argmax(board):
    for k in (0, 137, 421):
        assert int(np.argmax(smooth_fixations([_fix(board, k)], board).values)) == k


def test_no_fixations():
    with pytest.raises(ZeroSaliencyError):
        smooth_fixations([], cube())


def test_two_distant_equal_fixations(board):
    m = smooth_fixations([_fix(board, 42), _fix(board, 757)], board)
    assert m.values[42] == pytest.approx(m.values[757], abs=1e-9)
    assert m.values.sum() == pytest.approx(1, abs=1e-9)


def test_kernel_direct_oracle(board):
    fx = _fix(board, 300, duration=150.0)
    m = smooth_fixations([fx], board, KernelParams(normalize=False))
    sigma = fx.mean_view_distance * math.tan(math.radians(1.0))
    d2 = ((board.face_centers - fx.surface_point) ** 2).sum(1)
    ref = np.where(d2 <= 9 * sigma ** 2, 150.0 * np.exp(-d2 / (2 * sigma ** 2)), 0.0)
    np.testing.assert_allclose(m.values, ref, rtol=1e-12, atol=0)


def test_duration_scaling_invariance(board):
    fs = [_fix(board, 40, 120.0), _fix(board, 300, 480.0)]
    scaled = [_fix(board, 40, 120.0 * 7.5), _fix(board, 300, 480.0 * 7.5)]
    np.testing.assert_allclose(smooth_fixations(fs, board).values, smooth_fixations(scaled, board).values, atol=1e-9)


def test_back_faces_get_nothing():
    s = icosphere(2)
    eye = np.array([0, 0, -3.0])
    f = int(np.argmin(s.face_centers[:, 2]))
    m = smooth_fixations([_fix(s, f, eye=eye)], s, KernelParams(sigma_deg=60, truncate=10))
    assert np.all(m.values[s.face_normals[:, 2] > 0.5] == 0)


# ------------------------------------------------------------- synthetic gaze


def test_synth_static_single_target(board):
    sc = Scenario((Target(250, 500.0),), eye=tuple(EYE))
    g, dwells = synth_gaze(sc, board, STATIC, RATE, 0)
    assert len(g) == 60 and dwells[0].face == 250
    assert np.all(intersect_log(g, board, schedule=STATIC).face == 250)


def test_synth_rotating_tracked():
    s = icosphere(3)
    eye = (0.0, 0.0, -4.0)
    f = int(np.argmin(s.face_centers[:, 2]))
    sc = Scenario((Target(f, 1500.0),), eye=eye)
    sch = RotationSchedule()
    g, _ = synth_gaze(sc, s, sch, RATE, 0)
    assert np.all(intersect_log(g, s, schedule=sch).face == f)
    # the world-frame direction really moves
    assert np.degrees(np.arccos(np.clip(g.directions[0] @ g.directions[-1], -1, 1))) > 1


def test_synth_noise_hit_rate_monotone(board):
    rates = []
    for noise in (0.0, 0.5, 2.0, 5.0):
        sc = Scenario((Target(230, 3000.0),), noise_deg=noise, eye=tuple(EYE))
        g, _ = synth_gaze(sc, board, STATIC, RATE, np.random.default_rng(4))
        rates.append(np.mean(intersect_log(g, board, schedule=STATIC).face == 230))
    assert rates[0] == 1.0
    assert all(a >= b for a, b in zip(rates, rates[1:])) and rates[-1] < 0.5


def test_synth_invalid_face(board):
    with pytest.raises(IndexError):
        synth_gaze(Scenario((Target(10**6, 100.0),)), board, STATIC)


def test_synth_recovery(board):
    sc = Scenario((Target(45, 400.0), Target(210, 300.0), Target(365, 250.0)), eye=tuple(EYE))
    g, dwells = synth_gaze(sc, board, STATIC, RATE, 0)
    fx = classify_fixations(intersect_log(g, board, schedule=STATIC), board)
    assert [f.face for f in fx] == [d.face for d in dwells]
    for f, d in zip(fx, dwells):
        assert abs(f.start - d.start) <= 2 * PERIOD
