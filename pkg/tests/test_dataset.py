import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from aerialterrain import io
from aerialterrain.dataset import (
    ExtractionConfig,
    Frame,
    PatchRecord,
    Trajectory,
    View,
    build_patch_records,
    denormalize_value,
    evaluation_view,
    filter_straight_segments,
    load_records,
    make_folds,
    normalize_labels,
    protocol_folds,
    sample_pois,
    sample_training_view,
    save_records,
    validate_manifest,
)
from aerialterrain.errors import DegenerateRange, NoViews, TooFewRecords
from aerialterrain.geometry import Footprint
from aerialterrain.signals import MetricSeries, label_at_pose
from aerialterrain.simkit import AerialView, generate_scene, render_aerial_view, render_fpv
from aerialterrain.simkit.render import default_calibration, marker_corners


def line_traj(length=3.0, speed=1.0, n=None, yaw=0.0):
    n = n or int(length / speed * 5) + 1
    t = np.linspace(0, length / speed, n)
    s = np.linspace(0, length, n)
    return Trajectory(t, s * np.cos(yaw), s * np.sin(yaw), np.zeros(n), np.full(n, yaw))


def flat_labels(t0=-100.0, t1=100.0, slope=1.0):
    t = np.linspace(t0, t1, 401)
    return {k: MetricSeries(t, np.abs(slope * t) + i, k) for i, k in enumerate(("m_z", "m_omega", "m_p"))}


def make_record(pid, n_uav=1, n_ugv=0, labels=None, tag="all"):
    views = [View("uav", f"uav{j:05d}", float("nan"), np.full((8, 8), j, dtype=float)) for j in range(n_uav)]
    views += [View("ugv", f"ugv{j:05d}", 1.0 + j, np.full((8, 8), 100 + j, dtype=float)) for j in range(n_ugv)]
    labels = labels or {"m_z": float(pid), "m_omega": 2.0 * pid, "m_p": 100.0 + pid}
    return PatchRecord(pid, float(pid), 0.0, 0.0, 0.0, views, labels, {}, tag)


# --------------------------------------------------------------------------- straight segments


def test_straight_full_interval():
    t = np.arange(50) / 10.0
    assert filter_straight_segments(t, np.full(50, 1.5), np.full(50, 1.5)) == [(0.0, 4.9)]


def test_straight_turning_is_empty():
    t = np.arange(50) / 10.0
    assert filter_straight_segments(t, np.full(50, 1.5), np.full(50, 0.5)) == []


def test_straight_turn_straight_fixture():
    t = np.arange(100) / 10.0
    vl = np.full(100, 1.5)
    vr = np.full(100, 1.5)
    vl[30:60] = -0.3  # turning in place between t=3.0 s and t=5.9 s
    vr[30:60] = 0.3
    assert filter_straight_segments(t, vl, vr) == [(0.0, 2.9), (6.0, 9.9)]


def test_straight_requires_minimum_speed():
    t = np.arange(10) / 10.0
    assert filter_straight_segments(t, np.full(10, 0.05), np.full(10, 0.05)) == []


# --------------------------------------------------------------------------- POIs


def test_pois_on_straight_line():
    traj = line_traj(3.0)
    pois = sample_pois(traj, [(0.0, 3.0)], 0.3)
    assert len(pois) == 11
    np.testing.assert_allclose([p.arc_length for p in pois], np.arange(11) * 0.3, atol=1e-9)
    np.testing.assert_allclose([p.x for p in pois], np.arange(11) * 0.3, atol=1e-9)


def test_poi_timestamp_interpolated():
    traj = Trajectory([0.0, 1.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
    pois = sample_pois(traj, [(0.0, 1.0)], 0.25)
    assert pois[1].timestamp == pytest.approx(0.25)


def test_poi_yaw_interpolation_across_wrap():
    traj = Trajectory([0.0, 1.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0], [3.1, -3.1])
    pois = sample_pois(traj, [(0.0, 1.0)], 0.5)
    mid = pois[1].yaw
    # circular-mean oracle of the two endpoint headings
    oracle = np.angle(np.exp(3.1j) + np.exp(-3.1j))
    assert abs(np.angle(np.exp(1j * (mid - oracle)))) < 1e-9
    assert abs(abs(mid) - np.pi) < 0.05


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=3, max_size=8),
       st.floats(0.1, 0.7))
def test_poi_spacing_exact_within_interval(points, spacing):
    pts = np.array(points)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(seg < 1e-3):
        return
    t = np.concatenate([[0.0], np.cumsum(seg)])
    traj = Trajectory(t, pts[:, 0], pts[:, 1], np.zeros(len(t)), np.zeros(len(t)))
    pois = sample_pois(traj, [(0.0, t[-1])], spacing)
    arcs = np.array([p.arc_length for p in pois])
    np.testing.assert_allclose(np.diff(arcs), spacing, atol=1e-6)
    # every POI lies on the polyline at its arc length
    for p in pois:
        x, y, _ = traj.pose_at(p.arc_length)
        assert np.hypot(p.x - x, p.y - y) < 1e-6


def test_pois_restart_per_interval():
    traj = line_traj(6.0)
    pois = sample_pois(traj, [(0.0, 2.0), (3.0, 6.0)], 0.5)
    assert [p.arc_length for p in pois][:5] == pytest.approx([0, 0.5, 1.0, 1.5, 2.0])
    assert pois[5].arc_length == pytest.approx(3.0)
    assert [p.id for p in pois] == list(range(len(pois)))


# --------------------------------------------------------------------------- patch records


@pytest.fixture(scope="module")
def scene():
    return generate_scene(["quarry", "gravel"], {"kind": "halves"}, 3, 12.0, 12.0)


def aerial_frames(scene, traj, centers, gsd=0.02, size=400):
    frames = []
    calib = default_calibration()
    for k, (cx, cy, rot) in enumerate(centers):
        view = AerialView(cx, cy, rot, gsd, size, size)
        x, y, yaw = (float(a) for a in traj.pose_at(0.0))
        img = np.clip(np.rint(render_aerial_view(scene, view)), 0, 255)
        frames.append(Frame(f"uav{k:05d}", 0.0, "uav", None, marker_corners(view, x, y, yaw, calib.marker_perimeter),
                            img))
    return frames


def test_records_accumulate_aerial_views(scene):
    traj = Trajectory([0.0, 1.0], [6.0, 6.0], [3.0, 4.0], [0, 0], [np.pi / 2, np.pi / 2])
    pois = sample_pois(traj, [(0.0, 1.0)], 1.0)[:1]
    frames = aerial_frames(scene, traj, [(6.0, 3.0, 0.3), (5.5, 3.5, -1.0), (6.5, 2.5, 2.0)])
    recs = build_patch_records(pois, [], frames, default_calibration(), traj, flat_labels(), ExtractionConfig())
    assert len(recs) == 1
    assert len(recs[0].views_of("uav")) == 3
    assert recs[0].views_of("ugv") == []


def test_aerial_patch_matches_scene_texture(scene):
    traj = Trajectory([0.0, 1.0], [4.0, 4.5], [5.0, 5.0], [0, 0], [0.0, 0.0])
    pois = sample_pois(traj, [(0.0, 1.0)], 1.0)[:1]
    frames = aerial_frames(scene, traj, [(4.2, 5.1, 0.8)])
    cfg = ExtractionConfig()
    rec = build_patch_records(pois, [], frames, default_calibration(), traj, flat_labels(), cfg)[0]
    patch = rec.views[0].patch
    wx, wy = Footprint(pois[0].x, pois[0].y, pois[0].yaw, cfg.patch_side).sample_points(cfg.resolution)
    truth = scene.sample(wx, wy)
    assert np.mean(np.abs(patch - truth)) < 1.5
    assert np.corrcoef(patch.ravel(), truth.ravel())[0, 1] > 0.99


def test_poi_behind_ugv_camera_gets_no_ugv_view(scene):
    calib = default_calibration()
    traj = Trajectory([0.0, 2.0], [6.0, 8.0], [6.0, 6.0], [0, 0], [0.0, 0.0])
    pois = sample_pois(traj, [(0.0, 2.0)], 2.0)  # POIs at x = 6 (behind at t=2) and x = 8
    img = np.clip(np.rint(render_fpv(scene, (8.0, 6.0, 0.0), calib)), 0, 255)
    ugv = [Frame("ugv00000", 2.0, "ugv", None, None, img)]
    uav = aerial_frames(scene, traj, [(7.0, 6.0, 0.0)])
    recs = {r.poi_id: r for r in build_patch_records(pois, ugv, uav, calib, traj, flat_labels(), ExtractionConfig())}
    behind = recs[pois[0].id]
    assert behind.views_of("ugv") == []
    assert len(behind.views_of("uav")) == 1


def test_ugv_views_flag_comparison_distance(scene):
    calib = default_calibration()
    traj = Trajectory([0.0, 8.0], [1.0, 9.0], [6.0, 6.0], [0, 0], [0.0, 0.0])
    pois = sample_pois(traj, [(0.0, 8.0)], 0.5)
    img = np.clip(np.rint(render_fpv(scene, (1.0, 6.0, 0.0), calib)), 0, 255)
    ugv = [Frame("ugv00000", 0.0, "ugv", None, None, img)]
    recs = build_patch_records(pois, ugv, [], calib, traj, flat_labels(), ExtractionConfig(max_distance=5.0))
    dists = [v.camera_distance for r in recs for v in r.views]
    assert max(dists) > 5.0
    for r in recs:
        for v in r.comparison_views("ugv"):
            assert v.camera_distance <= 5.0
        for v in r.views:
            assert v.in_comparison == (v.camera_distance <= 5.0)


def test_record_labels_match_label_at_pose(scene):
    traj = Trajectory([0.0, 1.0], [6.0, 6.0], [3.0, 4.0], [0, 0], [np.pi / 2, np.pi / 2])
    pois = sample_pois(traj, [(0.0, 1.0)], 0.25)
    labels = flat_labels(slope=0.37)
    frames = aerial_frames(scene, traj, [(6.0, 3.5, 0.2)])
    recs = build_patch_records(pois, [], frames, default_calibration(), traj, labels)
    assert len(recs) == len(pois)
    for r in recs:
        for k, m in labels.items():
            assert r.labels[k] == label_at_pose(m, r.timestamp)


def test_unreadable_frame_is_skipped(scene, tmp_path, caplog):
    traj = Trajectory([0.0, 1.0], [6.0, 6.0], [3.0, 4.0], [0, 0], [np.pi / 2, np.pi / 2])
    pois = sample_pois(traj, [(0.0, 1.0)], 1.0)[:1]
    good = aerial_frames(scene, traj, [(6.0, 3.0, 0.3)])
    (tmp_path / "bad.png").write_bytes(b"not a png")
    bad = Frame("uav99999", 0.0, "uav", "bad.png", good[0].marker_corners)
    recs = build_patch_records(pois, [], good + [bad], default_calibration(), traj, flat_labels(),
                               frame_root=tmp_path)
    assert len(recs[0].views) == 1
    assert "unreadable" in caplog.text


# --------------------------------------------------------------------------- normalisation


def recs_with(values):
    return [make_record(i, labels={"m_z": v, "m_omega": v, "m_p": v}) for i, v in enumerate(values)]


def test_normalize_example():
    out, stats = normalize_labels(recs_with([2.0, 4.0, 6.0]))
    assert [r.labels_norm["m_z"] for r in out] == [0.0, 0.5, 1.0]
    assert stats["m_z"] == (2.0, 6.0)


def test_normalize_clamps_with_training_stats():
    out, _ = normalize_labels(recs_with([8.0]), {"m_z": (2.0, 6.0), "m_omega": (2.0, 6.0), "m_p": (2.0, 6.0)})
    assert out[0].labels_norm["m_z"] == 1.0


def test_normalize_degenerate():
    with pytest.raises(DegenerateRange):
        normalize_labels(recs_with([3.0, 3.0, 3.0]))


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20, unique=True))
def test_normalize_idempotent_and_invertible(values):
    recs = recs_with(values)
    once, stats = normalize_labels(recs)
    twice, _ = normalize_labels(once, stats)
    assert [r.labels_norm for r in once] == [r.labels_norm for r in twice]
    lo, hi = stats["m_z"]
    for r in once:
        assert 0.0 <= r.labels_norm["m_z"] <= 1.0
        assert denormalize_value(r.labels_norm["m_z"], lo, hi) == pytest.approx(r.labels["m_z"], abs=1e-9 * max(1, hi - lo))


# --------------------------------------------------------------------------- folds


def test_folds_equal_sizes():
    folds = make_folds([make_record(i) for i in range(100)], 10, seed=3)
    assert [len(folds.members(f)) for f in range(10)] == [10] * 10


def test_folds_deterministic():
    recs = [make_record(i) for i in range(37)]
    assert make_folds(recs, 5, 9).assignment == make_folds(recs, 5, 9).assignment
    assert make_folds(recs, 5, 9).assignment != make_folds(recs, 5, 10).assignment


@given(st.integers(2, 12), st.integers(0, 60), st.integers(0, 2**32 - 1))
def test_folds_partition(k, extra, seed):
    ids = list(range(5, 5 + k + extra))
    folds = make_folds(ids, k, seed)
    assert set(folds.assignment) == set(ids)
    sizes = [len(folds.members(f)) for f in range(k)]
    assert sum(sizes) == len(ids)
    assert max(sizes) - min(sizes) <= 1


def test_folds_too_few():
    with pytest.raises(TooFewRecords):
        make_folds([make_record(i) for i in range(3)], 5)


def test_protocols():
    recs = [make_record(i) for i in range(50)]
    paper = protocol_folds(recs, "paper-90-10", 0)
    assert paper.k == 10 and paper.eval_folds == (0, 1, 2, 3, 4)
    plain = protocol_folds(recs, "kfold-5", 0)
    assert plain.k == 5 and plain.eval_folds == (0, 1, 2, 3, 4)


def test_fold_dict_round_trip():
    folds = protocol_folds([make_record(i) for i in range(30)], "paper-90-10", 4)
    again = type(folds).from_dict(folds.to_dict())
    assert again == folds


# --------------------------------------------------------------------------- view sampling


def test_single_view_always_chosen():
    rec = make_record(0, n_uav=1)
    rng = np.random.default_rng(0)
    assert all(sample_training_view(rec, "uav", rng) is rec.views[0].patch for _ in range(20))


def test_view_sampling_uniform():
    rec = make_record(0, n_uav=4)
    rng = np.random.default_rng(1)
    draws = [int(sample_training_view(rec, "uav", rng)[0, 0]) for _ in range(10_000)]
    counts = np.bincount(draws, minlength=4)
    np.testing.assert_allclose(counts / 10_000, 0.25, atol=0.02)
    assert stats.chisquare(counts).pvalue > 0.01


def test_view_sampling_missing_source():
    with pytest.raises(NoViews):
        sample_training_view(make_record(0, n_uav=2), "ugv", np.random.default_rng(0))


def test_evaluation_view_is_first_by_frame_id():
    rec = make_record(0, n_uav=3)
    rec.views.reverse()
    assert evaluation_view(rec, "uav").frame_id == "uav00000"


# --------------------------------------------------------------------------- storage


def test_save_load_round_trip(tmp_path):
    recs = [make_record(i, n_uav=2, n_ugv=1, tag="quarry") for i in range(4)]
    manifest = save_records(recs, tmp_path)
    validate_manifest(manifest)
    back = load_records(tmp_path)
    assert [r.poi_id for r in back] == [0, 1, 2, 3]
    for a, b in zip(recs, back):
        assert a.labels == b.labels and a.tag == b.tag
        for va, vb in zip(a.views, b.views):
            assert va.frame_id == vb.frame_id
            np.testing.assert_array_equal(va.patch, vb.patch)
    assert (tmp_path / "patches" / "0" / "uav_uav00000.png").exists()


@pytest.mark.parametrize("mutate", [
    lambda m: m.pop("version"),
    lambda m: m["records"][0].pop("labels"),
    lambda m: m["records"][0]["labels"].update(m_z=float("nan")),
    lambda m: m["records"][0]["views"].clear(),
    lambda m: m["records"][0]["views"][0].update(source="drone"),
])
def test_manifest_schema_violations(tmp_path, mutate):
    manifest = save_records([make_record(0)], tmp_path)
    mutate(manifest)
    with pytest.raises(io.InputError):
        validate_manifest(manifest)
