import json
import math
from dataclasses import replace

import pytest

from followsim.control import SEARCH
from followsim.harness import (
    LOG_FIELDS,
    TARGET_ID,
    VARIANT_PRESETS,
    ScenarioSpec,
    VariantConfig,
    compute_metrics,
    default_scenario,
    log_header,
    read_tick_log,
    run_suite,
    run_trial,
    summary_csv,
    summary_table,
    write_tick_log,
)
from followsim.world import ConfigError, PersonState, WorldConfig


class TestVariantPresets:
    # the published ablation matrix: (motion, torso, face, servo, planning)
    MATRIX = {
        "ours_wo_reid": (True, False, False, True, True),
        "ours_wo_motion": (False, True, True, True, True),
        "ours_wo_torso": (True, False, True, True, True),
        "ours_wo_face": (True, True, False, True, True),
        "ours_wo_visualservo": (True, True, True, False, True),
        "ours_wo_pathplanning": (True, True, True, True, False),
        "ours": (True, True, True, True, True),
    }

    def test_seven_presets_exactly(self):
        assert set(VARIANT_PRESETS) == set(self.MATRIX)

    @pytest.mark.parametrize("name", sorted(MATRIX))
    def test_preset_flags(self, name):
        v = VARIANT_PRESETS[name]
        assert (v.use_motion_tracker, v.use_torso_id, v.use_face_id,
                v.use_visual_servo, v.use_path_planning) == self.MATRIX[name]

    def test_reid_enabled_property(self):
        assert not VARIANT_PRESETS["ours_wo_reid"].reid_enabled
        assert VARIANT_PRESETS["ours_wo_torso"].reid_enabled


def hand_log(rows_spec, tick_rate=30.0, give_up=15.0, wrong_min=1.0):
    """rows_spec: list of (mode, v_act, ax, ay, tx, ty, followed, min_range)."""
    header = {
        "seed": 0, "variant": "test", "config_sha256": "",
        "tick_rate": tick_rate, "give_up_after": give_up,
        "wrong_person_min_duration": wrong_min, "target_id": TARGET_ID,
        "fields": LOG_FIELDS,
    }
    rows = []
    for t, (mode, v, ax, ay, tx, ty, followed, mr) in enumerate(rows_spec):
        rows.append([t, mode, "rgbd", 1, 0, v, 0.0, ax, ay, 0.0, v, tx, ty, 0.0,
                     9.0, 9.0, 0.0, followed, mr, 0])
    return header, rows


class TestComputeMetrics:
    def test_constant_speed(self):
        header, rows = hand_log([("FOLLOW_RGBD", 1.0, 0, 0, 1, 0, 1, 2.0)] * 10)
        r = compute_metrics(rows, header)
        assert r.avg_speed == pytest.approx(1.0)

    def test_search_excluded_from_speed_and_distance(self):
        spec = [("FOLLOW_RGBD", 1.0, 0, 0, 1, 0, 1, 2.0),
                (SEARCH, 0.0, 0, 0, 5, 0, -1, 2.0)] * 5
        header, rows = hand_log(spec)
        r = compute_metrics(rows, header)
        assert r.avg_speed == pytest.approx(1.0)
        assert r.avg_follow_distance == pytest.approx(1.0)

    def test_hand_built_ten_tick_log(self):
        # spreadsheet-style oracle over a 10-tick log with known values
        spec = [
            ("FOLLOW_RGBD", 0.5, 0.0, 0.0, 3.0, 4.0, 1, 1.0),   # dist 5
            ("FOLLOW_RGBD", 1.0, 0.0, 0.0, 0.0, 2.0, 1, 0.8),   # dist 2
            (SEARCH, 0.7, 0.0, 0.0, 9.0, 9.0, -1, 0.6),
            ("FOLLOW_FISHEYE", 1.5, 1.0, 1.0, 1.0, 2.0, 1, 1.2),  # dist 1
            ("FOLLOW_RGBD", 0.0, 0.0, 0.0, 1.0, 0.0, 2, 1.4),   # dist 1, wrong truth
            (SEARCH, 0.0, 0.0, 0.0, 9.0, 9.0, -1, 1.0),
            ("FOLLOW_RGBD", 0.5, 0.0, 0.0, 2.0, 0.0, 1, 2.0),   # dist 2
            ("FOLLOW_RGBD", 0.5, 0.0, 0.0, 2.0, 0.0, 1, 2.0),
            (SEARCH, 0.0, 0.0, 0.0, 9.0, 9.0, -1, 3.0),
            ("FOLLOW_RGBD", 1.0, 0.0, 0.0, 4.0, 3.0, 1, 1.0),   # dist 5
        ]
        header, rows = hand_log(spec)
        r = compute_metrics(rows, header)
        follow_speeds = [0.5, 1.0, 1.5, 0.0, 0.5, 0.5, 1.0]
        follow_dists = [5.0, 2.0, 1.0, 1.0, 2.0, 2.0, 5.0]
        all_ranges = [1.0, 0.8, 0.6, 1.2, 1.4, 1.0, 2.0, 2.0, 3.0, 1.0]
        assert r.avg_speed == pytest.approx(sum(follow_speeds) / 7)
        assert r.avg_follow_distance == pytest.approx(sum(follow_dists) / 7)
        assert r.avg_obstacle_distance == pytest.approx(sum(all_ranges) / 10)
        assert r.follow_ticks == 7 and r.ticks == 10
        assert not r.lost_target
        assert r.wrong_person_events == 0  # wrong binding lasted 1 tick only

    def test_lost_when_search_persists(self):
        n = int(15.0 * 30)
        spec = [("FOLLOW_RGBD", 1.0, 0, 0, 1, 0, 1, 2.0)] * 5 \
            + [(SEARCH, 0.0, 0, 0, 5, 0, -1, 2.0)] * n
        header, rows = hand_log(spec)
        assert compute_metrics(rows, header).lost_target

    def test_not_lost_when_search_interrupted(self):
        n = int(15.0 * 30) - 1
        spec = ([(SEARCH, 0.0, 0, 0, 5, 0, -1, 2.0)] * n
                + [("FOLLOW_RGBD", 1.0, 0, 0, 1, 0, 1, 2.0)]) * 2
        header, rows = hand_log(spec)
        assert not compute_metrics(rows, header).lost_target

    def test_wrong_person_episode_strictly_over_one_second(self):
        base = ("FOLLOW_RGBD", 1.0, 0, 0, 1, 0, TARGET_ID, 2.0)
        wrong = ("FOLLOW_RGBD", 1.0, 0, 0, 1, 0, 99, 2.0)
        # exactly 30 ticks of wrong binding: not an event (needs > 1 s)
        header, rows = hand_log([base] * 5 + [wrong] * 30 + [base] * 5)
        assert compute_metrics(rows, header).wrong_person_events == 0
        # 31 ticks: one event
        header, rows = hand_log([base] * 5 + [wrong] * 31 + [base] * 5)
        assert compute_metrics(rows, header).wrong_person_events == 1
        # two separated long episodes: two events
        header, rows = hand_log([base] * 5 + [wrong] * 31 + [base] * 5 + [wrong] * 40)
        assert compute_metrics(rows, header).wrong_person_events == 2

    def test_empty_log_errors(self):
        header, _ = hand_log([])
        with pytest.raises(ValueError):
            compute_metrics([], header)


def quick_scenario(**kw):
    sc = default_scenario()
    sc.marker_count = kw.pop("marker_count", 3)
    sc.max_duration = kw.pop("max_duration", 40.0)
    for k, v in kw.items():
        setattr(sc, k, v)
    return sc


class TestRunTrial:
    def test_static_target_near_agent(self):
        # target stands still next to the agent: near-zero speed, never lost
        from followsim.harness import Participant

        sc = default_scenario()
        sc.max_duration = 12.0
        sc.protocol = "course"
        sc.course_waypoints = [(9.0, 9.0)]
        sc.participants = [Participant(identity_seed=1000, speed=0.0)]
        r = run_trial(sc, VARIANT_PRESETS["ours"], seed=0)
        assert r.avg_speed < 0.2
        assert not r.lost_target
        assert r.wrong_person_events == 0

    def test_straight_course_follow_distance(self):
        # 10 m straight walk at ~1 m/s with no obstacles in the lane: the
        # standoff dominates the steady-state follow distance
        sc = default_scenario()
        sc.world = replace(sc.world, obstacles=[])
        sc.protocol = "course"
        sc.target_start = (1.5, 5.0)
        sc.agent_start = (0.5, 5.0, 0.0)
        sc.course_waypoints = [(9.5, 5.0)]
        sc.max_duration = 60.0
        r = run_trial(sc, VARIANT_PRESETS["ours"], seed=2)
        assert r.completed
        assert 1.0 <= r.avg_follow_distance <= 3.0
        assert not r.lost_target

    def test_course_waypoint_outside_arena_rejected(self):
        sc = default_scenario()
        sc.protocol = "course"
        sc.course_waypoints = [(50.0, 5.0)]
        with pytest.raises(ConfigError):
            run_trial(sc, VARIANT_PRESETS["ours"], seed=0)

    def test_determinism_byte_identical_logs(self, tmp_path):
        sc = quick_scenario()
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        r1 = run_trial(sc, VARIANT_PRESETS["ours"], seed=3, log_path=p1)
        r2 = run_trial(sc, VARIANT_PRESETS["ours"], seed=3, log_path=p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert r1.avg_speed == r2.avg_speed

    def test_replay_reproduces_metrics_exactly(self, tmp_path):
        sc = quick_scenario()
        path = tmp_path / "trial.jsonl"
        r = run_trial(sc, VARIANT_PRESETS["ours"], seed=1, log_path=path)
        header, rows = read_tick_log(path)
        replayed = compute_metrics(rows, header)
        assert replayed.avg_speed == r.avg_speed
        assert replayed.avg_follow_distance == r.avg_follow_distance
        assert replayed.avg_obstacle_distance == r.avg_obstacle_distance
        assert replayed.lost_target == r.lost_target
        assert replayed.wrong_person_events == r.wrong_person_events

    def test_no_reid_variant_runs_without_registration(self):
        sc = quick_scenario()
        r = run_trial(sc, VARIANT_PRESETS["ours_wo_reid"], seed=0)
        assert r.ticks > 0

    def test_metrics_nonnegative(self):
        sc = quick_scenario()
        for name in ("ours", "ours_wo_motion", "ours_wo_pathplanning"):
            r = run_trial(sc, VARIANT_PRESETS[name], seed=0)
            assert r.avg_speed >= 0
            assert r.avg_follow_distance >= 0
            assert r.avg_obstacle_distance >= 0


class TestRunSuite:
    def test_single_cell_suite_equals_trial(self):
        sc = quick_scenario()
        summary = run_suite(sc, [VARIANT_PRESETS["ours"]], [4], n_jobs=1)
        direct = run_trial(sc, VARIANT_PRESETS["ours"], seed=4)
        v = summary.by_name("ours")
        assert v.trials == 1
        assert v.mean_speed == pytest.approx(direct.avg_speed)
        assert v.lost_count == int(direct.lost_target)

    def test_suite_deterministic(self):
        sc = quick_scenario()
        variants = [VARIANT_PRESETS["ours"], VARIANT_PRESETS["ours_wo_reid"]]
        s1 = run_suite(sc, variants, [0, 1], n_jobs=1)
        s2 = run_suite(sc, variants, [0, 1], n_jobs=2)
        assert summary_csv(s1) == summary_csv(s2)

    def test_counts_bounded_by_n(self):
        sc = quick_scenario()
        summary = run_suite(sc, [VARIANT_PRESETS["ours"]], [0, 1, 2], n_jobs=1)
        v = summary.by_name("ours")
        assert 0 <= v.lost_count <= v.trials
        assert 0 <= v.wrong_count <= v.trials

    def test_table_and_csv_shapes(self):
        sc = quick_scenario()
        summary = run_suite(sc, [VARIANT_PRESETS["ours"]], [0], n_jobs=1)
        table = summary_table(summary)
        assert "Avg. Speed" in table and "ours" in table
        csv_text = summary_csv(summary)
        assert csv_text.splitlines()[0].startswith("variant,")
        assert len(csv_text.splitlines()) == 2

    def test_multi_scenario_cartesian_product(self):
        a = quick_scenario(marker_count=2, max_duration=25.0)
        b = quick_scenario(marker_count=2, max_duration=25.0)
        b.protocol = "course"
        b.course_waypoints = [(8.0, 2.0), (8.0, 8.0)]
        summary = run_suite([a, b], [VARIANT_PRESETS["ours_wo_reid"]], [0, 1], n_jobs=1)
        assert summary.by_name("ours_wo_reid").trials == 4

    def test_aborted_trial_surfaced_suite_continues(self):
        good = quick_scenario()
        bad = quick_scenario()
        bad.protocol = "course"
        bad.course_waypoints = [(99.0, 99.0)]  # fails validation inside the job
        summary = run_suite([good, bad], [VARIANT_PRESETS["ours_wo_reid"]], [0], n_jobs=1)
        assert summary.by_name("ours_wo_reid").trials == 1
        assert len(summary.aborted) == 1
        assert "ConfigError" in summary.aborted[0][2]


class TestTickLogIO:
    def test_round_trip(self, tmp_path):
        header, rows = hand_log([("FOLLOW_RGBD", 1.0, 0, 0, 1, 0, 1, 2.0)] * 3)
        path = tmp_path / "log.jsonl"
        write_tick_log(path, header, rows)
        h2, r2 = read_tick_log(path)
        assert h2 == json.loads(json.dumps(header, sort_keys=True))
        assert r2 == rows

    def test_header_carries_provenance_fields(self):
        sc = default_scenario()
        h = log_header(sc, VARIANT_PRESETS["ours"], 7, config_hash="abc123")
        assert h["seed"] == 7
        assert h["config_sha256"] == "abc123"
        assert h["fields"] == LOG_FIELDS
