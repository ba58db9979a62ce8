"""Acceptance gate: each test exercises one criterion at its stated tolerance
and prints one pass/fail line. Run with `pytest tests/test_acceptance.py -v -s`.

The full ablation comparison (criterion 7) runs 7 variants x 25 seeds and
dominates the runtime; everything else finishes in seconds.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from followsim.cli import main
from followsim.control import (
    REID_STALL_TICKS,
    SEARCH,
    CameraSwitchConfig,
    PlannerConfig,
    SafetyFilter,
    select_camera,
)
from followsim.harness import (
    TARGET_ID,
    VARIANT_PRESETS,
    default_scenario,
    read_tick_log,
    compute_metrics,
    run_registration,
    run_trial,
)
from followsim.reid import (
    FeatureBank,
    ReidConfig,
    bank_mean,
    cosine_similarity,
    reidentify,
    score_person,
)
from followsim.sensing import (
    BoundingBox,
    Detection,
    Embedding,
    IdentityProfile,
    SensorNoise,
    iou,
    match_faces_to_bodies,
    synth_embedding,
)
from followsim.tracking import TrackerConfig, associate, box_to_z, kf_init, kf_predict, kf_update
from followsim.world import AgentState, ControlCommand, LidarScan, PersonState, World, WorldConfig


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name} {detail}")
    assert ok, f"{name}: {detail}"


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def mkdet(torso_vec, face_vec=None, center_u=0.0):
    return Detection(
        body_box=BoundingBox(center_u, 0.5, 0.2),
        torso_box=BoundingBox(center_u, 0.2, 0.1),
        torso_embedding=Embedding(unit(torso_vec)),
        face_box=None if face_vec is None else BoundingBox(center_u, 0.05, 0.05),
        face_embedding=None if face_vec is None else Embedding(unit(face_vec)),
    )


class TestCriterion1UnitOracles:
    def test_unit_oracles_against_brute_force(self):
        t0 = time.monotonic()
        rng = np.random.default_rng(2024)

        # iou vs exact lattice-cell counting on integer boxes
        for _ in range(1000):
            a = rng.integers(-6, 6, 2)
            b = rng.integers(-6, 6, 2)
            wa, ha, wb, hb = rng.integers(1, 7, 4)
            cells_a = {(x, y) for x in range(a[0], a[0] + wa) for y in range(a[1], a[1] + ha)}
            cells_b = {(x, y) for x in range(b[0], b[0] + wb) for y in range(b[1], b[1] + hb)}
            expected = Fraction(len(cells_a & cells_b), len(cells_a | cells_b))
            got = iou(
                BoundingBox(a[0] + wa / 2.0, float(ha), float(wa), a[1] + ha / 2.0),
                BoundingBox(b[0] + wb / 2.0, float(hb), float(wb), b[1] + hb / 2.0),
            )
            assert got == pytest.approx(float(expected), abs=1e-12)

        # cosine similarity vs explicit sum
        for _ in range(1000):
            x = unit(rng.standard_normal(8))
            y = unit(rng.standard_normal(8))
            expected = sum(float(xi) * float(yi) for xi, yi in zip(x, y))
            assert cosine_similarity(x, y) == pytest.approx(expected, abs=1e-12)

        # bank mean vs hand-computed normalized mean
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            vecs = [unit(rng.standard_normal(6)) for _ in range(k)]
            manual = np.sum(vecs, axis=0) / k
            manual = manual / np.linalg.norm(manual)
            got = bank_mean([Embedding(v) for v in vecs])
            assert np.allclose(got, manual, atol=1e-12)

        # kalman predict/update vs dense matrix algebra (1e-9 tolerance)
        from followsim.tracking import H, Q_BASE, R_BASE, make_f

        cfg = TrackerConfig()
        for _ in range(1000):
            st = kf_init(BoundingBox(rng.uniform(-1, 1), rng.uniform(0.1, 0.9),
                                     rng.uniform(0.05, 0.5), rng.uniform(-1, 1)), cfg)
            st.mean[4:] = rng.normal(0, 0.01, 3)
            f = make_f(1.0)
            want_mean = f @ st.mean
            want_cov = f @ st.covariance @ f.T + Q_BASE
            pred = kf_predict(st, 1.0, cfg)
            assert np.allclose(pred.mean, want_mean, atol=1e-9)
            assert np.allclose(pred.covariance, (want_cov + want_cov.T) / 2, atol=1e-9)
            meas = BoundingBox(rng.uniform(-1, 1), rng.uniform(0.1, 0.9),
                               rng.uniform(0.05, 0.5), rng.uniform(-1, 1))
            z = box_to_z(meas)
            s_mat = H @ pred.covariance @ H.T + R_BASE
            gain = pred.covariance @ H.T @ np.linalg.inv(s_mat)
            want_post = pred.mean + gain @ (z - H @ pred.mean)
            post = kf_update(pred, meas, cfg)
            assert np.allclose(post.mean, want_post, atol=1e-9)

        # associate vs permutation brute force on <= 4x4 instances
        checked = 0
        while checked < 1000:
            n, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            tb = [BoundingBox(rng.uniform(-1, 1), rng.uniform(0.2, 0.8),
                              rng.uniform(0.1, 0.5), rng.uniform(-0.5, 0.5))
                  for _ in range(n)]
            db = [BoundingBox(rng.uniform(-1, 1), rng.uniform(0.2, 0.8),
                              rng.uniform(0.1, 0.5), rng.uniform(-0.5, 0.5))
                  for _ in range(m)]
            matched, _, _ = associate(tb, db, 1e-12)
            got = sum(iou(tb[t], db[d]) for t, d in matched)
            best = 0.0
            k = min(n, m)
            for rows in itertools.permutations(range(n), k):
                for cols in itertools.permutations(range(m), k):
                    best = max(best, sum(iou(tb[r], db[c]) for r, c in zip(rows, cols)))
            assert got == pytest.approx(best, abs=1e-9)
            checked += 1

        elapsed = time.monotonic() - t0
        report("criterion 1: unit oracles (iou, cosine, bank_mean, kalman, associate)",
               elapsed < 10.0, f"({elapsed:.1f}s < 10s)")


class TestCriterion2ReidContract:
    def test_reidentify_exhaustive_and_boundary(self):
        t0 = time.monotonic()
        rng = np.random.default_rng(7)
        cfg = ReidConfig(sim_threshold=0.8)
        for _ in range(600):
            dim = 8
            bank = FeatureBank(
                torso_bank=[Embedding(unit(rng.standard_normal(dim))) for _ in range(4)],
                face_bank=[Embedding(unit(rng.standard_normal(dim))) for _ in range(3)],
            )
            n = int(rng.integers(0, 11))
            dets = []
            for _ in range(n):
                tvec = bank.torso_mean + rng.standard_normal(dim) * rng.uniform(0.05, 1.5)
                fvec = bank.face_mean + rng.standard_normal(dim) * rng.uniform(0.05, 1.5)
                dets.append(mkdet(tvec, fvec if rng.random() < 0.6 else None,
                                  center_u=rng.uniform(-1, 1)))
            best_i, best_s = None, None
            for i, d in enumerate(dets):
                torso = float(d.torso_embedding.values @ bank.torso_mean)
                s = torso
                if d.face_embedding is not None:
                    s = max(s, float(d.face_embedding.values @ bank.face_mean))
                if best_s is None or s > best_s:
                    best_i, best_s = i, s
            want = None if best_s is None or best_s <= 0.8 else (best_i, best_s)
            got = reidentify(dets, bank, cfg)
            if want is None:
                assert got is None
            else:
                assert got is not None and got[0] == want[0]
                assert got[1] == pytest.approx(want[1], abs=1e-12)

        # boundary: cos = 0.80 exactly rejected; 0.8 + eps accepted
        bank = FeatureBank(torso_bank=[Embedding(np.array([1.0, 0.0]))])
        at = mkdet([0.8, 0.6])
        assert reidentify([at], bank, cfg) is None
        above = mkdet([0.8 + 1e-6, math.sqrt(1 - (0.8 + 1e-6) ** 2)])
        got = reidentify([above], bank, cfg)
        assert got is not None and got[1] > 0.8

        elapsed = time.monotonic() - t0
        report("criterion 2: reidentify equals exhaustive max/argmax/threshold oracle",
               elapsed < 5.0, f"({elapsed:.1f}s < 5s)")


class TestCriterion3FaceBodyMatching:
    def test_assignment_iff_strictly_above_075(self):
        rng = np.random.default_rng(99)
        for _ in range(2000):
            s = rng.uniform(0.05, 0.4)
            face = BoundingBox(rng.uniform(-0.5, 0.5), s, s, rng.uniform(-0.5, 0.5))
            pose = BoundingBox(face.center_u + rng.uniform(-0.2, 0.2) * s,
                               s * rng.uniform(0.8, 1.25),
                               s * rng.uniform(0.8, 1.25),
                               face.center_v + rng.uniform(-0.2, 0.2) * s)
            v = iou(face, pose)
            got = match_faces_to_bodies([face], [pose])
            assert (got == {0: 0}) == (v > 0.75)
        # the exact-threshold pair is rejected
        a = BoundingBox(3.5, 7.0, 7.0, 3.5)
        b = BoundingBox(4.5, 7.0, 7.0, 3.5)
        assert iou(a, b) == pytest.approx(0.75, abs=1e-12)
        assert match_faces_to_bodies([a], [b]) == {}
        report("criterion 3: face-body assignment iff IoU strictly above 0.75", True)


class TestCriterion4RegistrationComparison:
    def test_full360_bank_not_worse_on_back_side_views(self):
        t0 = time.monotonic()
        scenario = default_scenario()
        profile = IdentityProfile.from_seed(321)
        b360 = run_registration(profile, scenario, seed=11, mode="full_360")
        bstd = run_registration(profile, scenario, seed=11, mode="standard")
        rng = np.random.default_rng(500)
        noise = SensorNoise()
        s360, sstd = [], []
        for _ in range(500):
            va = rng.uniform(math.radians(60), math.radians(300))
            wrapped = (va + math.pi) % (2 * math.pi) - math.pi
            d = mkdet([1.0, 0.0])
            d.torso_embedding = synth_embedding(profile, "torso", va, rng, noise)
            if abs(wrapped) < math.pi / 2:
                d.face_embedding = synth_embedding(profile, "face", va, rng, noise)
                d.face_box = BoundingBox(0.0, 0.05, 0.05)
            else:
                d.face_embedding = None
                d.face_box = None
            s360.append(score_person(d, b360).score)
            sstd.append(score_person(d, bstd).score)
        m360, mstd = float(np.mean(s360)), float(np.mean(sstd))
        elapsed = time.monotonic() - t0
        report("criterion 4: mean score(full_360) >= mean score(standard) on back/side views",
               m360 >= mstd and elapsed < 30.0,
               f"({m360:.4f} vs {mstd:.4f}, {elapsed:.1f}s < 30s)")


def _latency_rig(variant_name):
    from followsim.harness import build_pipeline

    scenario = default_scenario()
    variant = VARIANT_PRESETS[variant_name]
    profile = IdentityProfile.from_seed(scenario.participants[0].identity_seed)
    bank = run_registration(profile, scenario, 0) if variant.reid_enabled else None
    world = World(
        WorldConfig(arena=(0.0, 0.0, 10.0, 10.0), rng_seed=0),
        AgentState(position=(5.0, 5.0), heading=math.pi),
        [PersonState(id=TARGET_ID, position=(3.0, 5.0), heading=0.0, speed=0.0,
                     role="target"),
         PersonState(id=2, position=(9.0, 9.0), speed=0.0, role="interferer")],
        {},
    )
    return world, build_pipeline(scenario, variant, bank, 0)


class TestCriterion5LatencyModel:
    def test_update_rates(self):
        world, pipe = _latency_rig("ours_wo_motion")
        for _ in range(60):
            pipe.tick(world)
        fresh = sum(pipe.tick(world).fresh for _ in range(60))
        rate_disabled = fresh / 2.0  # 60 ticks = 2 simulated seconds
        ok_disabled = rate_disabled <= 8.0

        world, pipe = _latency_rig("ours")
        for _ in range(60):
            pipe.tick(world)
        infos = [pipe.tick(world) for _ in range(90)]
        gaps, run = [], 0
        for info in infos:
            if info.fresh:
                if run:
                    gaps.append(run)
                run = 0
            else:
                run += 1
        ok_enabled = sum(i.fresh for i in infos[:30]) == 30 \
            and all(g <= REID_STALL_TICKS for g in gaps)
        report("criterion 5: latency model (<= 8 Hz without tracker; 30 Hz with, "
               "stalls <= 4 ticks)", ok_disabled and ok_enabled,
               f"(disabled {rate_disabled:.1f} Hz)")


class TestCriterion6ControllerInvariants:
    def test_safer_filter_clearance_1000_scenes(self):
        cfg = PlannerConfig()
        filt = SafetyFilter(cfg)
        rng = np.random.default_rng(31337)
        violations = 0
        for _ in range(1000):
            n = 120
            ranges = np.where(rng.random(n) < rng.uniform(0.05, 0.4),
                              rng.uniform(cfg.safety_radius + 0.05, 5.0, n), np.inf)
            scan = LidarScan(ranges=ranges, max_range=12.0,
                             angles=np.arange(n) * 2 * math.pi / n)
            if rng.random() < 0.5:
                out = filt.filter_command(
                    ControlCommand(rng.uniform(0, 1.5), rng.uniform(-1.5, 1.5)), scan)
            else:
                out = filt.filter_goal((rng.uniform(-3, 3), rng.uniform(-3, 3)),
                                       (0.0, 0.0, 0.0), scan)
            v, w = out.linear_velocity, out.angular_velocity
            if v <= 0:
                continue
            pts = filt._scan_points(scan)
            if len(pts) == 0:
                continue
            t_end = min(cfg.lookahead / v, cfg.time_cap)
            ts = np.linspace(0, t_end, 80)[1:]
            if abs(w) < 1e-9:
                xs, ys = v * ts, np.zeros_like(ts)
            else:
                xs, ys = v / w * np.sin(w * ts), v / w * (1 - np.cos(w * ts))
            d = np.hypot(xs[:, None] - pts[None, :, 0], ys[:, None] - pts[None, :, 1])
            if d.min() < cfg.safety_radius - 1e-9:
                violations += 1
        report("criterion 6a: safer_filter re-simulated swept path keeps the safety radius",
               violations == 0, f"({violations}/1000 violations)")

    def test_search_spin_sign_100_scripted_episodes(self):
        from followsim.harness import build_pipeline

        scenario = default_scenario()
        variant = VARIANT_PRESETS["ours"]
        profile = IdentityProfile.from_seed(scenario.participants[0].identity_seed)
        bank = run_registration(profile, scenario, 0)
        failures = 0
        rng = np.random.default_rng(8)
        for episode in range(100):
            side = 1.0 if episode % 2 == 0 else -1.0
            lateral = side * rng.uniform(0.4, 1.2)
            world = World(
                WorldConfig(arena=(0.0, 0.0, 10.0, 10.0), rng_seed=episode),
                AgentState(position=(5.0, 5.0), heading=math.pi),
                [PersonState(id=TARGET_ID, position=(3.5, 5.0 + lateral),
                             heading=0.0, speed=0.0, role="target"),
                 PersonState(id=2, position=(9.0, 9.0), speed=0.0, role="interferer")],
                {},
            )
            pipe = build_pipeline(scenario, variant, bank, 0)  # bank is for participant 0
            for _ in range(150):
                pipe.tick(world)
                if pipe.state.target_track_id is not None:
                    break
            if pipe.state.target_track_id is None:
                failures += 1
                continue
            expected_sign = 1.0 if pipe.state.last_seen_bearing >= 0 else -1.0
            # scripted occlusion: the target vanishes
            world.persons[0].position = (9.5, 0.5)
            world.persons[0].heading = math.pi / 2
            spin = None
            for _ in range(420):
                info = pipe.tick(world)
                if info.mode == SEARCH and info.command.linear_velocity == 0 \
                        and info.command.angular_velocity != 0:
                    spin = info.command.angular_velocity
                    break
            if spin is None or math.copysign(1.0, spin) != expected_sign:
                failures += 1
        report("criterion 6b: SEARCH spin sign equals the last-seen side (100 episodes)",
               failures == 0, f"({failures}/100 failures)")

    def test_camera_switch_exact_triggers(self):
        cfg = CameraSwitchConfig()
        eps = 1e-9
        ok = (
            select_camera("fisheye", 0.45, None, cfg) == "fisheye"
            and select_camera("fisheye", 0.45 - eps, None, cfg) == "rgbd"
            and select_camera("rgbd", None, 1.5, cfg) == "rgbd"
            and select_camera("rgbd", None, 1.5 - eps, cfg) == "fisheye"
            and select_camera("fisheye", None, 1.0, cfg) == "fisheye"
            and select_camera("rgbd", 0.2, None, cfg) == "rgbd"
        )
        report("criterion 6c: camera switch fires exactly at the 0.45 / 1.5 m triggers", ok)


@pytest.mark.slow
class TestCriterion7TrendSuite:
    def test_ablation_suite_with_check(self, tmp_path, capsys):
        t0 = time.monotonic()
        rc = main(["suite", "--check", "--out", str(tmp_path / "suite_out")])
        elapsed = time.monotonic() - t0
        out = capsys.readouterr().out
        print(out)
        report("criterion 7: 7 variants x 25 seeds, `suite --check` trend properties",
               rc == 0 and elapsed < 300.0, f"(exit {rc}, {elapsed:.0f}s < 300s)")


class TestCriterion8Determinism:
    def test_byte_identical_logs_and_replay(self, tmp_path):
        sc = default_scenario()
        sc.marker_count = 4
        sc.max_duration = 40.0
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        r1 = run_trial(sc, VARIANT_PRESETS["ours"], seed=9, log_path=p1)
        r2 = run_trial(sc, VARIANT_PRESETS["ours"], seed=9, log_path=p2)
        identical = p1.read_bytes() == p2.read_bytes()
        header, rows = read_tick_log(p1)
        rep = compute_metrics(rows, header)
        replay_exact = (
            rep.avg_speed == r1.avg_speed
            and rep.avg_follow_distance == r1.avg_follow_distance
            and rep.avg_obstacle_distance == r1.avg_obstacle_distance
            and rep.lost_target == r1.lost_target
            and rep.wrong_person_events == r1.wrong_person_events
        )
        report("criterion 8: byte-identical rerun and exact replay",
               identical and replay_exact)
