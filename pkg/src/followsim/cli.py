"""Command-line entry points: register, trial, suite, replay.

Exit codes: 0 success, 1 validation failure, 2 trend-check failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import config as cfg
from . import harness, report
from .reid import FeatureBank, RegistrationError
from .sensing import IdentityProfile
from .world import ConfigError


def _provenance(seed, config_sha: str) -> str:
    return f"# seed={seed} config_sha256={config_sha}"


def _load_scenario(args) -> tuple:
    if args.config:
        scenario, sha = cfg.load_scenario(args.config)
    else:
        scenario, sha = harness.default_scenario(), cfg.config_hash({"scenario": "default"})
    return scenario, sha


def cmd_register(args) -> int:
    scenario, sha = _load_scenario(args)
    seed = args.seed if args.seed is not None else 0
    mode = args.mode or scenario.registration.mode
    participant = scenario.participants[seed % len(scenario.participants)]
    profile = IdentityProfile.from_seed(participant.identity_seed, dim=scenario.noise.dim)
    bank = harness.run_registration(profile, scenario, seed, mode=mode)
    out = Path(args.out or "bank.fbnk")
    bank.save(out)
    from .reid import cosine_similarity

    torso_self = sum(cosine_similarity(e, bank.torso_mean) for e in bank.torso_bank) \
        / len(bank.torso_bank)
    print(_provenance(seed, sha))
    print(f"bank written to {out} (mode={bank.mode})")
    print(f"torso samples: {len(bank.torso_bank)}  mean self-similarity: {torso_self:.3f}")
    if bank.face_bank:
        face_self = sum(cosine_similarity(e, bank.face_mean) for e in bank.face_bank) \
            / len(bank.face_bank)
        print(f"face samples:  {len(bank.face_bank)}  mean self-similarity: {face_self:.3f}")
    else:
        print("face samples:  0 (torso-only bank)")
    return 0


def _print_result(r: harness.TrialResult) -> None:
    print(f"avg speed:             {r.avg_speed:.3f} m/s")
    print(f"avg follow distance:   {r.avg_follow_distance:.3f} m")
    print(f"avg obstacle distance: {r.avg_obstacle_distance:.3f} m")
    print(f"lost target:           {r.lost_target}")
    print(f"wrong person events:   {r.wrong_person_events}")


def cmd_trial(args) -> int:
    scenario, sha = _load_scenario(args)
    seed = args.seed if args.seed is not None else 0
    variant = cfg.variant_by_name(args.variant)
    bank = FeatureBank.load(args.bank) if args.bank else None
    out_dir = Path(args.out) if args.out else None
    log_path = None
    if args.dump_ticks or out_dir is not None:
        log_path = (out_dir or Path(".")) / f"trial_{variant.name}_seed{seed}.jsonl"
    det_path = None
    if args.dump_detections:
        det_path = (out_dir or Path(".")) / f"detections_{variant.name}_seed{seed}.jsonl"
    result = harness.run_trial(scenario, variant, seed, log_path=log_path,
                               config_hash=sha, bank=bank, detections_path=det_path)
    print(_provenance(seed, sha))
    print(f"variant: {variant.name}  completed: {result.completed}  "
          f"ticks: {result.ticks}")
    _print_result(result)
    if log_path is not None:
        print(f"tick log: {log_path}")
        if out_dir is not None:
            header, rows = harness.read_tick_log(log_path)
            fig = report.render_trial_figure(header, rows, scenario,
                                             out_dir / f"trial_{variant.name}_seed{seed}.png")
            print(f"figure: {fig}")
        if args.dump_trajectory:
            traj = (out_dir or Path(".")) / f"trajectory_{variant.name}_seed{seed}.csv"
            _write_trajectory(log_path, traj)
            print(f"trajectory: {traj}")
    if det_path is not None:
        print(f"detections: {det_path}")
    return 0


def _write_trajectory(log_path: Path, out_path: Path) -> None:
    header, rows = harness.read_tick_log(log_path)
    idx = {n: i for i, n in enumerate(harness.LOG_FIELDS)}
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["tick", "agent_x", "agent_y", "agent_heading",
                    "target_x", "target_y", "target_heading",
                    "interferer_x", "interferer_y", "interferer_heading"])
        for r in rows:
            w.writerow([r[idx["t"]], r[idx["ax"]], r[idx["ay"]], r[idx["ah"]],
                        r[idx["tx"]], r[idx["ty"]], r[idx["th"]],
                        r[idx["ix"]], r[idx["iy"]], r[idx["ih"]]])


def cmd_suite(args) -> int:
    if args.config:
        scenarios, variants, seeds, sha = cfg.load_suite(args.config)
    else:
        scenarios, variants, seeds, sha = cfg.default_suite()
    if args.seeds is not None:
        seeds = list(range(args.seeds))
    summary = harness.run_suite(scenarios, variants, seeds, n_jobs=args.jobs,
                                config_hash=sha)
    print(_provenance(seeds, sha))
    print(harness.summary_table(summary))
    for name, seed, err in summary.aborted:
        print(f"aborted: {name} seed {seed}: {err}")
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "summary.csv"
        csv_path.write_text(_provenance(seeds, sha) + "\n" + harness.summary_csv(summary),
                            encoding="utf-8")
        (out_dir / "summary.txt").write_text(
            _provenance(seeds, sha) + "\n" + harness.summary_table(summary) + "\n",
            encoding="utf-8")
        fig = report.render_suite_figure(summary, out_dir / "summary_metrics.png")
        print(f"wrote {csv_path}, {out_dir / 'summary.txt'}, {fig}")
    if args.check:
        checks = harness.check_trends(summary)
        failed = False
        for name, ok, detail in checks:
            print(f"[{'PASS' if ok else 'FAIL'}] {name} ({detail})")
            failed = failed or not ok
        if failed:
            return 2
    return 0


def cmd_replay(args) -> int:
    header, rows = harness.read_tick_log(args.log)
    result = harness.compute_metrics(rows, header)
    print(_provenance(header.get("seed"), header.get("config_sha256", "")))
    print(f"variant: {header.get('variant', '?')}  ticks: {result.ticks}")
    _print_result(result)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="followsim",
                                description="Human-following simulation and ablations")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("register", help="run a registration session, write a feature bank")
    reg.add_argument("--config", help="scenario YAML")
    reg.add_argument("--seed", type=int)
    reg.add_argument("--mode", choices=["full_360", "standard"])
    reg.add_argument("--out", help="bank file path (default bank.fbnk)")
    reg.set_defaults(func=cmd_register)

    tr = sub.add_parser("trial", help="run a single seeded trial")
    tr.add_argument("--config", help="scenario YAML")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--variant", default="ours",
                    choices=list(harness.VARIANT_PRESETS))
    tr.add_argument("--bank", help="feature bank file from `register` "
                                   "(default: register inline)")
    tr.add_argument("--out", help="output directory for logs and figures")
    tr.add_argument("--dump-ticks", action="store_true", help="write the JSON-lines tick log")
    tr.add_argument("--dump-trajectory", action="store_true",
                    help="write a trajectory CSV (tick, agent and person poses)")
    tr.add_argument("--dump-detections", action="store_true",
                    help="write per-frame detections as JSON-lines")
    tr.set_defaults(func=cmd_trial)

    su = sub.add_parser("suite", help="run the ablation suite")
    su.add_argument("--config", help="suite YAML")
    su.add_argument("--seeds", type=int, help="override: use seeds 0..N-1")
    su.add_argument("--jobs", type=int, default=None, help="parallel trial workers")
    su.add_argument("--out", help="output directory for CSV, table, and figures")
    su.add_argument("--check", action="store_true",
                    help="assert the ablation trend properties; exit 2 on failure")
    su.set_defaults(func=cmd_suite)

    rp = sub.add_parser("replay", help="recompute metrics from a saved tick log")
    rp.add_argument("log", help="JSON-lines tick log")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RegistrationError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
