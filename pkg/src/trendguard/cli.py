"""
Command-line surface binding the pipeline stages.

Subcommands: ingest, features, detect, scan, metrics, graph, simulate,
evaluate. Outputs are files (or --stdout where offered); identical inputs
and flags produce byte-identical outputs. Exit codes: 0 success, 1 runtime
error (partial outputs removed), 2 usage error.
"""

from __future__ import annotations

import argparse
import gzip
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

from .core import DEFAULT_LOCALE, DEFAULT_TZ_OFFSET, Duration, Timestamp, TrendGuardError
from .ingest import (
    Deletion,
    ParseStats,
    build_instances_from_files,
    build_trend_instances,
    load_trend_days,
    load_trend_epochs,
    read_stream,
)
from .classify import flags_for_instance
from .features import count_features, write_feature_csv
from .detector import (
    AttackParams,
    DetectorConfig,
    PRESETS,
    classify_trend,
    detect_attack_windows,
    label_astrobots,
    scan_candidates,
    write_astrobots,
    write_verdicts_jsonl,
)
from . import metrics as metrics_mod
from . import graph as graph_mod
from . import simulator as sim_mod


def _default_locale() -> str:
    return os.environ.get("TRENDGUARD_LOCALE", DEFAULT_LOCALE)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--locale", default=_default_locale(),
                        help="locale for case folding (default: tr, env TRENDGUARD_LOCALE)")
    parser.add_argument("--tz-offset", type=int, default=DEFAULT_TZ_OFFSET,
                        help="reporting timezone offset in seconds (default 10800, UTC+3)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for multi-file inputs (results identical)")


def _add_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kappa", type=int, default=4, help="minimum cluster size")
    parser.add_argument("--alpha-p", type=int, default=300, help="creation window seconds")
    parser.add_argument("--alpha-d", type=int, default=300, help="deletion window seconds")
    parser.add_argument("--theta", type=int, default=600, help="maximum lifetime seconds")


def _params_from(args) -> AttackParams:
    return AttackParams(
        kappa=args.kappa,
        alpha_p=Duration(args.alpha_p),
        alpha_d=Duration(args.alpha_d),
        theta=Duration(args.theta),
    )


def _config_from(args) -> DetectorConfig:
    thresholds = {}
    for item in args.threshold or ():
        rule, _, value = item.partition("=")
        if not value:
            raise TrendGuardError(f"--threshold expects RULE=VALUE, got {item!r}")
        thresholds[rule.strip()] = float(value)
    return DetectorConfig(preset=args.preset, thresholds=thresholds)


# ---------------------------------------------------------------------------
# Parallel two-pass instance building over multiple files
# ---------------------------------------------------------------------------

def _match_worker(payload):
    path, trends, locale, tz_offset = payload
    partial = build_trend_instances(
        trends, read_stream(path), locale, tz_offset, collect_deletions=False
    )
    return {key: instance.tweets for key, instance in partial.items()}


def _deletion_worker(payload):
    path, wanted = payload
    found: dict[int, Timestamp] = {}
    for event in read_stream(path):
        if isinstance(event, Deletion) and event.tweet_id in wanted:
            prior = found.get(event.tweet_id)
            if prior is None or event.time < prior:
                found[event.tweet_id] = event.time
    return found


def _build_instances(paths, trends, locale, tz_offset, jobs, stats: Optional[ParseStats] = None):
    if jobs <= 1 or len(paths) <= 1:
        return build_instances_from_files(trends, paths, locale, tz_offset, stats)

    with ProcessPoolExecutor(max_workers=min(jobs, len(paths))) as pool:
        partials = list(pool.map(_match_worker, [(p, trends, locale, tz_offset) for p in paths]))

    instances = build_trend_instances(trends, (), locale, tz_offset)
    by_key_tweets: dict = {key: {} for key in instances}
    for partial in partials:
        for key, tweets in partial.items():
            bucket = by_key_tweets[key]
            for tweet in tweets:
                bucket.setdefault(tweet.id, tweet)
    wanted: dict[int, list] = {}
    for key, bucket in by_key_tweets.items():
        instance = instances[key]
        instance.tweets = sorted(bucket.values(), key=lambda t: (t.created_at, t.id))
        for tweet in instance.tweets:
            wanted.setdefault(tweet.id, []).append((instance, tweet))
    if wanted:
        with ProcessPoolExecutor(max_workers=min(jobs, len(paths))) as pool:
            found_parts = list(pool.map(_deletion_worker, [(p, set(wanted)) for p in paths]))
        merged: dict[int, Timestamp] = {}
        for part in found_parts:
            for tid, when in part.items():
                prior = merged.get(tid)
                if prior is None or when < prior:
                    merged[tid] = when
        for tid, when in merged.items():
            for instance, tweet in wanted[tid]:
                if when < tweet.created_at:
                    instance.invalid_deletions += 1
                else:
                    instance.deletions[tid] = when
    return instances


def _stats_worker(path):
    stats = ParseStats()
    for _ in read_stream(path, stats=stats):
        pass
    return stats


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

class _Outputs:
    """Tracks files written so a failing run can remove partial outputs."""

    def __init__(self):
        self.paths: list[Path] = []

    def open(self, path, mode="w"):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(path)
        if mode == "wb":
            return open(path, "wb")
        return open(path, mode, encoding="utf-8", newline="")

    def cleanup(self):
        for path in self.paths:
            try:
                path.unlink(missing_ok=True)
            except OSError:
                pass


def _cmd_ingest(args, out: _Outputs) -> int:
    if args.jobs > 1 and len(args.stream) > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(args.stream))) as pool:
            parts = list(pool.map(_stats_worker, args.stream))
    else:
        parts = [_stats_worker(path) for path in args.stream]
    total = ParseStats()
    for part in parts:
        total.lines_read += part.lines_read
        total.creations += part.creations
        total.deletions += part.deletions
        total.malformed_skipped += part.malformed_skipped
        total.other_skipped += part.other_skipped
    record = {
        "files": len(args.stream),
        "lines_read": total.lines_read,
        "creations": total.creations,
        "deletions": total.deletions,
        "malformed_skipped": total.malformed_skipped,
        "other_skipped": total.other_skipped,
        "consistent": total.consistent,
    }
    payload = json.dumps(record, sort_keys=True, indent=2) + "\n"
    if args.stdout:
        sys.stdout.write(payload)
    else:
        with out.open(args.out) as handle:
            handle.write(payload)
    return 0


def _instances_flags_features(args, out):
    trends = load_trend_days(args.trends, args.locale)
    instances = _build_instances(args.stream, trends, args.locale, args.tz_offset, args.jobs)
    rows = []
    for key in sorted(instances):
        instance = instances[key]
        flags = flags_for_instance(instance, args.locale)
        rows.append((key, instance, flags, count_features(instance, flags)))
    return rows


def _cmd_features(args, out: _Outputs) -> int:
    rows = _instances_flags_features(args, out)
    target = sys.stdout if args.stdout else out.open(args.out)
    try:
        write_feature_csv(target, [(instance, vector) for _, instance, _, vector in rows])
    finally:
        if target is not sys.stdout:
            target.close()
    return 0


def _cmd_detect(args, out: _Outputs) -> int:
    config = _config_from(args)
    params = _params_from(args)
    rows = _instances_flags_features(args, out)
    verdicts = []
    flags_by_key = {}
    for key, instance, flags, vector in rows:
        flags_by_key[key] = flags
        verdicts.append(classify_trend(vector, config, trend=instance.trend))

    target = sys.stdout if args.stdout else out.open(args.out)
    try:
        write_verdicts_jsonl(target, verdicts)
    finally:
        if target is not sys.stdout:
            target.close()

    if args.bots_out:
        bots = label_astrobots(
            [instance for _, instance, _, _ in rows], verdicts, flags_by_key, args.tz_offset
        )
        with out.open(args.bots_out) as handle:
            write_astrobots(handle, bots)

    if args.events_out:
        with out.open(args.events_out) as handle:
            for key, instance, flags, _ in rows:
                for event in detect_attack_windows(instance, flags, params,
                                                   merge_overlapping=args.merge_events):
                    handle.write(json.dumps({
                        "date": instance.trend.date.isoformat(),
                        "keyword": instance.keyword.normalized,
                        "tweet_ids": sorted(event.tweet_ids),
                        "users": sorted(event.users),
                        "start_s": event.start.seconds,
                        "end_s": event.end.seconds,
                        "creation_window_s": event.creation_window.seconds,
                        "deletion_window_s": event.deletion_window.seconds,
                        "max_lifetime_s": event.max_lifetime.seconds,
                    }, sort_keys=True) + "\n")
    return 0


def _cmd_scan(args, out: _Outputs) -> int:
    config = _config_from(args)
    known = set()
    if args.trends:
        for trend in load_trend_days(args.trends, args.locale):
            known.add((trend.date, trend.keyword.normalized))
    events = (e for path in args.stream for e in read_stream(path))
    verdicts = scan_candidates(
        events, known, config, args.locale, min_tweets=args.min_tweets, tz_offset=args.tz_offset
    )
    target = sys.stdout if args.stdout else out.open(args.out)
    try:
        write_verdicts_jsonl(target, verdicts)
    finally:
        if target is not sys.stdout:
            target.close()
    return 0


def _load_verdict_map(path) -> dict[tuple[date, str], bool]:
    mapping: dict[tuple[date, str], bool] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            key = (date.fromisoformat(record["date"]), record["keyword"])
            mapping[key] = mapping.get(key, False) or bool(record["attacked"])
    return mapping


def _cmd_metrics(args, out: _Outputs) -> int:
    epochs = load_trend_epochs(args.epochs, args.locale)
    verdict_map = _load_verdict_map(args.verdicts)
    trends = load_trend_days(args.trends, args.locale)
    instances = _build_instances(args.stream, trends, args.locale, args.tz_offset, args.jobs)

    out_dir = Path(args.out)
    lifecycles = {}
    for key in sorted(instances):
        instance = instances[key]
        try:
            lifecycles[key] = metrics_mod.lifecycle(instance.keyword, epochs)
        except metrics_mod.NeverTrended:
            continue

    with out.open(out_dir / "lifecycles.csv") as handle:
        metrics_mod.write_lifecycles_csv(handle, [lifecycles[k] for k in sorted(lifecycles)])

    with out.open(out_dir / "speed.csv") as handle:
        handle.write("date,keyword,speed_s,pre_entry_deletion_ratio\n")
        for key in sorted(lifecycles):
            instance = instances[key]
            cycle = lifecycles[key]
            try:
                speed = metrics_mod.trend_speed(instance, cycle).seconds
            except metrics_mod.NoPriorTweets:
                speed = ""
            ratio = metrics_mod.pre_entry_deletion_ratio(instance, cycle)
            handle.write(f"{key[0].isoformat()},{key[1]},{speed},{ratio}\n")

    per_day = metrics_mod.prevalence(verdict_map, epochs, k=args.top_k, tz_offset=args.tz_offset)
    with out.open(out_dir / "prevalence.csv") as handle:
        metrics_mod.write_prevalence_csv(handle, per_day)

    bins = metrics_mod.entry_hour_histogram(lifecycles.values(), args.tz_offset)
    with out.open(out_dir / "entry_hours.csv") as handle:
        metrics_mod.write_histogram_csv(handle, bins)

    rows = metrics_mod.volume_report(instances, verdict_map, epochs, args.tz_offset)
    with out.open(out_dir / "volume.csv") as handle:
        metrics_mod.write_volume_csv(handle, rows)
    return 0


def _cmd_graph(args, out: _Outputs) -> int:
    trends = load_trend_days(args.trends, args.locale)
    instances = _build_instances(args.stream, trends, args.locale, args.tz_offset, args.jobs)
    flags = {
        key: flags_for_instance(instance, args.locale) for key, instance in instances.items()
    }
    graph = graph_mod.build_graph(instances, args.predicate, flags)
    if args.single_attack:
        graph = graph_mod.single_attack_filter(graph)
    if args.kcore:
        graph = graph_mod.k_core(graph, args.kcore)

    out_dir = Path(args.out)
    with out.open(out_dir / "edges.csv") as handle:
        graph_mod.write_edge_csv(handle, graph)

    summary = {
        "n_nodes": graph.n_nodes,
        "n_edges": graph.n_edges,
        "n_users": sum(1 for n in graph.nodes() if graph.kind(n) == graph_mod.USER),
        "n_trends": sum(1 for n in graph.nodes() if graph.kind(n) == graph_mod.TREND),
    }

    if args.louvain and graph.n_nodes:
        partition = graph_mod.louvain(graph, seed=args.seed)
        with out.open(out_dir / "partition.csv") as handle:
            graph_mod.write_partition_csv(handle, partition)
        summary["modularity"] = partition.modularity
        summary["n_communities"] = len(set(partition.assignment.values()))

        attack_times: dict[int, list[Timestamp]] = {}
        for key, instance in instances.items():
            instance_flags = flags[key]
            for tweet in instance.tweets:
                if tweet.id in instance.deletions and instance_flags[tweet.id].is_lexicon:
                    attack_times.setdefault(tweet.user_id, []).append(tweet.created_at)
        summaries = graph_mod.community_summary(
            partition, instances, attack_times,
            dormancy_threshold=Duration.days(args.dormancy_days),
        )
        with out.open(out_dir / "communities.csv") as handle:
            handle.write("community,n_users,n_trends,first_seen_s,last_seen_s,n_dormant\n")
            for s in summaries:
                first = s.first_seen.seconds if s.first_seen else ""
                last = s.last_seen.seconds if s.last_seen else ""
                handle.write(
                    f"{s.community},{s.n_users},{s.n_trends},{first},{last},{len(s.dormant_users)}\n"
                )

    with out.open(out_dir / "summary.json") as handle:
        handle.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_simulate(args, out: _Outputs) -> int:
    if args.config:
        config = sim_mod.load_scenario(args.config)
    else:
        config = sim_mod.default_scenario()
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    labeled = sim_mod.build_stream(config)

    out_dir = Path(args.out)
    stream_name = "stream.jsonl.gz" if args.gzip else "stream.jsonl"
    if args.gzip:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / stream_name
        out.paths.append(path)
        # mtime pinned so repeated runs are byte-identical
        with gzip.GzipFile(path, "wb", mtime=0) as raw:
            import io

            handle = io.TextIOWrapper(raw, encoding="utf-8")
            sim_mod.write_stream_jsonl(handle, labeled.events())
            handle.flush()
            handle.detach()
    else:
        with out.open(out_dir / stream_name) as handle:
            sim_mod.write_stream_jsonl(handle, labeled.events())

    with out.open(out_dir / "truth.csv") as handle:
        sim_mod.write_truth_csv(handle, labeled)
    with out.open(out_dir / "trends.csv") as handle:
        sim_mod.write_trends_csv(handle, labeled)
    with out.open(out_dir / "bots.txt") as handle:
        sim_mod.write_bots(handle, labeled)
    with out.open(out_dir / "scenario.cfg") as handle:
        sim_mod.save_scenario(config, handle)
    if args.epochs:
        streams = sim_mod.group_stream_by_keyword(
            labeled.events(), list(labeled.keywords), args.locale
        )
        ranked = sim_mod.trend_oracle(
            streams, epoch_seconds=config.epoch_seconds, mitigation=False
        )
        with out.open(out_dir / "epochs.csv") as handle:
            sim_mod.write_epochs_csv(handle, ranked, labeled.keywords)
    return 0


def _cmd_evaluate(args, out: _Outputs) -> int:
    config = _config_from(args)
    if args.sim:
        report = _evaluate_sim_dir(args, config)
    elif args.config:
        scenario = sim_mod.load_scenario(args.config)
        labeled = sim_mod.build_stream(scenario)
        report = sim_mod.evaluate(config, labeled, args.locale)
    else:
        raise TrendGuardError("evaluate needs --sim DIR or --config FILE")
    payload = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    sys.stdout.write(payload)
    if args.out:
        with out.open(args.out) as handle:
            handle.write(payload)
    return 0


def _evaluate_sim_dir(args, config: DetectorConfig) -> sim_mod.EvalReport:
    import random

    sim_dir = Path(args.sim)
    scenario = sim_mod.load_scenario(str(sim_dir / "scenario.cfg"))
    truth = sim_mod.load_truth_csv(str(sim_dir / "truth.csv"), args.locale)
    trends = load_trend_days(str(sim_dir / "trends.csv"), args.locale)
    stream_path = sim_dir / "stream.jsonl"
    if not stream_path.exists():
        stream_path = sim_dir / "stream.jsonl.gz"
    rng = random.Random(f"{scenario.seed}:sample")
    events = sim_mod.sample_stream(read_stream(str(stream_path)), scenario.sample_rate, rng)
    instances = build_trend_instances(trends, events, args.locale, scenario.tz_offset)
    tp = fp = tn = fn = 0
    for key, instance in instances.items():
        flags = flags_for_instance(instance, args.locale)
        verdict = classify_trend(count_features(instance, flags), config, trend=instance.trend)
        actual = truth[key]
        if verdict.attacked and actual:
            tp += 1
        elif verdict.attacked:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return sim_mod.EvalReport(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, tn=tn, fn=fn)


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trendguard",
        description="Detect and analyze ephemeral astroturfing attacks on trending topics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse archive files and report stream statistics")
    p.add_argument("--stream", nargs="+", required=True, help="archive file(s), .gz/.bz2 ok")
    p.add_argument("--out", help="stats JSON path")
    p.add_argument("--stdout", action="store_true", help="print stats instead of writing a file")
    _add_common(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("features", help="per-trend feature vectors as CSV")
    p.add_argument("--stream", nargs="+", required=True)
    p.add_argument("--trends", required=True, help="date,keyword CSV")
    p.add_argument("--out", help="features CSV path")
    p.add_argument("--stdout", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("detect", help="classify trends and optionally label astrobots")
    p.add_argument("--stream", nargs="+", required=True)
    p.add_argument("--trends", required=True)
    p.add_argument("--preset", default="lexicon-tree", choices=PRESETS)
    p.add_argument("--threshold", action="append", metavar="RULE=VALUE",
                   help="override a rule threshold, e.g. 9=0.68 (repeatable)")
    p.add_argument("--out", help="verdicts JSONL path")
    p.add_argument("--stdout", action="store_true")
    p.add_argument("--bots-out", help="write astrobot user ids here")
    p.add_argument("--events-out", help="write per-trend attack events here")
    p.add_argument("--merge-events", action="store_true",
                   help="collapse overlapping clusters into one event per burst "
                        "(merged spans may exceed the per-cluster windows)")
    _add_params(p)
    _add_common(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("scan", help="classify non-trending hashtag-days (unsuccessful attacks)")
    p.add_argument("--stream", nargs="+", required=True)
    p.add_argument("--trends", help="known trend-days CSV; candidates trending that day or next are skipped")
    p.add_argument("--preset", default="lexicon-tree", choices=PRESETS)
    p.add_argument("--threshold", action="append", metavar="RULE=VALUE")
    p.add_argument("--min-tweets", type=int, default=4)
    p.add_argument("--out", help="verdicts JSONL path")
    p.add_argument("--stdout", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("metrics", help="success metrics against real-time trend epochs")
    p.add_argument("--stream", nargs="+", required=True)
    p.add_argument("--trends", required=True)
    p.add_argument("--epochs", required=True, help="captured_at,location,rank,keyword,volume CSV")
    p.add_argument("--verdicts", required=True, help="verdicts JSONL from detect")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("graph", help="build and partition the user-trend network")
    p.add_argument("--stream", nargs="+", required=True)
    p.add_argument("--trends", required=True)
    p.add_argument("--predicate", default=graph_mod.UNDELETED,
                   choices=[graph_mod.UNDELETED, graph_mod.DELETED_LEXICON])
    p.add_argument("--kcore", type=int, default=0, help="apply k-core filtering")
    p.add_argument("--single-attack", action="store_true",
                   help="drop users linked to a single trend")
    p.add_argument("--louvain", action="store_true", help="run community detection")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dormancy-days", type=int, default=365)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=_cmd_graph)

    p = sub.add_parser("simulate", help="generate a labeled synthetic archive")
    p.add_argument("--config", help="flat key=value scenario file (default scenario if omitted)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--gzip", action="store_true", help="gzip the stream file")
    p.add_argument("--epochs", action="store_true",
                   help="also write toy trend-list snapshots as epochs.csv")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="score a detector preset against simulator truth")
    p.add_argument("--sim", help="directory written by simulate")
    p.add_argument("--config", help="scenario file to regenerate in memory instead of --sim")
    p.add_argument("--preset", default="lexicon-tree", choices=PRESETS)
    p.add_argument("--threshold", action="append", metavar="RULE=VALUE")
    p.add_argument("--out", help="also write the report JSON here")
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out", None) is None and not getattr(args, "stdout", False) \
            and args.command in ("ingest", "features", "detect", "scan"):
        parser.error(f"{args.command}: --out or --stdout is required")
    outputs = _Outputs()
    try:
        return args.func(args, outputs)
    except (TrendGuardError, OSError, ValueError) as exc:
        outputs.cleanup()
        print(f"trendguard {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
