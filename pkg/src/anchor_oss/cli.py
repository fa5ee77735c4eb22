"""Command-line front end: one subcommand per pipeline stage.

Exit codes: 0 success, 1 computation error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from io import StringIO
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .abm import AbmParams, run_ensemble
from .counterfactual import counterfactual_for_panel
from .errors import AnchorError, ParseError, UsageError
from .groups import (
    HoursClass,
    group_commit_stats,
    mozilla_devs,
    working_hours_class,
    write_classifications_csv,
)
from .ingest import CommitEvent, curate, parse_commit_log, write_commit_log
from .network import DistanceCategory, build_graph, distance_categories, write_categories_csv
from .panel import (
    OUTCOMES,
    LogMode,
    PanelConfig,
    build_panel,
    group_share_series,
    log_transform,
    moving_average,
    write_panel_csv,
)
from .regression import build_design, design_row, fit
from .svg import Band, Series, line_chart

log = logging.getLogger("anchor_oss")

GROUPS = ("all", "mozilla", "dist1", "dist2", "dist3plus", "hours8_18", "nightowl")
ABM_FIELDS = [f for f in AbmParams.__dataclass_fields__ if f != "seed"]


class Context:
    """Collects output paths and effective config for the run manifest."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.argv = list(argv)
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.config: dict = {}

    def write(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.outputs.append(name)
        return path

    def manifest(self) -> dict:
        return {
            "subcommand": self.args.command,
            "argv": self.argv,
            "inputs": [str(p) for p in _inputs(self.args)],
            "outputs": sorted(self.outputs),
            "config": self.config,
            "seed": self.args.seed,
            "version": __version__,
        }


def _inputs(args: argparse.Namespace) -> list[str]:
    return [getattr(args, k) for k in ("input", "events", "config") if getattr(args, k, None)]


def _date(text: str) -> datetime:
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00")).replace(tzinfo=timezone.utc)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from None


def _load_events(path: str) -> list[CommitEvent]:
    with open(path, "rb") as fh:
        return parse_commit_log(fh)


def _panel_config(args: argparse.Namespace, developer_filter=None) -> PanelConfig:
    return PanelConfig(
        window_start=args.window_start,
        window_end_exclusive=args.window_end,
        shock_instant=args.shock,
        dataset_end=args.dataset_end,
        developer_filter=developer_filter,
    )


def _window_config(args: argparse.Namespace) -> dict:
    return {
        "window_start": args.window_start.isoformat(),
        "window_end_exclusive": args.window_end.isoformat(),
        "shock_instant": args.shock.isoformat(),
        "dataset_end": args.dataset_end.isoformat(),
    }


def resolve_group(
    events: Sequence[CommitEvent], group: str, config: PanelConfig, min_commits: int = 4
) -> frozenset[str] | None:
    """Developer set for a named group; ``None`` means no filter."""
    if group == "all":
        return None
    if group not in GROUPS:
        raise UsageError("UNKNOWN_GROUP", f"unknown group {group!r}; choose from {', '.join(GROUPS)}")
    if group in ("hours8_18", "nightowl"):
        wanted = HoursClass.EIGHT_TO_SIX if group == "hours8_18" else HoursClass.NIGHT_OWL
        return frozenset(d for d, c in working_hours_class(events).items() if c is wanted)
    sponsors = mozilla_devs(events, (config.window_start, config.shock_instant))
    if group == "mozilla":
        return frozenset(sponsors)
    graph = build_graph(events, config.shock_instant, min_commits)
    wanted = DistanceCategory(group)
    if not sponsors:
        raise AnchorError("EMPTY_SEED_SET", "no sponsor-affiliated developers found")
    cats = distance_categories(graph, sponsors)
    return frozenset(d for d, c in cats.items() if c is wanted)


def cmd_ingest(ctx: Context) -> int:
    args = ctx.args
    with open(args.input, "rb") as fh:
        events = parse_commit_log(fh, args.format)
    curated, report = curate(events, until_stable=args.until_stable)
    buf = StringIO()
    write_commit_log(curated, buf)
    ctx.write("curated_events.csv", buf.getvalue())
    ctx.write("curation_report.json", report.to_json())
    ctx.config = {"format": args.format, "until_stable": args.until_stable}
    return 0


def cmd_panel(ctx: Context) -> int:
    args = ctx.args
    events = _load_events(args.events)
    base = _panel_config(args)
    members = resolve_group(events, args.group, base, args.min_commits)
    config = _panel_config(args, members)
    panel = build_panel(events, config)
    buf = StringIO()
    write_panel_csv(panel, buf)
    ctx.write("panel.csv", buf.getvalue())

    sponsors = mozilla_devs(events, (base.window_start, base.shock_instant))
    share = group_share_series(events, sponsors, base)
    lines = ["t,mozilla_share"] + [f"{row.t},{s!r}" for row, s in zip(panel, share)]
    ctx.write("mozilla_share.csv", "\n".join(lines) + "\n")
    if args.plot:
        ts = [row.t for row in panel]
        commits = [float(row.commits) for row in panel]
        ctx.write(
            "panel_commits.svg",
            line_chart(
                [
                    Series("weekly commits", ts, commits),
                    Series(f"{args.ma_width}-week moving average", ts, moving_average(commits, args.ma_width)),
                ],
                title="Weekly commits",
                x_label="week (0 = last pre-shock week)",
                y_label="commits",
                markers=[(0.5, "shock")],
            ),
        )
        ctx.write(
            "mozilla_share.svg",
            line_chart(
                [Series("sponsor commit share", ts, share)],
                title="Share of commits by sponsor-affiliated developers",
                x_label="week (0 = last pre-shock week)",
                y_label="share",
                markers=[(0.5, "shock")],
            ),
        )
    ctx.config = {**_window_config(args), "group": args.group, "ma_width": args.ma_width}
    return 0


def cmd_network(ctx: Context) -> int:
    args = ctx.args
    events = _load_events(args.events)
    config = _panel_config(args)
    graph = build_graph(events, config.shock_instant, args.min_commits)
    buf = StringIO()
    graph.write_edges_csv(buf)
    ctx.write("edges.csv", buf.getvalue())
    sponsors = mozilla_devs(events, (config.window_start, config.shock_instant))
    counts = {c.value: 0 for c in DistanceCategory}
    if sponsors:
        cats = distance_categories(graph, sponsors)
        buf = StringIO()
        write_categories_csv(cats, buf)
        ctx.write("categories.csv", buf.getvalue())
        for c in cats.values():
            counts[c.value] += 1
    else:
        log.warning("no sponsor-affiliated developers; categories not written")
    summary = {"nodes": len(graph), "edges": len(graph.edges), "categories": counts}
    ctx.write("network_summary.json", json.dumps(summary, indent=2) + "\n")
    ctx.config = {**_window_config(args), "min_commits": args.min_commits}
    return 0


def cmd_groups(ctx: Context) -> int:
    args = ctx.args
    events = _load_events(args.events)
    config = _panel_config(args)
    window = (config.window_start, config.shock_instant)
    sponsors = mozilla_devs(events, window)
    hours = working_hours_class(events)
    graph = build_graph(events, config.shock_instant, args.min_commits)
    cats = distance_categories(graph, sponsors) if sponsors else {}
    buf = StringIO()
    write_classifications_csv(hours.keys(), sponsors, hours, cats, buf)
    ctx.write("classifications.csv", buf.getvalue())

    named = {
        "mozilla": set(sponsors),
        "hours8_18": {d for d, c in hours.items() if c is HoursClass.EIGHT_TO_SIX},
        "nightowl": {d for d, c in hours.items() if c is HoursClass.NIGHT_OWL},
    }
    for cat in (DistanceCategory.DIST1, DistanceCategory.DIST2, DistanceCategory.DIST3PLUS):
        named[cat.value] = {d for d, c in cats.items() if c is cat}
    stats = {}
    for name, members in named.items():
        if members:
            stats[name] = asdict(group_commit_stats(events, members, window))
        else:
            stats[name] = {"group_size": 0, "mean_commits": None, "median_commits": None}
    ctx.write("group_stats.json", json.dumps(stats, indent=2) + "\n")
    ctx.config = {**_window_config(args), "min_commits": args.min_commits}
    return 0


def event_study_svg(panel, y, full_fit, title: str) -> str:
    """Observed series, in-sample fit, and the pre-shock trend carried past the shock."""
    ts = [row.t for row in panel]
    trend_labels = [lab for lab in full_fit.labels if lab not in ("post_shock", "t_x_post_shock")]
    idx = [full_fit.labels.index(lab) for lab in trend_labels]
    post = [row for row in panel if row.t >= 0]
    extrap = [float(design_row(trend_labels, r.t, 0, r.month) @ full_fit.beta[idx]) for r in post]
    return line_chart(
        [
            Series("observed", ts, list(y)),
            Series("model fit", ts, list(full_fit.fitted)),
            Series("pre-shock trend", [r.t for r in post], extrap, dashed=True),
        ],
        title=title,
        x_label="week (0 = last pre-shock week)",
        y_label="log outcome",
        markers=[(0.5, "shock")],
    )


def cmd_event_study(ctx: Context) -> int:
    args = ctx.args
    _check_outcome(args.outcome)
    events = _load_events(args.events)
    members = resolve_group(events, args.group, _panel_config(args), args.min_commits)
    panel = build_panel(events, _panel_config(args, members))
    y = log_transform(panel, args.outcome, args.log_mode)
    result = fit(build_design(panel), y, lag=args.lag, small_sample=args.small_sample)
    payload = {"group": args.group, "outcome": args.outcome, "log_mode": args.log_mode, **result.to_dict()}
    ctx.write("fit.json", json.dumps(payload, indent=2) + "\n")
    if args.plot:
        ctx.write("event_study.svg", event_study_svg(panel, y, result, f"{args.outcome} ({args.group})"))
    ctx.config = {
        **_window_config(args),
        "group": args.group,
        "outcome": args.outcome,
        "log_mode": args.log_mode,
        "lag": result.hac_lag,
        "small_sample": args.small_sample,
        "min_commits": args.min_commits,
    }
    return 0


def cmd_counterfactual(ctx: Context) -> int:
    args = ctx.args
    _check_outcome(args.outcome)
    events = _load_events(args.events)
    members = resolve_group(events, args.group, _panel_config(args), args.min_commits)
    panel = build_panel(events, _panel_config(args, members))
    trend, est = counterfactual_for_panel(
        panel, args.outcome, args.log_mode, args.horizon, args.draws, args.seed, lag=args.lag
    )
    payload = {"group": args.group, "outcome": args.outcome, "log_mode": args.log_mode, **est.to_dict()}
    ctx.write("counterfactual.json", json.dumps(payload, indent=2) + "\n")
    buf = StringIO()
    est.write_ratio_csv(buf)
    ctx.write("ratio.csv", buf.getvalue())
    if args.plot:
        shown = [row for row in panel if row.t <= est.horizon_weeks]
        ctx.write(
            "counterfactual.svg",
            line_chart(
                [
                    Series("observed", [r.t for r in shown], [float(r.outcome(args.outcome)) for r in shown]),
                    Series("no-shock counterfactual", list(est.weeks), list(est.counterfactual_mean), dashed=True),
                ],
                title=f"{args.outcome} ({args.group}): {est.percent_effect:+.1f}% "
                f"[{est.ci_low:+.1f}, {est.ci_high:+.1f}] at week {est.horizon_weeks}",
                x_label="week (0 = last pre-shock week)",
                y_label=args.outcome,
                markers=[(0.5, "shock")],
                band=Band(list(est.weeks), list(est.counterfactual_low), list(est.counterfactual_high)),
            ),
        )
    ctx.config = {
        **_window_config(args),
        "group": args.group,
        "outcome": args.outcome,
        "log_mode": args.log_mode,
        "horizon": args.horizon,
        "draws": args.draws,
        "lag": trend.hac_lag,
        "min_commits": args.min_commits,
    }
    return 0


def _abm_params(args: argparse.Namespace) -> AbmParams:
    values: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
            values = asdict(AbmParams.from_config(text))
        except ValueError as exc:
            raise UsageError("BAD_CONFIG", f"{args.config}: {exc}") from None
    for name in ABM_FIELDS:
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
    values["seed"] = args.seed
    try:
        return AbmParams(**values)
    except ValueError as exc:
        raise UsageError("BAD_PARAMS", str(exc)) from None


def cmd_abm(ctx: Context) -> int:
    args = ctx.args
    params = _abm_params(args)
    ensemble = run_ensemble(params, workers=args.workers)

    def csv_text(trace) -> str:
        buf = StringIO()
        trace.write_csv(buf)
        return buf.getvalue()

    ctx.write("abm_mean.csv", csv_text(ensemble.mean))
    if args.per_run:
        for tr in ensemble.runs:
            ctx.write(f"abm_runs/run_{tr.run_id:04d}.csv", csv_text(tr))
    ctx.write("abm_summary.json", json.dumps(ensemble.summary(), indent=2) + "\n")

    periods = list(range(ensemble.mean.periods))
    exit_marker = [(params.sponsor_exit_period, "sponsor exit")]
    ctx.write(
        "abm_new_joins.svg",
        line_chart(
            [Series("new developers", periods, [float(v) for v in ensemble.mean.new_joins])],
            title=f"New developers per period (mean of {params.runs} runs)",
            x_label="period",
            y_label="new developers",
            markers=exit_marker,
        ),
    )
    ctx.write(
        "abm_active.svg",
        line_chart(
            [Series("active developers", periods, [float(v) for v in ensemble.mean.active_count])],
            title=f"Active developers (mean of {params.runs} runs)",
            x_label="period",
            y_label="active developers",
            markers=exit_marker,
        ),
    )
    ctx.config = asdict(params)
    return 0


def _check_outcome(name: str) -> None:
    if name not in OUTCOMES:
        raise UsageError("UNKNOWN_OUTCOME", f"unknown outcome {name!r}; choose from {', '.join(OUTCOMES)}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default=".")
    common.add_argument("--plot", action="store_true", help="also write SVG charts")
    common.add_argument("--log-mode", choices=[m.value for m in LogMode], default="log")
    common.add_argument("-v", "--verbose", action="store_true")

    window = argparse.ArgumentParser(add_help=False)
    defaults = PanelConfig()
    window.add_argument("--window-start", type=_date, default=defaults.window_start)
    window.add_argument("--window-end", type=_date, default=defaults.window_end_exclusive,
                        help="exclusive end of the weekly panel")
    window.add_argument("--shock", type=_date, default=defaults.shock_instant)
    window.add_argument("--dataset-end", type=_date, default=defaults.dataset_end)
    window.add_argument("--min-commits", type=int, default=4,
                        help="per-repo pre-shock events needed for a network edge")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--group", default="all", help=f"one of {', '.join(GROUPS)}")
    model.add_argument("--outcome", default="commits", help=f"one of {', '.join(OUTCOMES)}")
    model.add_argument("--lag", type=int, default=None, help="HAC lag (default Newey-West rule)")

    parser = argparse.ArgumentParser(prog="anchor-oss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse and curate a commit log")
    p.add_argument("input")
    p.add_argument("--format", choices=["auto", "csv", "jsonl"], default="auto")
    p.add_argument("--until-stable", action="store_true", help="repeat curation to a fixpoint")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("panel", parents=[common, window], help="weekly outcome panel")
    p.add_argument("events")
    p.add_argument("--group", default="all")
    p.add_argument("--ma-width", type=int, default=12)
    p.set_defaults(func=cmd_panel)

    p = sub.add_parser("network", parents=[common, window], help="collaboration graph and distances")
    p.add_argument("events")
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("groups", parents=[common, window], help="developer classifications")
    p.add_argument("events")
    p.set_defaults(func=cmd_groups)

    p = sub.add_parser("event-study", parents=[common, window, model], help="event-study OLS fit")
    p.add_argument("events")
    p.add_argument("--small-sample", action="store_true", help="scale HAC covariance by T/(T-p)")
    p.set_defaults(func=cmd_event_study)

    p = sub.add_parser("counterfactual", parents=[common, window, model], help="Monte Carlo no-shock counterfactual")
    p.add_argument("events")
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--draws", type=int, default=10_000)
    p.set_defaults(func=cmd_counterfactual)

    p = sub.add_parser("abm", parents=[common], help="agent-based anchor-sponsor model")
    p.add_argument("--config", help="key=value parameter file")
    for name in ABM_FIELDS:
        kind = int if AbmParams.__dataclass_fields__[name].type == "int" else float
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None)
    p.add_argument("--per-run", action="store_true", help="also write one CSV per run")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_abm)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest.json")
    p.add_argument("manifest")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            recorded = json.loads(Path(args.manifest).read_text(encoding="utf-8"))["argv"]
        except (OSError, ValueError, KeyError) as exc:
            print(f"anchor-oss: cannot read manifest {args.manifest}: {exc}", file=sys.stderr)
            return 2
        return main(recorded)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        ctx = Context(args, argv)
        code = args.func(ctx)
        ctx.write("manifest.json", json.dumps(ctx.manifest(), indent=2, sort_keys=True) + "\n")
        return code
    except FileNotFoundError as exc:
        print(f"anchor-oss: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"anchor-oss: I/O error on {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2
    except (ParseError, UsageError) as exc:
        print(f"anchor-oss: {exc}", file=sys.stderr)
        return 2
    except AnchorError as exc:
        print(f"anchor-oss: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
