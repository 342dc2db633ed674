"""Command-line interface.

Subcommands: sample, fpt, rays, badpoints, certify, nbox, resample-exp,
decay, selftest.  All outputs are deterministic functions of the arguments:
CSV is RFC-4180 with LF line endings, JSON is sorted-key, and nothing embeds
a timestamp, so identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import certify, fpt, geodesics, harness, weights
from .config import ConfigError, ExperimentConfig, default_workers
from .lattice import build_box
from .weights import DistributionSpec


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        return " ".join(str(c) for c in x)
    return str(x)


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def parse_dist(text: str) -> DistributionSpec:
    """Parse 'kind:params' strings, e.g. exponential:1.0 or bernoulli:0,1,0.4."""
    kind, _, rest = text.partition(":")
    args = [float(x) for x in rest.split(",")] if rest else []
    try:
        if kind in ("point", "point-mass"):
            return DistributionSpec.point_mass(*args)
        if kind == "bernoulli":
            return DistributionSpec.bernoulli(*args)
        if kind == "uniform":
            return DistributionSpec.uniform(*args)
        if kind in ("exp", "exponential"):
            return DistributionSpec.exponential(*args)
        if kind in ("shiftexp", "shifted-exponential"):
            return DistributionSpec.shifted_exponential(*args)
        if kind == "table":
            if len(args) % 2:
                raise ValueError("table needs value,prob pairs")
            return DistributionSpec.finite_table(args[0::2], args[1::2])
    except TypeError as e:
        raise SystemExit(f"bad distribution arguments for {kind!r}: {e}")
    raise SystemExit(f"unknown distribution {kind!r}")


def _field_from_args(args) -> weights.WeightField:
    box = build_box(args.dim, args.radius)
    return weights.sample_field(
        box,
        parse_dist(args.dist),
        mode=args.mode,
        master_seed=args.seed,
        grid_log2=args.grid,
    )


def _dump_field(f: weights.WeightField) -> str:
    """Plain-text field dump: `edge_a edge_b weight_numerator grid_exponent`."""
    lines = [
        f"# dim {f.box.dimension} radius {f.box.radius} mode {f.mode} "
        f"seed {f.master_seed} dist {f.dist.kind}"
    ]
    for eid in range(f.box.n_edges):
        e = f.box.edge(eid)
        a = ",".join(str(c) for c in e.a)
        b = ",".join(str(c) for c in e.b)
        if f.is_exact:
            num, g = int(f.values[eid]), f.grid_log2
        else:
            num, den = float(f.values[eid]).as_integer_ratio()
            g = den.bit_length() - 1
        lines.append(f"{a} {b} {num} {g}")
    return "\n".join(lines) + "\n"


def _origin(dim: int):
    return (0,) * dim


def cmd_sample(args):
    _write(args.out, _dump_field(_field_from_args(args)))


def cmd_fpt(args):
    f = _field_from_args(args)
    ptf = fpt.shortest_paths(f, _origin(args.dim))
    rows = []
    for vid in range(f.box.n_vertices):
        c = f.box.coord(vid)
        t = ptf.t[vid]
        t_val = float(t) / (1 << f.grid_log2) if f.is_exact else float(t)
        rows.append([" ".join(str(x) for x in c), t_val])
    _write(args.out, _csv_text(["vertex", "t"], rows))


def cmd_rays(args):
    f = _field_from_args(args)
    ptf = fpt.shortest_paths(f, _origin(args.dim))
    dag = fpt.build_geodesic_dag(ptf, f)
    rays = geodesics.boundary_rays(dag, f.box)
    ray_rows = [
        [i, r.terminal, len(r) - 1, "|".join(",".join(map(str, v)) for v in r.vertices)]
        for i, r in enumerate(rays)
    ]
    horizon = args.horizon if args.horizon is not None else max(1, args.radius // 2)
    mat_rows = []
    for i, r1 in enumerate(rays):
        for j2 in range(i + 1, len(rays)):
            v = geodesics.classify_coalescence(r1, rays[j2], horizon)
            mat_rows.append([i, j2, v.shared_beyond_horizon, v.verdict])
    text = _csv_text(["ray", "terminal", "length", "vertices"], ray_rows)
    text += _csv_text(["ray_i", "ray_j", "shared_beyond_horizon", "verdict"], mat_rows)
    _write(args.out, text)


def cmd_badpoints(args):
    f = _field_from_args(args)
    dim = args.dim
    probe = _origin(dim)
    ptf0 = fpt.shortest_paths(f, probe)
    dag0 = fpt.build_geodesic_dag(ptf0, f)
    src = tuple(args.ray_source) if args.ray_source else (1,) + (0,) * (dim - 1)
    ptf_v = fpt.shortest_paths(f, src)
    dag_v = fpt.build_geodesic_dag(ptf_v, f)
    rows = []
    for i, ray in enumerate(geodesics.boundary_rays(dag_v, f.box)):
        rep = geodesics.bad_indices(ray, dag0)
        rows.append(
            [
                i,
                ray.terminal,
                len(ray),
                " ".join(map(str, rep.bad_indices)),
                "inf" if math.isinf(rep.s_statistic) else int(rep.s_statistic),
                int(rep.degenerate),
            ]
        )
    _write(
        args.out,
        _csv_text(
            ["ray", "terminal", "n_vertices", "bad_indices", "s_statistic", "degenerate"],
            rows,
        ),
    )


def cmd_certify(args):
    f = _field_from_args(args)
    params = certify.BlackParams(
        mode=args.cert_mode,
        delta=args.delta,
        m=args.m,
        alpha2=args.alpha2,
        size_reading=args.size_reading,
    )
    if args.pair:
        a = tuple(args.pair[: args.dim])
        b = tuple(args.pair[args.dim :])
        rep = certify.certify_pair(f, a, b, params)
        obj = {
            "a": list(a),
            "b": list(b),
            "mode": rep.mode,
            "holds": rep.holds,
            "first_failing": rep.first_failing,
            "clauses": [
                {"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "holds": c.holds}
                for c in rep.clauses
            ],
        }
        _write(args.out, _json_text(obj))
        return
    scan_mode = {"black": "C", "black2": "C2", "black3": "C3"}[args.cert_mode]
    rows = []
    for k in args.k_list:
        rep = certify.scan_event(
            f,
            k,
            params,
            mode=scan_mode,
            otherwise_rule=args.otherwise_rule,
            budget=args.budget,
            subsample_seed=args.seed,
        )
        first = rep.violations[0] if rep.violations else None
        rows.append(
            [
                k,
                rep.pairs_checked,
                len(rep.violations),
                first.a if first else "",
                first.b if first else "",
                first.clause if first else "",
            ]
        )
    _write(
        args.out,
        _csv_text(
            ["k", "pairs_checked", "pairs_failed", "first_failure_a", "first_failure_b", "clause"],
            rows,
        ),
    )


def cmd_nbox(args):
    f = _field_from_args(args)
    dist = f.dist
    rt = certify.RThresholds.for_distribution(dist, args.r)
    tuning = certify.NBoxTuning(
        delta_speed=args.delta, r_thresholds=rt, window_len=int(args.m), alpha2=args.alpha2
    )
    source = _origin(args.dim)
    target = tuple(args.target)
    rep = certify.count_gray(f, source, target, args.n, tuning)
    ptf = fpt.shortest_paths(f, source)
    dag = fpt.build_geodesic_dag(ptf, f)
    path = fpt.extract_path(dag, target)
    rows = []
    for nb in certify.boxes_meeting_path(path, args.n, args.dim, f.box.radius):
        col = certify.nbox_classify(f, nb, target, tuning, source=source, _dag=dag, _path=path)
        rows.append(
            [nb.direction, nb.block, int(col.black), int(col.white), int(col.gray), int(col.good)]
        )
    text = _csv_text(["direction", "block", "black", "white", "gray", "good"], rows)
    text += _json_text(
        {
            "boxes_meeting_path": rep.boxes_meeting_path,
            "white_boxes": rep.white_boxes,
            "gray_count": rep.gray_count,
        }
    )
    _write(args.out, text)


def cmd_resample_exp(args):
    config = _config_from_args(args, kind="resample-exp", params={"m": args.m, "max_attempts": args.trials})
    summary, instances = harness.run_resample_experiment(
        config, qualifying_target=args.qualifying
    )
    rows = [
        [
            i.seed,
            i.probe_vertex,
            i.edge[0],
            i.edge[1],
            i.checked_indices,
            int(i.passed),
            int(i.vacuous),
            "; ".join(i.failures),
        ]
        for i in instances
    ]
    text = _csv_text(
        ["seed", "probe_vertex", "edge_a", "edge_b", "checked", "passed", "vacuous", "failures"],
        rows,
    )
    text += _json_text(summary)
    _write(args.out, text)


def cmd_decay(args):
    series = []
    trials = []
    with open(args.series, "r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            series.append((float(row["k"]), float(row["p"])))
            trials.append(int(row["n"]) if "n" in row else 0)
    fit = harness.estimate_decay(
        series, abscissa=args.abscissa, trials=trials if any(trials) else None
    )
    _write(
        args.out,
        _json_text(
            {
                "rate": fit.rate,
                "ci_low": fit.ci_low,
                "ci_high": fit.ci_high,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
                "abscissa": fit.abscissa,
                "zero_replaced": list(fit.zero_replaced),
                "positive": fit.positive,
            }
        ),
    )


def cmd_selftest(args):
    from .selftest import run_selftest

    ok = run_selftest(verbose=True)
    raise SystemExit(0 if ok else 1)


def cmd_run(args):
    config = ExperimentConfig.load(args.config)
    if args.workers is not None:
        config = ExperimentConfig.from_json({**config.to_json(), "workers": args.workers})
    summary, rows = harness.run_trials(config)
    header = list(rows[0].keys()) if rows else ["trial"]
    csv_text = _csv_text(header, [[r[h] for h in header] for r in rows])
    if args.out and args.out != "-":
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "trials.csv"), csv_text)
        _write(os.path.join(args.out, "summary.json"), _json_text(summary))
    else:
        sys.stdout.write(csv_text)
        sys.stdout.write(_json_text(summary))


def _config_from_args(args, kind: str, params: dict) -> ExperimentConfig:
    return ExperimentConfig(
        kind=kind,
        dimension=args.dim,
        radius=args.radius,
        dist=parse_dist(args.dist),
        mode=args.mode,
        trials=args.trials,
        master_seed=args.seed,
        grid_log2=args.grid,
        workers=args.workers if args.workers is not None else default_workers(),
        params=params,
    )


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--radius", type=int, default=8)
    p.add_argument("--dist", type=str, default="exponential:1.0")
    p.add_argument("--mode", choices=("exact", "float"), default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--grid", type=int, default=None, help="exact-mode grid log2")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--out", type=str, default=None)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fpplab")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a weight field and dump it")
    _add_common(p)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("fpt", help="passage times from the origin, as CSV")
    _add_common(p)
    p.set_defaults(fn=cmd_fpt)

    p = sub.add_parser("rays", help="boundary rays and coalescence matrix")
    _add_common(p)
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(fn=cmd_rays)

    p = sub.add_parser("badpoints", help="bad-vertex reports for boundary rays")
    _add_common(p)
    p.add_argument("--ray-source", type=int, nargs="+", default=None)
    p.set_defaults(fn=cmd_badpoints)

    p = sub.add_parser("certify", help="pair certificate or box scan")
    _add_common(p)
    p.add_argument("--cert-mode", choices=("black", "black2", "black3"), default="black")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--alpha2", type=float, default=None)
    p.add_argument("--size-reading", choices=("path-length", "path-count"), default="path-length")
    p.add_argument("--pair", type=int, nargs="+", default=None, help="a then b coords")
    p.add_argument("--k-list", type=int, nargs="+", default=[2])
    p.add_argument("--otherwise-rule", choices=("half-k", "delta-k"), default="half-k")
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("nbox", help="n-box colours and gray count along a geodesic")
    _add_common(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--target", type=int, nargs="+", required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--r", type=float, default=20.0)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--alpha2", type=float, default=0.5)
    p.set_defaults(fn=cmd_nbox)

    p = sub.add_parser("resample-exp", help="edge-resampling coupling checks")
    _add_common(p)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--qualifying", type=int, default=None)
    p.set_defaults(fn=cmd_resample_exp)

    p = sub.add_parser("decay", help="fit an exponential decay rate to a series CSV")
    p.add_argument("--series", type=str, required=True, help="CSV with columns k,p[,n]")
    p.add_argument("--abscissa", choices=("sqrt", "linear"), default="sqrt")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(fn=cmd_decay)

    p = sub.add_parser("selftest", help="oracle equivalence suite")
    p.set_defaults(fn=cmd_selftest)

    p = sub.add_parser("run", help="run an experiment config (JSON)")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(fn=cmd_run)

    args = ap.parse_args(argv)
    try:
        args.fn(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
