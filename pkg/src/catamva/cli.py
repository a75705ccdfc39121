"""Command-line interface: ``catamva <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from . import serialize as io
from .errors import CataError, PipelineError
from .ingest import load_recode_spec
from .render import KINDS


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_ingest(a):
    brick = pl.load_brick(a.responses, a.translation)
    recode = load_recode_spec(a.recode) if a.recode else None
    pl.stage_ingest(brick, _out_dir(a.out), recode, a.threshold, a.normalize)


def cmd_ca(a):
    pl.stage_ca(io.read_table(a.table), _out_dir(a.out), a.holdout)


def cmd_hca(a):
    model = io.load_model(a.model)
    if hasattr(model, "scores") and hasattr(model, "labels") and callable(model.scores):
        points, labels = model.scores(a.side), model.labels(a.side)
    elif hasattr(model, "F"):
        points, labels = model.F, model.row_labels
    else:
        points, labels = model.scores, model.labels
    name = a.name or ("cols" if a.side == "column" else "rows")
    pl.stage_hca(points, labels, _out_dir(a.out), a.k, name, a.linkage)


def cmd_mds(a):
    pl.stage_mds(io.load_model(a.cooccurrence), _out_dir(a.out))


def cmd_mfa(a):
    if len(a.ids) != len(a.tables):
        raise ValueError("give one --ids entry per table")
    tables = [io.read_table(t) for t in a.tables]
    pl.stage_mfa(tables, a.ids, _out_dir(a.out), a.transpose)


def cmd_plsc(a):
    pl.stage_plsc(io.read_table(a.x), io.read_table(a.y), _out_dir(a.out), a.mode)


def cmd_boot(a):
    pl.stage_bootstrap(io.load_model(a.model), _out_dir(a.out), a.replicates, a.seed, a.level, a.n_jobs)


def cmd_perm(a):
    out = _out_dir(a.out)
    if a.responses:
        brick = pl.load_brick(a.responses, a.translation)
        recode = load_recode_spec(a.recode) if a.recode else None
        clean, _, _ = pl.prepare_table(brick, recode, a.threshold)
        pl.stage_permutation(clean.drop_excerpts(a.holdout), out, a.replicates, a.seed, a.n_jobs)
    elif a.x and a.y:
        x, y, _, _ = pl.align_rows(io.read_table(a.x), io.read_table(a.y))
        pl.stage_plsc_permutation(x, y, out, a.replicates, a.seed, a.mode, a.n_jobs)
    else:
        raise ValueError("perm needs --responses, or both --x and --y")


def cmd_run(a):
    cfg = pl.RunConfig.from_file(a.config)
    for key in ("seed", "replicates", "k", "threshold", "n_jobs"):
        v = getattr(a, key)
        if v is not None:
            setattr(cfg, key, v)
    if a.out:
        cfg.output = Path(a.out)
    manifest = pl.run_pipeline(cfg)
    print(f"wrote {len(manifest['files'])} files to {cfg.output}")


def cmd_render(a):
    model = io.load_model(a.model)
    colors = None
    if a.clusters:
        lookup = pl.read_clusters(a.clusters)
        labels = _labels(model, a.side)
        colors = [lookup.get(l, -1) for l in labels]
    sup = {}
    if a.supplementary:
        rows, _, cells, _ = io.parse_matrix(Path(a.supplementary).read_text(encoding="utf-8"))
        sup = dict(zip(rows, cells))
    pl.figure(
        a.kind, model, a.out, a.alpha,
        significance=io.load_model(a.significance) if a.significance else None,
        colors=colors,
        ellipses=io.load_model(a.ellipses) if a.ellipses else None,
        dims=a.dims, side=a.side, supplementary=sup, important_only=a.important_only,
    )


def _labels(model, side):
    if callable(getattr(model, "labels", None)):
        return model.labels(side)
    if hasattr(model, "row_labels"):
        return model.row_labels
    if hasattr(model, "rows"):
        return model.rows
    return model.labels


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catamva", description="Multivariate analysis of check-all-that-apply surveys.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress messages")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse responses into contingency and co-occurrence tables")
    s.add_argument("--responses", required=True)
    s.add_argument("--translation")
    s.add_argument("--recode")
    s.add_argument("--threshold", type=float, default=1.0)
    s.add_argument("--normalize", action="store_true", help="normalize co-occurrence by shared excerpts")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("ca", help="correspondence analysis of a contingency table")
    s.add_argument("--table", required=True)
    s.add_argument("--holdout", nargs="*", default=[], help="rows to project as supplementary")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ca)

    s = sub.add_parser("hca", help="hierarchical clustering of factor scores")
    s.add_argument("--model", required=True)
    s.add_argument("--side", default="row", choices=["row", "column"])
    s.add_argument("--k", type=int, default=4)
    s.add_argument("--linkage", default="ward", choices=["ward", "single", "complete", "average"])
    s.add_argument("--name", help="output suffix (default rows/cols)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_hca)

    s = sub.add_parser("mds", help="metric MDS of a co-occurrence matrix")
    s.add_argument("--cooccurrence", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mds)

    s = sub.add_parser("mfa", help="multiple factor analysis of per-group tables")
    s.add_argument("--tables", nargs="+", required=True)
    s.add_argument("--ids", nargs="+", required=True)
    s.add_argument("--transpose", action="store_true", help="analyse the columns as observations")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mfa)

    s = sub.add_parser("plsc", help="partial least squares correlation of two tables")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--mode", default="correlation", choices=["correlation", "covariance"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plsc)

    s = sub.add_parser("boot", help="bootstrap ellipses for group means in an MDS space")
    s.add_argument("--model", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replicates", type=int, default=1000)
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--n-jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_boot)

    s = sub.add_parser("perm", help="permutation test of CA or PLSC eigenvalues")
    s.add_argument("--responses")
    s.add_argument("--translation")
    s.add_argument("--recode")
    s.add_argument("--threshold", type=float, default=1.0)
    s.add_argument("--holdout", nargs="*", default=[])
    s.add_argument("--x")
    s.add_argument("--y")
    s.add_argument("--mode", default="correlation", choices=["correlation", "covariance"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replicates", type=int, default=1000)
    s.add_argument("--n-jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_perm)

    s = sub.add_parser("run", help="run a whole experiment from a YAML config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--replicates", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--threshold", type=float)
    s.add_argument("--n-jobs", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("render", help="draw a figure from a saved model")
    s.add_argument("--kind", required=True, choices=sorted(KINDS))
    s.add_argument("--model", required=True)
    s.add_argument("--dims", type=int, nargs=2, default=[1, 2])
    s.add_argument("--side", default="row", choices=["row", "column", "x", "y"])
    s.add_argument("--significance", help="permutation result for scree markers")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--ellipses", help="bootstrap result for confidence ellipses")
    s.add_argument("--clusters", help="labeled matrix with a cluster column")
    s.add_argument("--supplementary", help="labeled matrix of supplementary coordinates")
    s.add_argument("--important-only", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s: %(message)s",
                        level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "run":
            args.func(args)
        else:
            with pl.stage(args.command):
                args.func(args)
    except PipelineError as exc:
        print(f"catamva: error: {exc}", file=sys.stderr)
        return 1
    except (CataError, OSError) as exc:
        print(f"catamva: error: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
