"""Configuration-driven end-to-end runs.

Each ``stage_*`` function reads in-memory inputs, writes its artifacts into
an output directory and returns the fitted objects. ``run_pipeline`` chains
them; the CLI subcommands call the same functions on deserialized inputs, so
a stage rerun from files reproduces the end-to-end artifacts byte for byte.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import serialize as io
from .ca import contributions, fit_ca, project_supplementary, squared_cosines
from .errors import CataError, ConfigInvalid, PipelineError
from .hca import cut_tree, fit_hca, height_drops
from .inference import (
    ResampleResult,
    bootstrap_group_means,
    permutation_test_eigen,
    permutation_test_plsc,
    welch_t,
)
from .ingest import (
    ContingencyTable,
    RecodeSpec,
    ResponseBrick,
    apply_recoding,
    co_occurrence,
    drop_sparse_levels,
    load_recode_spec,
    load_translation,
    parse_responses,
    split_by_group,
    sum_to_contingency,
)
from .mds import MDSModel, fit_mds
from .mfa import mfa_from_tables
from .plsc import align_rows, fit_plsc
from .render import FigureSpec, render

log = logging.getLogger(__name__)

EXPERIMENTS = ("qualities", "adjectives", "combined")


@dataclass
class RunConfig:
    """Run parameters; see ``README.md`` for the YAML layout.

    Relative paths in a config file are resolved against the file's directory.
    """

    experiment: str
    output: Path
    responses: Path | None = None
    translation: Path | None = None
    recode: Path | None = None
    x_table: Path | None = None
    y_table: Path | None = None
    clusters: Path | None = None
    k: int = 4
    k_columns: int = 4
    replicates: int = 1000
    seed: int = 0
    level: float = 0.95
    threshold: float = 1.0
    alpha: float = 0.05
    holdout: list[str] = field(default_factory=list)
    normalize_cooccurrence: bool = False
    plsc_mode: str = "correlation"
    groups: list[str] | None = None
    linkage: str = "ward"
    n_jobs: int = 1

    PATHS = ("output", "responses", "translation", "recode", "x_table", "y_table", "clusters")

    @classmethod
    def from_dict(cls, data: dict, base: Path | None = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a mapping")
        known = {f.name for f in fields(cls)}
        flat = dict(data)
        for section in ("inputs", "params"):
            flat.update(flat.pop(section, None) or {})
        unknown = sorted(set(flat) - known)
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {unknown}")
        for key in ("experiment", "output"):
            if key not in flat:
                raise ConfigInvalid(f"config is missing {key!r}")
        for key in cls.PATHS:
            if flat.get(key) is not None:
                p = Path(flat[key])
                flat[key] = p if p.is_absolute() or base is None else base / p
        flat["holdout"] = [str(h) for h in flat.get("holdout") or []]
        if flat.get("groups") is not None:
            flat["groups"] = [str(g) for g in flat["groups"]]
        return cls(**flat)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, base=path.parent)

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.experiment == "combined":
            required = ("x_table", "y_table")
        else:
            required = ("responses",)
        for key in required:
            if getattr(self, key) is None:
                raise ConfigInvalid(f"{self.experiment} runs need {key!r}")
        for key in ("responses", "translation", "recode", "x_table", "y_table", "clusters"):
            p = getattr(self, key)
            if p is not None and not Path(p).is_file():
                raise ConfigInvalid(f"{key}: file not found: {p}")
        checks = [
            (isinstance(self.k, int) and self.k >= 1, "k must be an integer >= 1"),
            (isinstance(self.k_columns, int) and self.k_columns >= 1, "k_columns must be an integer >= 1"),
            (isinstance(self.replicates, int) and self.replicates >= 1, "replicates must be an integer >= 1"),
            (isinstance(self.seed, int) and self.seed >= 0, "seed must be a nonnegative integer"),
            (0 < self.level < 1, "level must lie in (0, 1)"),
            (self.threshold >= 0, "threshold must be >= 0"),
            (0 < self.alpha < 1, "alpha must lie in (0, 1)"),
            (self.plsc_mode in ("correlation", "covariance"), "plsc_mode must be correlation or covariance"),
            (self.linkage in ("ward", "single", "complete", "average"), "unknown linkage"),
            (isinstance(self.n_jobs, int) and self.n_jobs >= 1, "n_jobs must be an integer >= 1"),
            (self.groups is None or len(self.groups) == 2, "groups must name exactly two groups"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigInvalid(msg)
        return self


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except (CataError, ValueError, LookupError, OSError) as exc:
        raise PipelineError(name, exc) from exc


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _write_vector(path, labels, values, name):
    return _write(Path(path), io.format_matrix(labels, [name], np.asarray(values, float)[:, None]))


def read_clusters(path) -> dict[str, int]:
    rows, _, cells, _ = io.parse_matrix(Path(path).read_text(encoding="utf-8"))
    return {r: int(v) for r, v in zip(rows, cells[:, 0])}


# ---------------------------------------------------------------------------
# stages


def load_brick(responses, translation=None) -> ResponseBrick:
    mapping = load_translation(translation) if translation else None
    return parse_responses(responses, translation=mapping)


def prepare_table(brick: ResponseBrick, recode: RecodeSpec | None = None, threshold: float = 1.0):
    """Recode, sum and drop sparse levels and empty rows.

    Returns ``(clean_brick, table, removed)`` where ``clean_brick`` is the
    recoded brick restricted to the kept levels and excerpts and ``removed``
    lists ``(level, column sum)`` for every dropped level.
    """
    recoded = apply_recoding(brick, recode) if recode is not None else brick
    table, removed = drop_sparse_levels(sum_to_contingency(recoded), threshold)
    table, empty_rows, _ = table.drop_empty()
    for label, total in removed:
        log.warning("removed sparse level %s (column sum %s)", label, repr(total))
    for label in empty_rows:
        log.warning("removed empty row %s", label)
    clean = recoded.select_levels(table.cols).select_excerpts(table.rows)
    return clean, table, removed


def stage_ingest(brick: ResponseBrick, out: Path, recode: RecodeSpec | None = None,
                 threshold: float = 1.0, normalize: bool = False):
    """Co-occurrence on the raw brick, then :func:`prepare_table`.

    Returns ``(clean_brick, table, cooccurrence)``.
    """
    out = Path(out)
    io.write_table(sum_to_contingency(brick), out / "contingency_raw.tsv", "excerpt")
    cooc = co_occurrence(brick, normalize=normalize)
    io.save_model(cooc, out / "cooccurrence.json")
    clean, table, removed = prepare_table(brick, recode, threshold)
    _write(out / "removed_levels.tsv",
           "level\tcolumn_sum\n" + "".join(f"{l}\t{repr(s)}\n" for l, s in removed))
    io.write_table(table, out / "contingency.tsv", "excerpt")
    return clean, table, cooc


def stage_ca(table: ContingencyTable, out: Path, holdout: Sequence[str] = (), prefix: str = "ca"):
    """Fit CA on the active rows and project held-out rows as supplementary."""
    out = Path(out)
    holdout = [h for h in holdout]
    missing = [h for h in holdout if h not in table.rows]
    if missing:
        raise LookupError(f"holdout rows not in table: {missing}")
    active = table.drop_rows(holdout)
    model = fit_ca(active)
    io.save_model(model, out / f"{prefix}_model.json")
    sup = {}
    if holdout and model.n_dims:
        counts = np.stack([table.row(h) for h in holdout])
        scores = project_supplementary(model, counts, "row")
        sup = dict(zip(holdout, scores))
        io_path = out / f"{prefix}_supplementary.tsv"
        _write(io_path, io.format_matrix(holdout, [f"Dimension {l + 1}" for l in range(model.n_dims)],
                                         scores, "excerpt"))
    if model.n_dims:
        dims = [f"Dimension {l + 1}" for l in range(model.n_dims)]
        for side, tag in (("row", "rows"), ("column", "cols")):
            ctr = contributions(model, side)
            _write(out / f"{prefix}_{tag}_contributions.tsv",
                   io.format_matrix(ctr.labels, dims, ctr.signed, f"threshold={repr(ctr.threshold)}"))
            _write(out / f"{prefix}_{tag}_cos2.tsv",
                   io.format_matrix(model.labels(side), dims, squared_cosines(model, side)))
    return model, sup


def stage_hca(points, labels, out: Path, k: int, name: str, linkage: str = "ward"):
    out = Path(out)
    tree = fit_hca(points, labels, linkage)
    io.write_merge_list(tree, out / f"hca_{name}.txt")
    clusters = cut_tree(tree, min(k, tree.n_leaves))
    _write_vector(out / f"clusters_{name}.tsv", tree.labels, clusters, "cluster")
    drops = height_drops(tree)
    _write(out / f"hca_{name}_elbow.tsv", "k\theight_gap\n" + "".join(f"{kk}\t{repr(g)}\n" for kk, g in drops))
    return tree, clusters


def stage_mds(cooc, out: Path):
    model = fit_mds(cooc)
    io.save_model(model, Path(out) / "mds_model.json")
    return model


def stage_bootstrap(model: MDSModel, out: Path, replicates: int, seed: int, level: float, n_jobs: int = 1):
    if model.n_dims < 2:
        log.warning("MDS space has fewer than two dimensions; bootstrap skipped")
        return None
    res = bootstrap_group_means(None, model, B=replicates, seed=seed, level=level, n_jobs=n_jobs)
    io.save_model(res, Path(out) / "bootstrap_mds.json")
    return res


def stage_permutation(brick: ResponseBrick, out: Path, replicates: int, seed: int, n_jobs: int = 1):
    res = permutation_test_eigen(brick, B=replicates, seed=seed, n_jobs=n_jobs)
    io.save_model(res, Path(out) / "permutation_ca.json")
    return res


def stage_mfa(tables: Sequence[ContingencyTable], ids: Sequence[str], out: Path, transpose: bool):
    model = mfa_from_tables(tables, ids, transpose=transpose)
    name = "mfa_cols" if transpose else "mfa_rows"
    io.save_model(model, Path(out) / f"{name}.json")
    return model


def stage_welch(model: MDSModel, out: Path, pair=None):
    res = welch_t(model.scores[:, 0], model.groups, pair)
    io.save_model(res, Path(out) / "welch.json")
    return res


def stage_plsc(x: ContingencyTable, y: ContingencyTable, out: Path, mode: str):
    x, y, rx, ry = align_rows(x, y)
    if rx or ry:
        log.warning("rows present in only one table removed: x=%s y=%s", rx, ry)
    io.write_table(x, Path(out) / "plsc_x.tsv", "excerpt")
    io.write_table(y, Path(out) / "plsc_y.tsv", "excerpt")
    pair = fit_plsc(x, y, mode)
    io.save_model(pair, Path(out) / "plsc_model.json")
    return pair, x, y, rx + [r for r in ry if r not in rx]


def stage_plsc_permutation(x, y, out: Path, replicates: int, seed: int, mode: str, n_jobs: int = 1):
    res = permutation_test_plsc(x, y, B=replicates, seed=seed, mode=mode, n_jobs=n_jobs)
    io.save_model(res, Path(out) / "permutation_plsc.json")
    return res


def figure(kind, model, out_path, alpha=0.05, significance: ResampleResult | None = None,
           colors=None, ellipses: ResampleResult | None = None, dims=(1, 2), side="row",
           supplementary=None, important_only=False):
    """Render one figure to ``out_path``; shared by the pipeline and the CLI."""
    spec = FigureSpec(
        kind=kind,
        dims=tuple(dims),
        side=side,
        colors=colors,
        significant=None if significance is None else list(significance.significant(alpha)),
        ellipses={} if ellipses is None else dict(ellipses.ellipses),
        supplementary=supplementary or {},
        important_only=important_only,
    )
    return _write(Path(out_path), render(spec, model))


# ---------------------------------------------------------------------------
# manifest


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, experiment: str) -> dict:
    out = Path(out)
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "experiment": experiment,
        "files": [
            {"path": p.relative_to(out).as_posix(), "sha256": sha256_file(p), "bytes": p.stat().st_size}
            for p in files
        ],
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# driver


def _survey_run(cfg: RunConfig, out: Path):
    with stage("ingest"):
        brick = load_brick(cfg.responses, cfg.translation)
        recode = load_recode_spec(cfg.recode) if cfg.recode else None
        clean, table, cooc = stage_ingest(brick, out, recode, cfg.threshold, cfg.normalize_cooccurrence)
    with stage("ca"):
        model, sup = stage_ca(table, out, cfg.holdout)
    fig_dir = out / "figures"
    fig_dir.mkdir(exist_ok=True)
    row_clusters = col_clusters = None
    if model.n_dims:
        with stage("hca"):
            _, row_clusters = stage_hca(model.F, model.row_labels, out, cfg.k, "rows", cfg.linkage)
            if cfg.experiment == "adjectives":
                _, col_clusters = stage_hca(model.G, model.col_labels, out, cfg.k_columns, "cols", cfg.linkage)
    with stage("mds"):
        mds = stage_mds(cooc, out)
    with stage("bootstrap"):
        boot = stage_bootstrap(mds, out, cfg.replicates, cfg.seed, cfg.level, cfg.n_jobs)
    with stage("permutation"):
        active = clean.drop_excerpts(cfg.holdout)
        perm = stage_permutation(active, out, cfg.replicates, cfg.seed, cfg.n_jobs)

    mfa_models = {}
    if cfg.experiment == "adjectives":
        with stage("mfa"):
            parts = split_by_group(clean, cfg.groups)
            ids = [p.group[0] for p in parts]
            tables = []
            for part, gid in zip(parts, ids):
                t = ContingencyTable(clean.excerpts, clean.level_labels, part.values.sum(axis=0))
                io.write_table(t, out / f"contingency_{gid}.tsv", "excerpt")
                tables.append(t)
            if len(tables) >= 2:
                mfa_models["rows"] = stage_mfa(tables, ids, out, transpose=False)
                mfa_models["cols"] = stage_mfa(tables, ids, out, transpose=True)
            else:
                log.warning("only one group present; MFA skipped")
        with stage("welch"):
            if mds.n_dims and len(set(mds.groups)) >= 2:
                res = stage_welch(mds, out, cfg.groups)
                log.info("Welch t-test on MDS dimension 1: %s", res.report())

    with stage("render"):
        if model.n_dims:
            figure("scree", model, fig_dir / "scree.svg", cfg.alpha, significance=perm)
            rc = [int(c) for c in row_clusters] if row_clusters is not None else None
            cc = [int(c) for c in col_clusters] if col_clusters is not None else None
            if model.n_dims >= 2:
                figure("factor-map", model, fig_dir / "ca_rows.svg", colors=rc, supplementary=sup)
                figure("factor-map", model, fig_dir / "ca_cols.svg", colors=cc, side="column",
                       important_only=True)
            for d in range(1, min(2, model.n_dims) + 1):
                figure("contribution-bars", model, fig_dir / f"contributions_rows_d{d}.svg", colors=rc, dims=(d, d))
                figure("contribution-bars", model, fig_dir / f"contributions_cols_d{d}.svg", colors=cc,
                       dims=(d, d), side="column")
        if boot is not None:
            figure("mds-ellipse-map", mds, fig_dir / "mds.svg", ellipses=boot)
        for key, m in mfa_models.items():
            colors = rc if key == "rows" else cc
            if m.n_dims >= 2:
                figure("mfa-partial-map", m, fig_dir / f"mfa_{key}.svg", colors=colors)


def _combined_run(cfg: RunConfig, out: Path):
    with stage("plsc"):
        x = io.read_table(cfg.x_table)
        y = io.read_table(cfg.y_table)
        pair, xa, ya, removed = stage_plsc(x, y, out, cfg.plsc_mode)
    with stage("permutation"):
        perm = stage_plsc_permutation(xa, ya, out, cfg.replicates, cfg.seed, cfg.plsc_mode, cfg.n_jobs)
    with stage("hca"):
        if cfg.clusters is not None:
            lookup = read_clusters(cfg.clusters)
            colors = [lookup.get(r, -1) for r in pair.rows]
        else:
            ca_y = fit_ca(ya)
            _, cl = stage_hca(ca_y.F, ca_y.row_labels, out, cfg.k, "rows", cfg.linkage)
            colors = [int(c) for c in cl]
    fig_dir = out / "figures"
    fig_dir.mkdir(exist_ok=True)
    with stage("render"):
        if pair.n_dims:
            figure("scree", pair, fig_dir / "plsc_scree.svg", cfg.alpha, significance=perm)
            for d in range(1, min(2, pair.n_dims) + 1):
                figure("latent-pair-map", pair, fig_dir / f"latent_lv{d}.svg", colors=colors, dims=(d, d))
                figure("contribution-bars", pair, fig_dir / f"plsc_contributions_x_d{d}.svg", dims=(d, d), side="x")
                figure("contribution-bars", pair, fig_dir / f"plsc_contributions_y_d{d}.svg", dims=(d, d), side="y")


def run_pipeline(config: RunConfig) -> dict:
    """Run one experiment end to end and return its manifest."""
    cfg = config.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "combined":
        _combined_run(cfg, out)
    else:
        _survey_run(cfg, out)
    return write_manifest(out, cfg.experiment)
