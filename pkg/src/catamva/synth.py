"""Synthetic CATA surveys: toy fixtures and planted/null bricks for testing."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .ingest import DEFAULT_SCHEMA, ResponseBrick

NO_MELODY = "I do not think this excerpt has a melody"

QUALITIES = {
    "Tempo": ["Slow", "Moderate", "Fast"],
    "Meter": ["Simple Duple", "Compound Duple", "Simple Triple", "Compound Triple"],
    "Contour": ["Ascending", "Descending", "Arch", NO_MELODY],
    "Motion": ["Conjunct", "Disjunct", NO_MELODY],
    "Range": ["Narrow", "Wide", NO_MELODY],
    "Articulation": ["Staccato", "Legato"],
}

ADJECTIVES_EN = ["Dark", "Warm", "Bright", "Sad", "Happy", "Dancing", "Aggressive", "Soft",
                 "Round", "Solemn", "Complex", "Dull"]
ADJECTIVES_FR = ["Sombre", "Chaleureux", "Brillant", "Triste", "Joyeux", "Dansant", "Agressif", "Doux",
                 "Tendre", "Solennel", "Complexe", "Terne"]


def random_brick(rng, P=20, E=10, L=8, per=6, p=0.3, groups=None) -> ResponseBrick:
    """Null brick: each participant hears ``per`` excerpts and ticks levels independently."""
    presented = np.zeros((P, E), dtype=bool)
    for i in range(P):
        presented[i, rng.choice(E, size=per, replace=False)] = True
    values = (rng.random((P, E, L)) < p) & presented[:, :, None]
    groups = groups if groups is not None else ["all"] * P
    return ResponseBrick(
        [f"p{i + 1}" for i in range(P)], [f"e{j + 1}" for j in range(E)],
        [("Adjective", f"a{k + 1}") for k in range(L)], values.astype(float), presented, groups,
    )


def planted_brick(rng, P=20, E=10, L=8, per=6, hi=0.8, lo=0.05, groups=None) -> ResponseBrick:
    """Two excerpt clusters, each favouring half of the levels."""
    presented = np.zeros((P, E), dtype=bool)
    for i in range(P):
        presented[i, rng.choice(E, size=per, replace=False)] = True
    cluster = np.arange(E) % 2
    favoured = (np.arange(L)[None, :] % 2) == cluster[:, None]
    prob = np.where(favoured, hi, lo)
    values = (rng.random((P, E, L)) < prob[None]) & presented[:, :, None]
    groups = groups if groups is not None else ["all"] * P
    return ResponseBrick(
        [f"p{i + 1}" for i in range(P)], [f"e{j + 1}" for j in range(E)],
        [("Adjective", f"a{k + 1}") for k in range(L)], values.astype(float), presented, groups,
    )


def _excerpt_profiles(rng, n_excerpts, n_levels, n_types):
    types = np.arange(n_excerpts) % n_types
    base = rng.dirichlet(np.full(n_levels, 0.6), size=n_types)
    return types, base


def toy_qualities(seed: int = 7, n_participants: int = 24, n_excerpts: int = 12, per: int = 8):
    """Long-format records for a small musical-qualities survey.

    Single-choice variables get exactly one level; Meter allows the
    simple/compound double ticks that the collapse rule merges.
    """
    rng = np.random.default_rng(seed)
    types = np.arange(n_excerpts) % 3
    melodic = rng.random(n_excerpts) > 0.25
    rows = []
    for p in range(n_participants):
        pid = f"Q{p + 1:02d}"
        grp = "France" if p % 3 == 0 else "USA"
        for e in sorted(rng.choice(n_excerpts, size=per, replace=False)):
            exc = f"Excerpt {e + 1}"
            t = types[e]
            picks = {
                "Tempo": {["Slow", "Moderate", "Fast"][t] if rng.random() < 0.75 else rng.choice(QUALITIES["Tempo"])},
                "Articulation": {"Legato" if (t == 0) ^ (rng.random() < 0.15) else "Staccato"},
            }
            duple = (e % 2 == 0) ^ (rng.random() < 0.1)
            meters = {("Simple " if rng.random() < 0.6 else "Compound ") + ("Duple" if duple else "Triple")}
            if rng.random() < 0.2:
                meters.add(("Compound " if "Simple" in next(iter(meters)) else "Simple ") + ("Duple" if duple else "Triple"))
            picks["Meter"] = meters
            has_melody = melodic[e] ^ (rng.random() < 0.1)
            for var, opts in (("Contour", QUALITIES["Contour"][:3]), ("Motion", QUALITIES["Motion"][:2]),
                              ("Range", QUALITIES["Range"][:2])):
                if not has_melody and rng.random() < 0.8:
                    picks[var] = {NO_MELODY}
                else:
                    picks[var] = {opts[(t + e) % len(opts)] if rng.random() < 0.6 else rng.choice(opts)}
            for var, levels in QUALITIES.items():
                for lev in levels:
                    rows.append([pid, grp, exc, var, lev, int(lev in picks[var])])
    return rows


def toy_adjectives(seed: int = 11, n_french: int = 18, n_american: int = 24, n_excerpts: int = 12, per: int = 8):
    """Long-format records for a small bilingual adjectives survey.

    French participants answer with French labels (see :func:`translation_table`)
    and use two adjectives differently from the American group.
    """
    rng = np.random.default_rng(seed)
    L = len(ADJECTIVES_EN)
    types = np.arange(n_excerpts) % 4
    base = np.full((4, L), 0.06)
    for t in range(4):
        base[t, [(3 * t + k) % L for k in range(3)]] = 0.7
    rows = []
    for p in range(n_french + n_american):
        french = p < n_french
        pid = f"{'F' if french else 'A'}{p + 1:02d}"
        grp = "France" if french else "USA"
        names = ADJECTIVES_FR if french else ADJECTIVES_EN
        for e in sorted(rng.choice(n_excerpts, size=per, replace=False)):
            prob = base[types[e]].copy()
            if french:
                prob[2] *= 0.3  # Bright / Brillant used sparingly
                prob[8] = min(1.0, prob[8] * 2.5 + 0.1)  # Round / Tendre used more
            ticks = rng.random(L) < prob
            for k in range(L):
                rows.append([pid, grp, f"Excerpt {e + 1}", "Adjective" if not french else "Adjectif",
                             names[k], int(ticks[k])])
    return rows


def translation_table():
    pairs = [("Adjectif", "Adjective")] + list(zip(ADJECTIVES_FR, ADJECTIVES_EN))
    return pairs


QUALITIES_RECODE = {
    "rules": [
        {"collapse": {"variable": "Meter", "merge": {
            "Duple": ["Simple Duple", "Compound Duple"],
            "Triple": ["Simple Triple", "Compound Triple"],
        }}},
        {"barycentric": {"trigger": NO_MELODY, "variables": ["Contour", "Motion", "Range"], "melody": "Melody"}},
    ]
}


def write_records(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(DEFAULT_SCHEMA))
        w.writerows(rows)


def write_toy_fixtures(directory) -> dict[str, Path]:
    """Write the toy surveys, the translation table and the recode rules into ``directory``."""
    import yaml

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "qualities": d / "qualities.csv",
        "adjectives": d / "adjectives.csv",
        "translation": d / "fr_en.csv",
        "recode": d / "recode_qualities.yaml",
    }
    write_records(toy_qualities(), paths["qualities"])
    write_records(toy_adjectives(), paths["adjectives"])
    with open(paths["translation"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "target"])
        w.writerows(translation_table())
    paths["recode"].write_text(yaml.safe_dump(QUALITIES_RECODE, sort_keys=False), encoding="utf-8")
    return paths
