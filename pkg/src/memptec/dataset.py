"""Labeled corpora: assembly at fixed class ratios, seeded splits, synthesis.

The synthetic generator builds complete :class:`PackageMetadata` records (not
bare vectors) so that every downstream stage, extraction included, runs on
the same code path as real registry data.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional, Sequence

import numpy as np

from .catalog import STAKEHOLDER_ROLES, FeatureCatalog, catalog as canonical_catalog
from .errors import BadProfile, InsufficientBenign, TooSmall
from .features import FeatureMatrix
from .pmi import (
    InteractionCounts,
    LabeledPMI,
    PackageMetadata,
    Person,
    StakeholderRecord,
    person_id,
)

RATIOS = {"balanced_1_1": 1, "imbalanced_1_10": 10}


# -- assembly ---------------------------------------------------------------

@dataclass
class LabeledDataset:
    records: list

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def take(self, idx) -> "LabeledDataset":
        return LabeledDataset([self.records[i] for i in idx])


def _as_pmi(item):
    return item.metadata if isinstance(item, LabeledPMI) else item


def assemble(malicious: Sequence, benign: Sequence, ratio: str = "balanced_1_1", seed: int = 0) -> LabeledDataset:
    """All malicious packages plus ``ratio`` x as many benign ones, shuffled."""
    if ratio not in RATIOS:
        raise ValueError(f"unknown ratio {ratio!r}; expected one of {sorted(RATIOS)}")
    need = RATIOS[ratio] * len(malicious)
    if len(benign) < need:
        raise InsufficientBenign(f"{ratio} needs {need} benign packages, got {len(benign)}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(benign), size=need, replace=False)
    records = [LabeledPMI(_as_pmi(m), 1) for m in malicious]
    records += [LabeledPMI(_as_pmi(benign[i]), 0) for i in np.sort(chosen)]
    order = rng.permutation(len(records))
    return LabeledDataset([records[i] for i in order])


# -- splitting --------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.70
    valid_frac: float = 0.10
    test_frac: float = 0.20
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.valid_frac, self.test_frac)
        if any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be non-negative and sum to 1, got {fracs}")


@dataclass(frozen=True)
class SplitIndices:
    seed: int
    train_idx: tuple
    valid_idx: tuple
    test_idx: tuple

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "train_idx": list(self.train_idx),
                           "valid_idx": list(self.valid_idx), "test_idx": list(self.test_idx)})

    @classmethod
    def from_json(cls, text: str) -> "SplitIndices":
        d = json.loads(text)
        return cls(int(d["seed"]), tuple(d["train_idx"]), tuple(d["valid_idx"]), tuple(d["test_idx"]))


@dataclass
class Split:
    train: object
    valid: object
    test: object
    indices: SplitIndices


def _labels_of(data) -> np.ndarray:
    if isinstance(data, (LabeledDataset, FeatureMatrix)):
        return np.asarray(data.labels)
    if isinstance(data, np.ndarray):
        return data.astype(np.int64)
    return np.array([r.label for r in data], dtype=np.int64)


def _take(data, idx):
    if isinstance(data, (LabeledDataset, FeatureMatrix)):
        return data.take(idx)
    if isinstance(data, np.ndarray):
        return data[np.asarray(idx, dtype=np.int64)]
    return [data[i] for i in idx]


def apply_split(data, indices: SplitIndices) -> Split:
    return Split(_take(data, indices.train_idx), _take(data, indices.valid_idx),
                 _take(data, indices.test_idx), indices)


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(np.int64)
    rem = quotas - base
    for i in sorted(range(len(quotas)), key=lambda i: (-rem[i], i))[: total - int(base.sum())]:
        base[i] += 1
    return base


def allocate(counts, fracs) -> np.ndarray:
    """Class x split row counts: each cell is the floor or ceiling of its quota,
    rows sum to the class sizes and columns to the rounded split sizes."""
    counts = np.asarray(counts, dtype=np.int64)
    fracs = np.asarray(fracs, dtype=np.float64)
    n = int(counts.sum())
    # rounding guards against 0.7 * 1000 landing a hair above 700
    totals = _largest_remainder(np.round(fracs * n, 9), n)
    q = np.round(np.outer(counts, fracs), 9)
    cells = np.floor(q).astype(np.int64)
    rem = q - cells
    row_need = counts - cells.sum(axis=1)
    col_need = totals - cells.sum(axis=0)
    # 0/1 fill with the prescribed margins: rows by demand, columns by remaining demand
    for c in sorted(range(len(counts)), key=lambda c: (-row_need[c], c)):
        cols = sorted(np.flatnonzero(col_need > 0), key=lambda s: (-col_need[s], -rem[c, s], s))
        for s in cols[: row_need[c]]:
            cells[c, s] += 1
            col_need[s] -= 1
    assert (cells.sum(axis=1) == counts).all() and (cells.sum(axis=0) == totals).all()
    return cells


def split_indices(labels, spec: SplitSpec) -> SplitIndices:
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n < 10:
        raise TooSmall(f"need at least 10 rows to split, got {n}")
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        groups = [np.flatnonzero(labels == c) for c in np.unique(labels)]
    else:
        groups = [np.arange(n)]
    groups = [rng.permutation(g) for g in groups]
    cells = allocate([len(g) for g in groups], [spec.train_frac, spec.valid_frac, spec.test_frac])
    tr, va, te = [], [], []
    for g, (n_tr, n_va, _) in zip(groups, cells.tolist()):
        tr.append(g[:n_tr])
        va.append(g[n_tr:n_tr + n_va])
        te.append(g[n_tr + n_va:])
    # shuffle within each split so class blocks are interleaved
    parts = [rng.permutation(np.concatenate(p)) for p in (tr, va, te)]
    return SplitIndices(int(spec.seed), *(tuple(int(i) for i in p) for p in parts))


def split(ds, spec: SplitSpec = SplitSpec()) -> Split:
    """Seeded 70:10:20 partition of ``ds`` (dataset, record list or feature matrix)."""
    return apply_split(ds, split_indices(_labels_of(ds), spec))


def kfold_indices(labels, k: int, fold: int, seed: int, valid_frac: float = 0.10) -> SplitIndices:
    """Fold ``fold`` of a stratified k-fold partition; validation rows come out of the rest."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n < max(10, k):
        raise TooSmall(f"need at least {max(10, k)} rows for {k}-fold, got {n}")
    rng = np.random.default_rng(seed)
    test, rest = [], []
    for c in np.unique(labels):
        g = rng.permutation(np.flatnonzero(labels == c))
        chunks = np.array_split(g, k)
        test.append(chunks[fold])
        rest.append(np.concatenate([chunks[j] for j in range(k) if j != fold]))
    # valid_frac is relative to the whole dataset
    inner = valid_frac / (1.0 - 1.0 / k)
    tr, va = [], []
    for r in rest:
        nv = int(round(inner * len(r)))
        va.append(r[:nv])
        tr.append(r[nv:])
    parts = [rng.permutation(np.concatenate(p)) for p in (tr, va, test)]
    return SplitIndices(int(seed), *(tuple(int(i) for i in p) for p in parts))


def repeated_splits(ds, k: int = 5, master_seed: int = 0, spec: Optional[SplitSpec] = None,
                    scheme: str = "holdout") -> list:
    """``k`` seeded splits.

    ``holdout`` (default): k independent 70:10:20 splits seeded master_seed + i.
    ``kfold``: stratified k-fold test partitions under master_seed, the
    validation share carved from the remaining folds.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    spec = spec or SplitSpec()
    labels = _labels_of(ds)
    if len(labels) < 10:
        raise TooSmall(f"need at least 10 rows to split, got {len(labels)}")
    if scheme == "holdout":
        idx = [split_indices(labels, SplitSpec(spec.train_frac, spec.valid_frac, spec.test_frac,
                                               spec.stratified, master_seed + i)) for i in range(k)]
    elif scheme == "kfold":
        idx = [kfold_indices(labels, k, i, master_seed, spec.valid_frac) for i in range(k)]
    else:
        raise ValueError(f"unknown split scheme {scheme!r}")
    return [apply_split(ds, s) for s in idx]


# -- synthesis --------------------------------------------------------------

DIST_KINDS = ("bernoulli", "lognormal", "poisson", "constant", "derived")


@dataclass(frozen=True)
class Dist:
    """One-dimensional sampling distribution for a feature value.

    bernoulli(p); lognormal with ``loc``/``scale`` of the underlying normal,
    rounded to an integer; poisson(loc); constant(loc); derived means the
    value follows from other features and ``sample`` is never called.
    """

    kind: str
    p: float = 0.5
    loc: float = 0.0
    scale: float = 1.0

    def validate(self, name: str, value_kind: str):
        if self.kind not in DIST_KINDS:
            raise BadProfile(f"{name}: unknown distribution kind {self.kind!r}")
        if self.kind == "bernoulli" and (value_kind != "binary" or not 0 <= self.p <= 1):
            raise BadProfile(f"{name}: bernoulli needs a binary feature and p in [0, 1]")
        if self.kind in ("lognormal", "poisson") and value_kind == "binary":
            raise BadProfile(f"{name}: {self.kind} cannot drive a binary feature")
        if self.kind == "lognormal" and not self.scale > 0:
            raise BadProfile(f"{name}: lognormal scale must be positive")
        if self.kind == "poisson" and self.loc < 0:
            raise BadProfile(f"{name}: poisson rate must be non-negative")
        if self.kind == "constant":
            if self.loc < 0 or (value_kind == "binary" and self.loc not in (0, 1)):
                raise BadProfile(f"{name}: constant {self.loc} outside the feature domain")
        if self.kind == "derived" and name not in DERIVED_FEATURES:
            raise BadProfile(f"{name}: feature cannot be derived; give it a distribution")

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "bernoulli":
            return float(rng.random() < self.p)
        if self.kind == "lognormal":
            return float(np.rint(rng.lognormal(self.loc, self.scale)))
        if self.kind == "poisson":
            return float(rng.poisson(self.loc))
        if self.kind == "constant":
            return float(self.loc)
        raise BadProfile("derived features are not sampled")


def bern(p):
    return Dist("bernoulli", p=p)


def lognorm(median, scale):
    return Dist("lognormal", loc=math.log(median), scale=scale)


def poisson(rate):
    return Dist("poisson", loc=rate)


def const(v):
    return Dist("constant", loc=v)


DERIVED = Dist("derived")

# fixed by other features: lengths of generated structures and the CCS scores
DERIVED_FEATURES = frozenset({
    "dist-tags_length", "versions_length", "keywords_length", "License_length",
    *(f"{r}_CCS" for r in STAKEHOLDER_ROLES),
})


def default_profile() -> dict:
    """Feature -> (benign, malicious) distributions.

    Malicious packages lean toward missing authorship and links, short or
    absent documentation, young age, few versions, stakeholders with little
    history and repositories with little community activity. Distributions of
    gated features (lengths, author name/email, stakeholder counts) apply when
    the gating field is present.
    """
    p = {
        "name_exist": (const(1), const(1)),
        "name_length": (lognorm(9, 0.45), lognorm(11, 0.5)),
        "name_special_char": (bern(0.30), bern(0.45)),
        "dist-tags_exist": (bern(0.99), bern(0.95)),
        "dist-tags_length": (DERIVED, DERIVED),
        "versions_exist": (bern(0.99), bern(0.95)),
        "versions_length": (DERIVED, DERIVED),
        "versions_num_count": (lognorm(8, 1.0), lognorm(2, 0.8)),
        "maintainers_exist": (bern(0.97), bern(0.85)),
        "description_exist": (bern(0.92), bern(0.60)),
        "description_length": (lognorm(55, 0.6), lognorm(30, 0.8)),
        "readme_exist": (bern(0.90), bern(0.55)),
        "readme_length": (lognorm(2500, 1.0), lognorm(300, 1.2)),
        "scripts_exist": (bern(0.75), bern(0.70)),
        "scripts_length": (lognorm(80, 0.7), lognorm(60, 0.8)),
        "author_exist": (bern(0.85), bern(0.45)),
        "author_name": (bern(0.97), bern(0.85)),
        "author_email": (bern(0.70), bern(0.45)),
        "License_exist": (bern(0.90), bern(0.65)),
        "License_length": (DERIVED, DERIVED),
        "directories_exist": (bern(0.15), bern(0.08)),
        "directories_length": (lognorm(20, 0.4), lognorm(16, 0.4)),
        "keywords_exist": (bern(0.70), bern(0.35)),
        "keywords_length": (DERIVED, DERIVED),
        "keywords_num_count": (lognorm(5, 0.6), lognorm(2, 0.6)),
        "homepage_exist": (bern(0.80), bern(0.45)),
        "homepage_length": (lognorm(45, 0.25), lognorm(40, 0.3)),
        "github_exist": (bern(0.82), bern(0.45)),
        "github_length": (lognorm(50, 0.2), lognorm(45, 0.25)),
        "bugslink_exist": (bern(0.75), bern(0.35)),
        "bugslink_length": (lognorm(55, 0.2), lognorm(50, 0.25)),
        "issueslink_exist": (bern(0.20), bern(0.08)),
        "issueslink_length": (lognorm(55, 0.2), lognorm(50, 0.25)),
        "dependencies_exist": (bern(0.70), bern(0.60)),
        "dependencies_length": (lognorm(120, 0.8), lognorm(60, 0.8)),
        "devDependencies_exist": (bern(0.60), bern(0.30)),
        "devDependencies_length": (lognorm(200, 0.8), lognorm(80, 0.8)),
        "package_age": (lognorm(1200, 0.7), lognorm(25, 1.3)),
        "package_modified_duration": (lognorm(500, 0.9), lognorm(3, 1.3)),
        "package_published_duration": (lognorm(1, 1.0), lognorm(1, 1.0)),
        "pull_request": (lognorm(4, 1.2), poisson(0.3)),
        "issues": (lognorm(15, 1.3), poisson(0.5)),
        "fork_number": (lognorm(40, 1.5), poisson(0.8)),
        "star": (lognorm(150, 1.6), poisson(2.0)),
        "subscriber_count": (lognorm(12, 1.2), poisson(0.6)),
    }
    cpn_rate = {"author": (12, 1.2), "maintainer": (10, 1.0), "contributor": (6, 0.6), "publisher": (8, 0.8)}
    for role in STAKEHOLDER_ROLES:
        b_rate, m_rate = cpn_rate[role]
        p[f"{role}_CPN"] = (lognorm(b_rate, 1.0), poisson(m_rate))
        p[f"{role}_service_time"] = (lognorm(1500, 0.6), lognorm(60, 1.3))
        p[f"{role}_CCS"] = (DERIVED, DERIVED)
    return p


@dataclass(frozen=True)
class SynthSpec:
    n_malicious: int = 3232
    n_benign: int = 3232
    signal_profile: dict = field(default_factory=default_profile)
    seed: int = 0
    reference_time: datetime = datetime(2023, 6, 1, tzinfo=timezone.utc)
    catalog: Optional[FeatureCatalog] = None

    def validate(self):
        if self.n_malicious < 1 or self.n_benign < 1:
            raise BadProfile("n_malicious and n_benign must be positive")
        cat = self.catalog or canonical_catalog(include_special_char=True)
        full = canonical_catalog(include_special_char=True)
        for d in cat:
            pair = self.signal_profile.get(d.name)
            if pair is None or len(pair) != 2:
                raise BadProfile(f"profile lacks a (benign, malicious) pair for {d.name!r}")
            for dist in pair:
                dist.validate(d.name, d.value_kind)
        # features the generator needs even when the evaluated catalog omits them
        for name in full.names:
            if name not in self.signal_profile and name not in cat:
                raise BadProfile(f"profile lacks a (benign, malicious) pair for {name!r}")


_ALNUM = string.ascii_lowercase + string.digits
_LICENSES = ["MIT", "ISC", "Apache-2.0", "BSD-3-Clause", "BSD-2-Clause", "GPL-3.0", "MPL-2.0", "Unlicense"]
_WORDS = ["http", "client", "util", "react", "node", "parser", "cli", "async", "stream", "json",
          "logger", "config", "plugin", "test", "web", "api", "cache", "crypto", "string", "file"]
_SCRIPT_KEYS = ["test", "build", "lint", "start", "prepare", "coverage", "docs", "release"]
_DIR_KEYS = ["lib", "test", "doc", "bin", "man", "example"]


def _text(rng, n: int) -> str:
    words = np.array(_WORDS)[rng.integers(len(_WORDS), size=n // 3 + 1)]
    return " ".join(words.tolist())[:n].rstrip().ljust(n, "x")


def _ident(rng, n: int) -> str:
    return "".join(_ALNUM[i] for i in rng.integers(len(_ALNUM), size=n))


def _keys(rng, prefix: str, n: int) -> list:
    raw = _ident(rng, 5 * n)
    return [prefix + raw[i:i + 5] for i in range(0, 5 * n, 5)]


def _url(rng, prefix: str, suffix: str, n: int) -> str:
    """URL of exactly ``n`` characters (or the shortest possible one)."""
    pad = max(n - len(prefix) - len(suffix), 1)
    return prefix + _ident(rng, pad) + suffix


def _sized_dict(rng, target: int, keys: list, value) -> dict:
    """Dict whose compact JSON has exactly ``target`` characters when feasible."""
    def size(d):
        return len(json.dumps(d, separators=(",", ":"), sort_keys=True, ensure_ascii=False))

    d = {}
    for k in keys:
        trial = dict(d)
        trial[k] = value(k)
        if d and size(trial) > target:
            break
        d = trial
    if not d:
        d = {keys[0]: value(keys[0])}
    short = target - size(d)
    if short > 0:
        last = sorted(d)[-1]
        d[last] = d[last] + _ident(rng, short)
    return d


def _draw(profile, name, label, rng) -> float:
    return profile[name][label].sample(rng)


def _people(rng, label: int, row: int, role: str, with_name=True, with_email=True) -> Person:
    tag = f"{role[:1]}{row}{_ident(rng, 4)}"
    name = f"dev-{tag}" if with_name else None
    email = f"{tag}@example.org" if with_email else None
    return Person(name, email)


def _synth_record(profile: dict, label: int, row: int, ref: datetime, rng: np.random.Generator) -> PackageMetadata:
    draw = lambda name: _draw(profile, name, label, rng)  # noqa: E731

    # name
    name_len = int(min(max(draw("name_length"), 2), 214))
    name = _ident(rng, name_len)
    if name[0].isdigit():
        name = "p" + name[1:]
    if draw("name_special_char"):
        cut = int(rng.integers(1, name_len)) if name_len > 2 else 1
        name = name[:cut] + "-" + name[cut + 1:] if cut < name_len - 1 else name[:-1] + "-"
    # ages and times
    ref_day = datetime(ref.year, ref.month, ref.day, tzinfo=timezone.utc)
    age = int(max(draw("package_age"), 0))
    created = ref_day - timedelta(days=age) + timedelta(hours=1)
    if created > ref:
        created = ref
    modified_days = int(min(max(draw("package_modified_duration"), 0), age))
    modified = created + timedelta(days=modified_days)

    versions, published = [], {}
    if draw("versions_exist"):
        n_ver = int(max(draw("versions_num_count"), 1))
        first = int(min(max(draw("package_published_duration"), 0), modified_days))
        versions = [f"{1 + i // 10}.{i % 10}.{int(rng.integers(10))}" for i in range(n_ver)]
        span = modified_days - first
        offsets = np.sort(rng.integers(0, span + 1, size=n_ver)) if n_ver > 1 else np.array([0])
        offsets[0] = 0
        for v, off in zip(versions, offsets.tolist()):
            published[v] = created + timedelta(days=first + off, minutes=1)
            if published[v] > modified:
                published[v] = modified
    latest = versions[-1] if versions else "0.0.0"
    dist_tags = {"latest": latest} if draw("dist-tags_exist") else None

    def gated(flag, length_name, build):
        if not draw(flag):
            return None
        return build(int(max(draw(length_name), 1)))

    description = gated("description_exist", "description_length", lambda n: _text(rng, n))
    readme = gated("readme_exist", "readme_length", lambda n: _text(rng, n))
    scripts = gated("scripts_exist", "scripts_length",
                    lambda n: _sized_dict(rng, n, _SCRIPT_KEYS, lambda k: f"node {k}.js"))
    directories = gated("directories_exist", "directories_length",
                        lambda n: _sized_dict(rng, n, _DIR_KEYS, lambda k: k))
    dependencies = gated("dependencies_exist", "dependencies_length",
                         lambda n: _sized_dict(rng, n, _keys(rng, "dep-", 40),
                                               lambda k: "^1.0.0")) or {}
    dev_dependencies = gated("devDependencies_exist", "devDependencies_length",
                             lambda n: _sized_dict(rng, n, _keys(rng, "dev-", 40),
                                                   lambda k: "^2.0.0")) or {}
    owner = _ident(rng, 6)
    homepage = gated("homepage_exist", "homepage_length", lambda n: _url(rng, "https://", ".dev", n))
    github = gated("github_exist", "github_length",
                   lambda n: _url(rng, f"https://github.com/{owner}/", "", n))
    bugs = gated("bugslink_exist", "bugslink_length",
                 lambda n: _url(rng, f"https://github.com/{owner}/", "/issues", n))
    issues = gated("issueslink_exist", "issueslink_length",
                   lambda n: _url(rng, f"https://issues.example.org/{owner}/", "", n))
    licenses = _LICENSES[int(rng.integers(len(_LICENSES)))] if draw("License_exist") else None
    keywords = []
    if draw("keywords_exist"):
        n_kw = int(max(draw("keywords_num_count"), 1))
        keywords = [_WORDS[int(rng.integers(len(_WORDS)))] + (str(i) if i else "") for i in range(n_kw)]

    # stakeholders
    people = {r: [] for r in STAKEHOLDER_ROLES}
    if draw("author_exist"):
        has_name, has_email = bool(draw("author_name")), bool(draw("author_email"))
        if not (has_name or has_email):
            has_name = True
        people["author"].append(_people(rng, label, row, "author", has_name, has_email))
    if draw("maintainers_exist"):
        people["maintainer"].append(_people(rng, label, row, "maintainer"))
    history = {}
    for role in STAKEHOLDER_ROLES:
        cpn = int(max(draw(f"{role}_CPN"), 0))
        service = int(max(draw(f"{role}_service_time"), age))
        if role in ("contributor", "publisher") and cpn > 0:
            people[role].append(_people(rng, label, row, role))
        if cpn > 0 and people[role]:
            history[person_id(people[role][0])] = StakeholderRecord(
                role, ref_day - timedelta(days=service), cpn)

    interactions = InteractionCounts(**{k: int(max(draw(k), 0)) for k in InteractionCounts.FIELDS})
    return PackageMetadata(
        package_name=name,
        version=latest if versions else "",
        description=description,
        readme=readme,
        scripts=scripts,
        distribution_tags=dist_tags,
        authors=people["author"],
        contributors=people["contributor"],
        maintainers=people["maintainer"],
        publishers=people["publisher"],
        licenses=licenses,
        dependencies=dependencies,
        development_dependencies=dev_dependencies,
        created_time=created,
        modified_time=modified,
        published_times=published,
        versions=versions,
        npm_link=f"https://www.npmjs.com/package/{name}",
        homepage_link=homepage,
        github_link=github,
        bugs_link=bugs,
        issues_link=issues,
        keywords=keywords,
        directories=directories,
        interactions=interactions,
        stakeholder_history=history,
    )


def synthesize(spec: SynthSpec = SynthSpec()) -> list:
    """Seeded corpus of ``n_malicious`` + ``n_benign`` labeled records, malicious first.

    Each record draws from its own child generator so that record ``i`` does
    not depend on how many records follow it.
    """
    spec.validate()
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_malicious + spec.n_benign)
    out = []
    for i, child in enumerate(children):
        label = 1 if i < spec.n_malicious else 0
        rng = np.random.default_rng(child)
        out.append(LabeledPMI(_synth_record(spec.signal_profile, label, i, spec.reference_time, rng), label))
    return out

