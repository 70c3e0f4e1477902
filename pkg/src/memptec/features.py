"""Feature extractor: package metadata -> numeric vectors in catalog order."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .catalog import STAKEHOLDER_ROLES, FeatureCatalog, catalog as canonical_catalog
from .errors import BadBase, ClockSkew, UnknownFeature
from .pmi import InteractionCounts, LabeledPMI, PackageMetadata, person_id


def ccs(service_time_days, cpn, base: float = 2):
    """Community contribution score: log_b(1 + service days) * log_b(1 + CPN).

    Accepts scalars or numpy arrays. The +1 shift keeps the score defined (and
    zero) for a stakeholder with no service time or no packages.
    """
    if not base > 1:
        raise BadBase(f"logarithm base must be > 1, got {base!r}")
    s = np.asarray(service_time_days, dtype=float)
    c = np.asarray(cpn, dtype=float)
    if np.any(s < 0) or np.any(c < 0):
        raise ValueError("service time and CPN must be non-negative")
    if base == 2:
        out = np.log2(1.0 + s) * np.log2(1.0 + c)
    else:
        out = (np.log1p(s) / math.log(base)) * (np.log1p(c) / math.log(base))
    return float(out) if out.ndim == 0 else out


def days_between(start: datetime, end: datetime) -> int:
    """Whole UTC calendar days from ``start`` to ``end`` (negative if reversed)."""
    return (end.astimezone(timezone.utc).date() - start.astimezone(timezone.utc).date()).days


def canonical_text(value) -> str:
    """Serialised form whose character count defines a *_length feature."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return json.dumps(value, ensure_ascii=False, separators=(",", ":"), sort_keys=True)


def _exist(value) -> float:
    if value is None:
        return 0.0
    if isinstance(value, str):
        return 1.0 if value.strip() else 0.0
    return 1.0 if len(value) > 0 else 0.0


def _length(value) -> float:
    return float(len(canonical_text(value))) if _exist(value) else 0.0


def _has_special_char(name: str) -> float:
    return 1.0 if any(not (ch.isalnum() or ch.isspace()) for ch in name) else 0.0


def _stakeholder_features(pmi: PackageMetadata, role: str, reference_time: datetime, base: float) -> dict:
    people = pmi.people(role)
    service, cpn = 0.0, 0.0
    if people:
        rec = pmi.stakeholder_history.get(person_id(people[0]))
        if rec is not None:
            service = float(max(days_between(rec.first_seen, reference_time), 0))
            cpn = float(max(rec.contributed_package_count, 0))
    return {
        f"{role}_CPN": cpn,
        f"{role}_service_time": service,
        f"{role}_CCS": ccs(service, cpn, base),
    }


def feature_dict(pmi: PackageMetadata, reference_time: datetime, ccs_base: float = 2) -> dict:
    """Every known feature of one package, keyed by name."""
    if pmi.created_time is not None and reference_time < pmi.created_time:
        raise ClockSkew(
            f"{pmi.package_name}: reference time {reference_time.isoformat()} precedes "
            f"creation {pmi.created_time.isoformat()}"
        )
    author = pmi.authors[0] if pmi.authors else None
    f = {
        "name_exist": _exist(pmi.package_name),
        "name_length": _length(pmi.package_name),
        "name_special_char": _has_special_char(pmi.package_name),
        "dist-tags_exist": _exist(pmi.distribution_tags),
        "dist-tags_length": _length(pmi.distribution_tags),
        "versions_exist": _exist(pmi.versions),
        "versions_length": _length(pmi.versions),
        "versions_num_count": float(len(pmi.versions)),
        "maintainers_exist": _exist(pmi.maintainers),
        "description_exist": _exist(pmi.description),
        "description_length": _length(pmi.description),
        "readme_exist": _exist(pmi.readme),
        "readme_length": _length(pmi.readme),
        "scripts_exist": _exist(pmi.scripts),
        "scripts_length": _length(pmi.scripts),
        "author_exist": 1.0 if author is not None else 0.0,
        "author_name": _exist(author.name) if author else 0.0,
        "author_email": _exist(author.email) if author else 0.0,
        "License_exist": _exist(pmi.licenses),
        "License_length": _length(pmi.licenses),
        "directories_exist": _exist(pmi.directories),
        "directories_length": _length(pmi.directories),
        "keywords_exist": _exist(pmi.keywords),
        "keywords_length": _length(pmi.keywords),
        "keywords_num_count": float(len(pmi.keywords)),
        "homepage_exist": _exist(pmi.homepage_link),
        "homepage_length": _length(pmi.homepage_link),
        "github_exist": _exist(pmi.github_link),
        "github_length": _length(pmi.github_link),
        "bugslink_exist": _exist(pmi.bugs_link),
        "bugslink_length": _length(pmi.bugs_link),
        "issueslink_exist": _exist(pmi.issues_link),
        "issueslink_length": _length(pmi.issues_link),
        "dependencies_exist": _exist(pmi.dependencies),
        "dependencies_length": _length(pmi.dependencies),
        "devDependencies_exist": _exist(pmi.development_dependencies),
        "devDependencies_length": _length(pmi.development_dependencies),
    }

    age = modified = published = 0.0
    if pmi.created_time is not None:
        age = float(days_between(pmi.created_time, reference_time))
        if pmi.modified_time is not None:
            modified = float(max(days_between(pmi.created_time, pmi.modified_time), 0))
        if pmi.published_times:
            first = min(pmi.published_times.values())
            published = float(max(days_between(pmi.created_time, first), 0))
    f["package_age"] = age
    f["package_modified_duration"] = modified
    f["package_published_duration"] = published

    for role in STAKEHOLDER_ROLES:
        f.update(_stakeholder_features(pmi, role, reference_time, ccs_base))
    for k in InteractionCounts.FIELDS:
        f[k] = float(getattr(pmi.interactions, k))
    return f


@dataclass(frozen=True)
class FeatureVector:
    values: tuple
    package_name: str


def extract(pmi: PackageMetadata, cat: FeatureCatalog, reference_time: datetime,
            ccs_base: float = 2) -> FeatureVector:
    feats = feature_dict(pmi, reference_time, ccs_base)
    values = []
    for d in cat:
        if d.name not in feats:
            raise UnknownFeature(f"no extractor for feature {d.name!r}")
        values.append(feats[d.name])
    return FeatureVector(tuple(values), pmi.package_name)


@dataclass
class FeatureMatrix:
    """Dense matrix (rows = packages, columns = catalog order) with binary labels."""

    X: np.ndarray
    labels: np.ndarray
    catalog: FeatureCatalog
    package_names: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            self.X = self.X.reshape(len(self.labels), len(self.catalog))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.X.shape != (len(self.labels), len(self.catalog)):
            raise ValueError(
                f"matrix shape {self.X.shape} does not match {len(self.labels)} labels "
                f"x {len(self.catalog)} features"
            )
        if not self.package_names:
            self.package_names = [""] * len(self.labels)

    def __len__(self):
        return len(self.labels)

    @property
    def shape(self):
        return self.X.shape

    @property
    def rows(self) -> list:
        return [FeatureVector(tuple(r), n) for r, n in zip(self.X.tolist(), self.package_names)]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.catalog.index(name)]

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureMatrix(self.X[idx].copy(), self.labels[idx].copy(), self.catalog,
                             [self.package_names[i] for i in idx])

    def select(self, cat: FeatureCatalog) -> "FeatureMatrix":
        cols = [self.catalog.index(n) for n in cat.names]
        return FeatureMatrix(self.X[:, cols].copy(), self.labels.copy(), cat, list(self.package_names))

    def with_values(self, X: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(X, self.labels.copy(), self.catalog, list(self.package_names))

    def copy(self) -> "FeatureMatrix":
        return self.with_values(self.X.copy())

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.catalog.names + ["label"])
        for row, y in zip(self.X.tolist(), self.labels.tolist()):
            w.writerow([_fmt(v) for v in row] + [int(y)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, cat: Optional[FeatureCatalog] = None) -> "FeatureMatrix":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader)
        if header[-1] != "label":
            raise ValueError("last CSV column must be 'label'")
        names = header[:-1]
        full = canonical_catalog(include_special_char="name_special_char" in names)
        cat = cat or FeatureCatalog(full.descriptor(n) for n in names)
        if cat.names != names:
            raise ValueError("CSV header does not match catalog order")
        rows = [[float(v) for v in r] for r in reader]
        arr = np.array(rows, dtype=np.float64).reshape(len(rows), len(names) + 1)
        return cls(arr[:, :-1], arr[:, -1].astype(np.int64), cat)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 2**53 else repr(float(v))


def default_reference_time(corpus: Sequence) -> datetime:
    """Newest timestamp found in the corpus (modified, created or published)."""
    newest = None
    for item in corpus:
        pmi = item.metadata if isinstance(item, LabeledPMI) else item
        stamps = [pmi.modified_time, pmi.created_time, *pmi.published_times.values()]
        for ts in stamps:
            if ts is not None and (newest is None or ts > newest):
                newest = ts
    if newest is None:
        raise ValueError("corpus carries no timestamps; pass reference_time explicitly")
    return newest


def extract_matrix(corpus: Sequence[LabeledPMI], cat: FeatureCatalog, reference_time: datetime,
                   ccs_base: float = 2) -> FeatureMatrix:
    if not corpus:
        raise ValueError("corpus is empty")
    X = np.empty((len(corpus), len(cat)), dtype=np.float64)
    names = []
    for i, item in enumerate(corpus):
        try:
            X[i] = extract(item.metadata, cat, reference_time, ccs_base).values
        except ClockSkew as exc:
            raise ClockSkew(f"package #{i} ({item.metadata.package_name}): {exc}") from exc
        names.append(item.metadata.package_name)
    labels = np.array([item.label for item in corpus], dtype=np.int64)
    return FeatureMatrix(X, labels, cat, names)
