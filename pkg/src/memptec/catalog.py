"""The ordered feature catalog: 36 easy-to-manipulate + 20 difficult-to-manipulate features.

Column order of every feature matrix is the catalog order. A feature is DTM
when its value can only move one way under legitimate updates (monotonic) or
when the package's own stakeholders cannot set it (restricted control);
otherwise it is ETM.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import UnknownFeature

ETM = "ETM"
DTM = "DTM"

VALUE_KINDS = ("binary", "count", "length", "duration_days", "score")


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    klass: str
    monotonic: bool
    restricted_control: bool
    source_information: str
    value_kind: str


def _etm(name, source, kind):
    return FeatureDescriptor(name, ETM, False, False, source, kind)


def _dtm(name, source, kind, *, monotonic=False, restricted=False):
    return FeatureDescriptor(name, DTM, monotonic, restricted, source, kind)


# (feature name, source information key) for exist/length pairs, in catalog order
_ETM_SPECS = [
    ("name_exist", "package_name", "binary"),
    ("name_length", "package_name", "length"),
    ("dist-tags_exist", "distribution_tag", "binary"),
    ("dist-tags_length", "distribution_tag", "length"),
    ("versions_exist", "published_time", "binary"),
    ("versions_length", "published_time", "length"),
    # version count only grows, yet the feature table files it as ETM: an
    # author mints versions at will, so it is not treated as monotonic here
    ("versions_num_count", "published_time", "count"),
    ("maintainers_exist", "maintainers", "binary"),
    ("description_exist", "description", "binary"),
    ("description_length", "description", "length"),
    ("readme_exist", "readme", "binary"),
    ("readme_length", "readme", "length"),
    ("scripts_exist", "scripts", "binary"),
    ("scripts_length", "scripts", "length"),
    ("author_exist", "authors", "binary"),
    ("author_name", "authors", "binary"),
    ("author_email", "authors", "binary"),
    ("License_exist", "licenses", "binary"),
    ("License_length", "licenses", "length"),
    ("directories_exist", "directories", "binary"),
    ("directories_length", "directories", "length"),
    ("keywords_exist", "keywords", "binary"),
    ("keywords_length", "keywords", "length"),
    ("keywords_num_count", "keywords", "count"),
    ("homepage_exist", "homepage_link", "binary"),
    ("homepage_length", "homepage_link", "length"),
    ("github_exist", "GitHub_link", "binary"),
    ("github_length", "GitHub_link", "length"),
    ("bugslink_exist", "bugs_link", "binary"),
    ("bugslink_length", "bugs_link", "length"),
    ("issueslink_exist", "issues_link", "binary"),
    ("issueslink_length", "issues_link", "length"),
    ("dependencies_exist", "dependencies", "binary"),
    ("dependencies_length", "dependencies", "length"),
    ("devDependencies_exist", "development_dependencies", "binary"),
    ("devDependencies_length", "development_dependencies", "length"),
]

STAKEHOLDER_ROLES = ("author", "maintainer", "contributor", "publisher")
INTERACTION_FEATURES = ("pull_request", "issues", "fork_number", "star", "subscriber_count")
TEMPORAL_FEATURES = (
    "package_age",
    "package_modified_duration",
    "package_published_duration",
    *(f"{r}_service_time" for r in STAKEHOLDER_ROLES),
)
CCS_FEATURES = tuple(f"{r}_CCS" for r in STAKEHOLDER_ROLES)

# the feature table never lists the name special-character flag; opt in only
NAME_SPECIAL_CHAR = FeatureDescriptor("name_special_char", ETM, False, False, "package_name", "binary")

EXISTING_TEC_DEFAULT = (
    "name_length",
    "description_exist",
    "readme_length",
    "scripts_exist",
    "author_exist",
    "maintainers_exist",
    "dependencies_exist",
    "devDependencies_exist",
    "versions_length",
    "homepage_exist",
    "github_exist",
)

# sha256 over the newline-joined canonical names; guards column order
CANONICAL_ORDER_SHA256 = "9f28a7c0090a9515a1d9ac32c4722cc643ce9b0481737cc106c216a8e501825d"


def _build_canonical():
    feats = [_etm(*spec) for spec in _ETM_SPECS]
    feats += [
        _dtm("package_age", "created_time", "duration_days", monotonic=True),
        _dtm("package_modified_duration", "modified_time", "duration_days", monotonic=True),
        _dtm("package_published_duration", "published_time", "duration_days", monotonic=True),
    ]
    for role in STAKEHOLDER_ROLES:
        feats += [
            _dtm(f"{role}_CPN", "stakeholder_history", "count", monotonic=True),
            _dtm(f"{role}_service_time", "stakeholder_history", "duration_days", monotonic=True),
            _dtm(f"{role}_CCS", "stakeholder_history", "score", monotonic=True),
        ]
    feats += [
        _dtm("pull_request", "interactions", "count", restricted=True),
        _dtm("issues", "interactions", "count", restricted=True),
        _dtm("fork_number", "fork_number", "count", restricted=True),
        _dtm("star", "star", "count", restricted=True),
        _dtm("subscriber_count", "subscriber_count", "count", restricted=True),
    ]
    return tuple(feats)


_CANONICAL = _build_canonical()


class FeatureCatalog:
    """Immutable ordered collection of :class:`FeatureDescriptor`."""

    def __init__(self, features: Iterable[FeatureDescriptor]):
        self._features = tuple(features)
        self._index = {f.name: i for i, f in enumerate(self._features)}
        if len(self._index) != len(self._features):
            raise ValueError("feature names must be unique")

    def __len__(self):
        return len(self._features)

    def __iter__(self):
        return iter(self._features)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.descriptor(key)
        return self._features[key]

    def __contains__(self, name):
        return name in self._index

    def __eq__(self, other):
        return isinstance(other, FeatureCatalog) and self._features == other._features

    def __hash__(self):
        return hash(self._features)

    def __repr__(self):
        return f"FeatureCatalog({len(self)} features, fingerprint={self.fingerprint})"

    @property
    def features(self) -> tuple:
        return self._features

    @property
    def names(self) -> list:
        return [f.name for f in self._features]

    def descriptor(self, name: str) -> FeatureDescriptor:
        try:
            return self._features[self._index[name]]
        except KeyError:
            raise UnknownFeature(f"unknown feature: {name!r}") from None

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownFeature(f"unknown feature: {name!r}") from None

    def count(self, klass: str) -> int:
        return sum(1 for f in self._features if f.klass == klass)

    @property
    def fingerprint(self) -> str:
        return order_hash(self.names)[:16]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "class", "monotonic", "restricted_control", "source_information", "value_kind"])
        for f in self._features:
            w.writerow([f.name, f.klass, str(f.monotonic).lower(), str(f.restricted_control).lower(),
                        f.source_information, f.value_kind])
        return buf.getvalue()


def order_hash(names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()


def catalog(include_special_char: bool = False) -> FeatureCatalog:
    """The canonical 56-feature catalog (57 with the opt-in special-character flag)."""
    if include_special_char:
        feats = list(_CANONICAL)
        feats.insert(2, NAME_SPECIAL_CHAR)
        return FeatureCatalog(feats)
    return FeatureCatalog(_CANONICAL)


FEATURE_SETS = ("existing_tec", "memptec_e", "memptec_d", "memptec")


def subset(cat: FeatureCatalog, selector="all", existing_tec: Sequence[str] = EXISTING_TEC_DEFAULT) -> FeatureCatalog:
    """Restrict ``cat`` to a selector, keeping parent order.

    ``selector`` is one of ``all``/``memptec``, ``etm_only``/``memptec_e``,
    ``dtm_only``/``memptec_d``, ``existing_tec``, or a list of feature names.
    """
    if isinstance(selector, str):
        if selector in ("all", "memptec"):
            keep = set(cat.names)
        elif selector in ("etm_only", "memptec_e"):
            keep = {f.name for f in cat if f.klass == ETM}
        elif selector in ("dtm_only", "memptec_d"):
            keep = {f.name for f in cat if f.klass == DTM}
        elif selector == "existing_tec":
            keep = set(existing_tec)
        else:
            raise ValueError(f"unknown selector: {selector!r}")
    else:
        keep = set(selector)
    for name in keep:
        cat.index(name)
    return FeatureCatalog(f for f in cat if f.name in keep)


def default_grouping(cat: FeatureCatalog) -> dict:
    """Information key -> member feature names, derived from ``source_information``."""
    groups: dict = {}
    for f in cat:
        groups.setdefault(f.source_information, []).append(f.name)
    return groups
