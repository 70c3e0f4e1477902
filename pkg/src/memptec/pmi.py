"""Package metadata records and the registry-document parser.

A registry document (the JSON served by ``registry.npmjs.org/<name>``) is
normalised into an immutable :class:`PackageMetadata`. Fields that live in the
version manifest (scripts, dependencies, ...) are read from the top level
first and then from the manifest of the ``latest`` dist-tag.

Two keys are not part of the registry response and are attached by the
ingestion layer or the synthetic generator: ``interactions`` (repository
counts) and ``stakeholder_history`` (cross-package stakeholder aggregates).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Any, Optional

from .errors import MalformedDocument, MissingName

ROLES = ("author", "maintainer", "contributor", "publisher")

# keys consumed by the parser; everything else lands in PackageMetadata.extra
_KNOWN_KEYS = {
    "name", "package_name", "_id", "version", "description", "readme",
    "scripts", "dist-tags", "distribution_tags", "author", "authors",
    "contributors", "maintainers", "publishers", "_npmUser", "license",
    "licenses", "dependencies", "devDependencies", "development_dependencies",
    "time", "created_time", "modified_time", "published_times", "npm_link",
    "homepage", "homepage_link", "repository", "github_link", "bugs",
    "bugs_link", "issues_link", "keywords", "tags", "directories",
    "interactions", "stakeholder_history", "versions",
}

_TS_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})"
    r"(?:[T ](\d{2}):(\d{2})(?::(\d{2})(?:\.(\d{1,9}))?)?)?"
    r"\s*(Z|z|[+-]\d{2}:?\d{2})?$"
)


@dataclass(frozen=True)
class Person:
    name: Optional[str] = None
    email: Optional[str] = None

    @property
    def person_id(self) -> str:
        return person_id(self)


@dataclass(frozen=True)
class InteractionCounts:
    pull_request: int = 0
    issues: int = 0
    fork_number: int = 0
    star: int = 0
    subscriber_count: int = 0

    FIELDS = ("pull_request", "issues", "fork_number", "star", "subscriber_count")


@dataclass(frozen=True)
class StakeholderRecord:
    role: str
    first_seen: datetime
    contributed_package_count: int


@dataclass(frozen=True)
class PackageMetadata:
    package_name: str
    version: str = ""
    description: Optional[str] = None
    readme: Optional[str] = None
    scripts: Optional[dict] = None
    distribution_tags: Optional[dict] = None
    authors: list = field(default_factory=list)
    contributors: list = field(default_factory=list)
    maintainers: list = field(default_factory=list)
    publishers: list = field(default_factory=list)
    licenses: Optional[str] = None
    dependencies: dict = field(default_factory=dict)
    development_dependencies: dict = field(default_factory=dict)
    created_time: Optional[datetime] = None
    modified_time: Optional[datetime] = None
    published_times: dict = field(default_factory=dict)
    versions: list = field(default_factory=list)
    npm_link: Optional[str] = None
    homepage_link: Optional[str] = None
    github_link: Optional[str] = None
    bugs_link: Optional[str] = None
    issues_link: Optional[str] = None
    keywords: list = field(default_factory=list)
    tags: Optional[int] = None
    directories: Optional[dict] = None
    interactions: InteractionCounts = field(default_factory=InteractionCounts)
    stakeholder_history: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    warnings: tuple = ()

    def people(self, role: str) -> list:
        return {
            "author": self.authors,
            "maintainer": self.maintainers,
            "contributor": self.contributors,
            "publisher": self.publishers,
        }[role]

    def with_interactions(self, counts: InteractionCounts) -> "PackageMetadata":
        return replace(self, interactions=counts)

    def with_history(self, history: dict) -> "PackageMetadata":
        return replace(self, stakeholder_history=dict(history))


@dataclass(frozen=True)
class LabeledPMI:
    metadata: PackageMetadata
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    message: str = ""


def person_id(person: Person) -> str:
    """Normalised identity of a stakeholder: lowercased, trimmed name|email."""
    name = (person.name or "").strip().lower()
    email = (person.email or "").strip().lower()
    return f"{name}|{email}"


def parse_timestamp(value: Any) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    if not isinstance(value, str):
        raise ValueError(f"not a timestamp: {value!r}")
    m = _TS_RE.match(value.strip())
    if not m:
        raise ValueError(f"not a timestamp: {value!r}")
    year, month, day, hh, mm, ss, frac, tz = m.groups()
    micro = int((frac or "0")[:6].ljust(6, "0"))
    ts = datetime(int(year), int(month), int(day), int(hh or 0), int(mm or 0),
                  int(ss or 0), micro, tzinfo=timezone.utc)
    if tz and tz not in ("Z", "z"):
        sign = 1 if tz[0] == "+" else -1
        digits = tz[1:].replace(":", "")
        offset = timedelta(hours=int(digits[:2]), minutes=int(digits[2:]))
        ts = ts - sign * offset
    return ts


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


_PERSON_RE = re.compile(r"^\s*([^<(]*?)\s*(?:<([^>]*)>)?\s*(?:\(([^)]*)\))?\s*$")


def _person(value: Any) -> Optional[Person]:
    if isinstance(value, Person):
        return value
    if isinstance(value, str):
        m = _PERSON_RE.match(value)
        name, email = (m.group(1), m.group(2)) if m else (value, None)
        return Person(name or None, (email or "").strip() or None)
    if isinstance(value, dict):
        name = value.get("name")
        email = value.get("email")
        name = name.strip() if isinstance(name, str) and name.strip() else None
        email = email.strip() if isinstance(email, str) and email.strip() else None
        return Person(name, email)
    return None


def _people(value: Any) -> list:
    if value is None:
        return []
    items = value if isinstance(value, list) else [value]
    out = []
    for item in items:
        p = _person(item)
        if p is not None:
            out.append(p)
    return out


def _str_map(value: Any) -> Optional[dict]:
    if not isinstance(value, dict):
        return None
    return {str(k): v if isinstance(v, str) else json.dumps(v, sort_keys=True)
            for k, v in value.items()}


def _url(value: Any) -> Optional[str]:
    if isinstance(value, dict):
        value = value.get("url")
    if isinstance(value, str) and value.strip():
        return value.strip()
    return None


def _license(doc: dict, manifest: dict) -> Optional[str]:
    for src in (doc, manifest):
        lic = src.get("license")
        if isinstance(lic, dict):
            lic = lic.get("type")
        if isinstance(lic, str) and lic.strip():
            return lic.strip()
        lics = src.get("licenses")
        if isinstance(lics, str) and lics.strip():
            return lics.strip()
        if isinstance(lics, list):
            names = [(x.get("type") if isinstance(x, dict) else x) for x in lics]
            names = [n for n in names if isinstance(n, str) and n]
            if names:
                return " OR ".join(names)
    return None


def _pick(doc: dict, manifest: dict, *keys):
    for src in (doc, manifest):
        for k in keys:
            if k in src and src[k] is not None:
                return src[k]
    return None


def _nonneg_int(value: Any) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        return 0
    return max(n, 0)


def _interactions(value: Any) -> InteractionCounts:
    if not isinstance(value, dict):
        return InteractionCounts()
    return InteractionCounts(**{k: _nonneg_int(value.get(k, 0)) for k in InteractionCounts.FIELDS})


def _history(value: Any, warnings: list) -> dict:
    if not isinstance(value, dict):
        return {}
    out = {}
    for pid, rec in value.items():
        if not isinstance(rec, dict):
            continue
        try:
            first_seen = parse_timestamp(rec.get("first_seen"))
        except ValueError:
            warnings.append(f"stakeholder_history[{pid}].first_seen: bad timestamp")
            continue
        out[str(pid)] = StakeholderRecord(
            role=str(rec.get("role", "author")),
            first_seen=first_seen,
            contributed_package_count=_nonneg_int(rec.get("contributed_package_count", 0)),
        )
    return out


def parse_document(doc: dict) -> PackageMetadata:
    """Normalise an already-decoded registry document."""
    if not isinstance(doc, dict):
        raise MalformedDocument("document is not a JSON object")
    name = doc.get("name") or doc.get("package_name") or doc.get("_id")
    if not isinstance(name, str) or not name.strip():
        raise MissingName("document has no package name")

    warnings: list[str] = []
    dist_tags = _str_map(doc.get("dist-tags", doc.get("distribution_tags")))
    versions_map = doc.get("versions") if isinstance(doc.get("versions"), dict) else {}
    latest = (dist_tags or {}).get("latest")
    manifest = versions_map.get(latest) if latest else None
    manifest = manifest if isinstance(manifest, dict) else {}

    created = modified = None
    published: dict = {}
    time_map = doc.get("time") if isinstance(doc.get("time"), dict) else {}
    raw_created = time_map.get("created", doc.get("created_time"))
    raw_modified = time_map.get("modified", doc.get("modified_time"))
    if raw_created is not None:
        try:
            created = parse_timestamp(raw_created)
        except ValueError:
            warnings.append("created_time: bad timestamp")
    if raw_modified is not None:
        try:
            modified = parse_timestamp(raw_modified)
        except ValueError:
            warnings.append("modified_time: bad timestamp")
    pub_src = {k: v for k, v in time_map.items() if k not in ("created", "modified", "unpublished")}
    if isinstance(doc.get("published_times"), dict):
        pub_src.update(doc["published_times"])
    for ver, raw in pub_src.items():
        try:
            published[str(ver)] = parse_timestamp(raw)
        except ValueError:
            warnings.append(f"published_times[{ver}]: bad timestamp")

    versions = [str(v) for v in versions_map]
    versions += [v for v in published if v not in versions_map]

    keywords = _pick(doc, manifest, "keywords")
    if isinstance(keywords, str):
        keywords = [k.strip() for k in keywords.split(",") if k.strip()]
    keywords = [str(k) for k in keywords] if isinstance(keywords, list) else []

    tags = doc.get("tags")
    if isinstance(tags, list):
        tags = len(tags)
    tags = _nonneg_int(tags) if tags is not None else None

    publishers = _people(_pick(doc, manifest, "publishers"))
    if not publishers:
        publishers = _people(manifest.get("_npmUser"))

    version = doc.get("version")
    if not isinstance(version, str):
        version = latest or ""
    description = _pick(doc, manifest, "description")
    readme = _pick(doc, manifest, "readme")

    return PackageMetadata(
        package_name=name.strip(),
        version=version,
        description=description if isinstance(description, str) else None,
        readme=readme if isinstance(readme, str) else None,
        scripts=_str_map(_pick(doc, manifest, "scripts")),
        distribution_tags=dist_tags,
        authors=_people(_pick(doc, manifest, "authors", "author")),
        contributors=_people(_pick(doc, manifest, "contributors")),
        maintainers=_people(_pick(doc, manifest, "maintainers")),
        publishers=publishers,
        licenses=_license(doc, manifest),
        dependencies=_str_map(_pick(doc, manifest, "dependencies")) or {},
        development_dependencies=_str_map(_pick(doc, manifest, "devDependencies", "development_dependencies")) or {},
        created_time=created,
        modified_time=modified,
        published_times=published,
        versions=versions,
        npm_link=_url(doc.get("npm_link")),
        homepage_link=_url(_pick(doc, manifest, "homepage", "homepage_link")),
        github_link=_url(_pick(doc, manifest, "repository", "github_link")),
        bugs_link=_url(_pick(doc, manifest, "bugs", "bugs_link")),
        issues_link=_url(doc.get("issues_link")),
        keywords=keywords,
        tags=tags,
        directories=_str_map(_pick(doc, manifest, "directories")),
        interactions=_interactions(doc.get("interactions")),
        stakeholder_history=_history(doc.get("stakeholder_history"), warnings),
        extra={k: v for k, v in doc.items() if k not in _KNOWN_KEYS},
        warnings=tuple(warnings),
    )


def parse_pmi(raw_document) -> PackageMetadata:
    """Parse registry JSON text (str or bytes) into a :class:`PackageMetadata`."""
    try:
        doc = json.loads(raw_document)
    except (TypeError, ValueError) as exc:
        raise MalformedDocument(f"unparseable JSON: {exc}") from exc
    return parse_document(doc)


def _person_doc(p: Person) -> dict:
    d = {}
    if p.name is not None:
        d["name"] = p.name
    if p.email is not None:
        d["email"] = p.email
    return d


def to_document(pmi: PackageMetadata) -> dict:
    """Canonical registry-shaped document; ``parse_document`` inverts it."""
    doc: dict = dict(pmi.extra)
    doc["name"] = pmi.package_name
    doc["version"] = pmi.version
    optional = {
        "description": pmi.description,
        "readme": pmi.readme,
        "scripts": pmi.scripts,
        "dist-tags": pmi.distribution_tags,
        "license": pmi.licenses,
        "npm_link": pmi.npm_link,
        "homepage": pmi.homepage_link,
        "repository": pmi.github_link,
        "bugs": pmi.bugs_link,
        "issues_link": pmi.issues_link,
        "tags": pmi.tags,
        "directories": pmi.directories,
    }
    doc.update({k: v for k, v in optional.items() if v is not None})
    doc["authors"] = [_person_doc(p) for p in pmi.authors]
    doc["contributors"] = [_person_doc(p) for p in pmi.contributors]
    doc["maintainers"] = [_person_doc(p) for p in pmi.maintainers]
    doc["publishers"] = [_person_doc(p) for p in pmi.publishers]
    doc["dependencies"] = dict(pmi.dependencies)
    doc["devDependencies"] = dict(pmi.development_dependencies)
    doc["keywords"] = list(pmi.keywords)
    doc["versions"] = {v: {} for v in pmi.versions}
    time_map = {}
    if pmi.created_time is not None:
        time_map["created"] = format_timestamp(pmi.created_time)
    if pmi.modified_time is not None:
        time_map["modified"] = format_timestamp(pmi.modified_time)
    time_map.update({v: format_timestamp(t) for v, t in pmi.published_times.items()})
    doc["time"] = time_map
    doc["interactions"] = {k: getattr(pmi.interactions, k) for k in InteractionCounts.FIELDS}
    doc["stakeholder_history"] = {
        pid: {
            "role": rec.role,
            "first_seen": format_timestamp(rec.first_seen),
            "contributed_package_count": rec.contributed_package_count,
        }
        for pid, rec in pmi.stakeholder_history.items()
    }
    return doc


def serialize(pmi: PackageMetadata) -> str:
    return json.dumps(to_document(pmi), ensure_ascii=False)


def validate_pmi(pmi: PackageMetadata) -> list:
    """Return the list of invariant violations; empty when the record is sound."""
    out = []
    if not pmi.package_name or not pmi.package_name.strip():
        out.append(Violation("package_name", "empty-name", "package name is empty"))
    if pmi.created_time is not None:
        if pmi.modified_time is not None and pmi.created_time > pmi.modified_time:
            out.append(Violation("modified_time", "time-order", "created after modified"))
        for ver, ts in pmi.published_times.items():
            if pmi.created_time > ts:
                out.append(Violation(f"published_times[{ver}]", "time-order",
                                     "created after publication"))
    for role in ROLES:
        for i, p in enumerate(pmi.people(role)):
            if not (p.name or "").strip() and not (p.email or "").strip():
                out.append(Violation(f"{role}s[{i}]", "empty-person", "neither name nor email"))
    for k in InteractionCounts.FIELDS:
        if getattr(pmi.interactions, k) < 0:
            out.append(Violation(f"interactions.{k}", "negative-count"))
    for pid, rec in pmi.stakeholder_history.items():
        if rec.role not in ROLES:
            out.append(Violation(f"stakeholder_history[{pid}]", "bad-role", rec.role))
        if rec.contributed_package_count < 1:
            out.append(Violation(f"stakeholder_history[{pid}]", "cpn-range",
                                 "attached stakeholder must have CPN >= 1"))
    return out
