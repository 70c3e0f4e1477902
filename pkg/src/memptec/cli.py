"""Command-line entry point: ``memptec <subcommand> [--config FILE] [flags]``.

Settings resolve as flags > config file > defaults. Every artifact written to
``--output-dir`` carries the tool version, the config hash and the seed.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from . import __version__
from .catalog import FEATURE_SETS, catalog, subset
from .dataset import RATIOS, SplitIndices, SplitSpec, SynthSpec, assemble, repeated_splits, synthesize
from .errors import ConfigInvalid, MemptecError
from .evaluation import Report, metrics, reports_to_csv, reports_to_json
from .features import FeatureMatrix, default_reference_time, extract_matrix
from .models import ALGORITHMS, TrainedModel, predict_proba
from .pipeline import FEATURE_SET_LABELS, feature_matrix_for, run_attacks, run_grid
from .adversarial import curves_to_csv
from .pmi import parse_timestamp

ATTACK_KINDS = ("percentage", "topn", "information")
DRIFT_KINDS = ("drift_temporal", "drift_interaction")
# paths and parallelism do not change results, so they stay out of the hash
_UNHASHED = ("output_dir", "cache_dir", "jobs")


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "memptec-out"
    cache_dir: Optional[str] = None
    jobs: int = 1
    # dataset
    source: str = "synth"
    corpus: Optional[str] = None
    malicious: Optional[str] = None
    benign: Optional[str] = None
    ratio: str = "balanced_1_1"
    n_malicious: int = 3232
    n_benign: Optional[int] = None
    reference_time: Optional[str] = None
    ccs_base: float = 2.0
    include_special_char: bool = False
    # training / evaluation
    feature_sets: list = field(default_factory=lambda: list(FEATURE_SETS))
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    folds: int = 5
    split_scheme: str = "holdout"
    stratified: bool = True
    hyperparams: dict = field(default_factory=dict)
    existing_tec: Optional[list] = None
    # attacks
    attack_kinds: list = field(default_factory=lambda: ["percentage"])
    steps: list = field(default_factory=lambda: [i / 10 for i in range(1, 11)])
    n_max: int = 10
    ranking: str = "permutation"
    repeats: int = 10
    attack_all_rows: bool = False
    attack_fold: int = 0
    days: list = field(default_factory=lambda: [0, 30, 90, 180, 360])
    counts: list = field(default_factory=lambda: [0, 10, 20, 30, 40, 50])
    # ingestion
    packages: list = field(default_factory=list)
    label: Optional[int] = None
    offline: bool = False
    max_concurrent: int = 4
    rps: float = 2.0

    def validate(self):
        def bad(msg):
            raise ConfigInvalid(msg)

        if not isinstance(self.seed, int) or self.seed < 0:
            bad(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.jobs < 1:
            bad("jobs must be at least 1")
        if self.source not in ("synth", "corpus"):
            bad(f"source must be 'synth' or 'corpus', got {self.source!r}")
        if self.ratio not in RATIOS:
            bad(f"ratio must be one of {sorted(RATIOS)}, got {self.ratio!r}")
        if self.n_malicious < 1 or (self.n_benign is not None and self.n_benign < 1):
            bad("corpus sizes must be positive")
        for fs in self.feature_sets:
            if fs not in FEATURE_SETS:
                bad(f"unknown feature set {fs!r}; expected one of {FEATURE_SETS}")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                bad(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        if self.folds < 2:
            bad("folds must be at least 2")
        if self.split_scheme not in ("holdout", "kfold"):
            bad(f"split_scheme must be 'holdout' or 'kfold', got {self.split_scheme!r}")
        for k in self.attack_kinds:
            if k not in ATTACK_KINDS:
                bad(f"unknown attack kind {k!r}; expected one of {ATTACK_KINDS}")
        if not self.steps or any(not 0 < s <= 1 for s in self.steps) or sorted(set(self.steps)) != list(self.steps):
            bad("steps must be strictly ascending fractions in (0, 1]")
        if self.ranking not in ("permutation", "exact_shapley"):
            bad(f"unknown ranking method {self.ranking!r}")
        if not 0 <= self.attack_fold < self.folds:
            bad("attack_fold must index one of the folds")
        for name, sched in (("days", self.days), ("counts", self.counts)):
            if any(v < 0 for v in sched) or sorted(sched) != list(sched):
                bad(f"{name} must be non-negative and ascending")
        if self.ccs_base <= 1:
            bad("ccs_base must exceed 1")
        if self.reference_time is not None:
            try:
                parse_timestamp(self.reference_time)
            except ValueError as exc:
                bad(f"reference_time: {exc}")
        if self.label not in (None, 0, 1):
            bad("label must be 0 or 1")
        if self.max_concurrent < 1 or self.rps <= 0:
            bad("max_concurrent and rps must be positive")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def config_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def benign_count(self) -> int:
        return self.n_benign if self.n_benign is not None else RATIOS[self.ratio] * self.n_malicious


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigInvalid(f"cannot parse config {path}: {exc}") from exc
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigInvalid("config file must hold a mapping")
    out = {}
    for key, value in data.items():
        name = key.replace("-", "_")
        if name not in _FIELDS:
            raise ConfigInvalid(f"unknown config key {key!r}")
        out[name] = value
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = load_config(getattr(args, "config", None))
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if "cache_dir" not in values and os.environ.get("MEMPTEC_CACHE_DIR"):
        values["cache_dir"] = os.environ["MEMPTEC_CACHE_DIR"]
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc
    cfg.steps = [float(s) / 100 if float(s) > 1 else float(s) for s in cfg.steps]
    return cfg.validate()


# -- artifact helpers ---------------------------------------------------------

def header(cfg: RunConfig) -> dict:
    return {"tool_version": __version__, "config_hash": cfg.config_hash, "seed": cfg.seed}


def header_lines(cfg: RunConfig) -> list:
    return [f"{k}={v}" for k, v in header(cfg).items()]


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir)


def _need(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MemptecError(f"{path} not found; run `memptec {producer}` first")
    return path


def _dataset_name(cfg: RunConfig) -> str:
    return f"synthetic_{cfg.ratio}" if cfg.source == "synth" else f"corpus_{cfg.ratio}"


def _full_catalog(cfg: RunConfig):
    return catalog(include_special_char=cfg.include_special_char)


def _load_features(cfg: RunConfig) -> FeatureMatrix:
    text = _need(_out(cfg) / "features.csv", "extract").read_text(encoding="utf-8")
    return FeatureMatrix.from_csv(text)


def _load_splits(cfg: RunConfig) -> list:
    return [SplitIndices.from_json(_need(_out(cfg) / "splits" / f"fold{i}.json", "train").read_text())
            for i in range(cfg.folds)]


def _model_path(cfg: RunConfig, fs: str, alg: str, fold: int) -> Path:
    return _out(cfg) / "models" / f"{fs}__{alg}__fold{fold}.json"


def _load_model(cfg, fs, alg, fold) -> TrainedModel:
    doc = json.loads(_need(_model_path(cfg, fs, alg, fold), "train").read_text(encoding="utf-8"))
    return TrainedModel.from_json(json.dumps(doc["model"]))


def _catalogs(cfg: RunConfig, fm: FeatureMatrix) -> dict:
    kw = {"existing_tec": cfg.existing_tec} if cfg.existing_tec else {}
    return {fs: subset(fm.catalog, fs, **kw) for fs in cfg.feature_sets}


# -- subcommands ------------------------------------------------------------

def cmd_catalog(cfg: RunConfig, args) -> int:
    cat = _full_catalog(cfg)
    if args.feature_set:
        cat = subset(cat, args.feature_set)
    sys.stdout.write(cat.to_csv())
    return 0


def cmd_ingest(cfg: RunConfig, args) -> int:
    from .registry import CACHE_FIRST, OFFLINE_ONLY, CachePolicy, FetchBudget, RegistryClient, attach_history
    from .registry import write_corpus
    from .pmi import LabeledPMI

    if not cfg.packages:
        raise ConfigInvalid("ingest needs package names (positional or `packages` in the config)")
    if cfg.label is None:
        raise ConfigInvalid("ingest needs --label 0|1 for the fetched packages")
    policy_kw = {"mode": OFFLINE_ONLY if cfg.offline else CACHE_FIRST}
    if cfg.cache_dir:
        policy_kw["cache_dir"] = Path(cfg.cache_dir)
    budget = FetchBudget(max_concurrent=cfg.max_concurrent, requests_per_second=cfg.rps)
    with RegistryClient(CachePolicy(**policy_kw), budget) as client:
        records = [client.ingest(name) for name in cfg.packages]
    corpus = attach_history([LabeledPMI(r, cfg.label) for r in records])
    out = Path(args.out) if args.out else _out(cfg) / "ingested.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(out, corpus, header(cfg))
    print(f"wrote {len(corpus)} packages to {out}")
    return 0


def _corpus(cfg: RunConfig):
    from .registry import load_fixture_corpus

    if cfg.source == "synth":
        spec = SynthSpec(n_malicious=cfg.n_malicious, n_benign=cfg.benign_count, seed=cfg.seed)
        return synthesize(spec)
    if cfg.corpus:
        return load_fixture_corpus(cfg.corpus)
    if cfg.malicious and cfg.benign:
        mal = load_fixture_corpus(cfg.malicious)
        ben = load_fixture_corpus(cfg.benign)
        return list(assemble(mal, ben, cfg.ratio, cfg.seed))
    raise ConfigInvalid("corpus source needs `corpus` or both `malicious` and `benign` paths")


def cmd_synth(cfg: RunConfig, args) -> int:
    from .registry import write_corpus

    if cfg.source != "synth":
        raise ConfigInvalid("synth requires source=synth")
    corpus = _corpus(cfg)
    path = _out(cfg) / "corpus.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(path, corpus, header(cfg))
    print(f"wrote {len(corpus)} records to {path}")
    return 0


def cmd_extract(cfg: RunConfig, args) -> int:
    from .registry import load_fixture_corpus

    corpus_path = _out(cfg) / "corpus.jsonl"
    if cfg.source == "synth" or corpus_path.exists():
        corpus = load_fixture_corpus(_need(corpus_path, "synth"))
    else:
        corpus = _corpus(cfg)
    ref = parse_timestamp(cfg.reference_time) if cfg.reference_time else default_reference_time(corpus)
    fm = extract_matrix(corpus, _full_catalog(cfg), ref, cfg.ccs_base)
    lines = header_lines(cfg) + [f"reference_time={ref.isoformat()}"]
    _write(_out(cfg) / "features.csv", fm.to_csv(lines))
    print(f"wrote {fm.shape[0]} x {fm.shape[1]} feature matrix")
    return 0


def _split_list(cfg: RunConfig, fm: FeatureMatrix) -> list:
    spec = SplitSpec(stratified=cfg.stratified)
    return [s.indices for s in repeated_splits(fm.labels, cfg.folds, cfg.seed, spec, cfg.split_scheme)]


def cmd_train(cfg: RunConfig, args) -> int:
    fm = _load_features(cfg)
    splits = _split_list(cfg, fm)
    for i, s in enumerate(splits):
        _write(_out(cfg) / "splits" / f"fold{i}.json", s.to_json() + "\n")
    grid = run_grid(fm, splits, cfg.feature_sets, cfg.algorithms, cfg.hyperparams, cfg.seed, cfg.jobs,
                    cfg.existing_tec)
    for task in sorted(grid, key=lambda t: (t.feature_set, t.algorithm, t.fold)):
        model, _ = grid[task]
        doc = {"meta": header(cfg), "model": json.loads(model.to_json())}
        _write(_model_path(cfg, task.feature_set, task.algorithm, task.fold), json.dumps(doc, sort_keys=True))
    print(f"trained {len(grid)} models")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    fm = _load_features(cfg)
    splits = _load_splits(cfg)
    cats = _catalogs(cfg, fm)
    reports = []
    for fs in cfg.feature_sets:
        sub = feature_matrix_for(fm, fs, cfg.existing_tec)
        for alg in cfg.algorithms:
            folds = []
            for i, s in enumerate(splits):
                test = sub.take(s.test_idx)
                folds.append(metrics(predict_proba(_load_model(cfg, fs, alg, i), test), test.labels))
            reports.append(Report(_dataset_name(cfg), fs, alg, folds, len(cats[fs])))
    _write(_out(cfg) / "report.json", reports_to_json(reports, {"meta": header(cfg)}))
    _write(_out(cfg) / "report.csv", reports_to_csv(reports, header_lines(cfg)))
    for r in reports:
        agg = r.mean_se["accuracy"]
        print(f"{FEATURE_SET_LABELS[r.feature_set]}({r.n_features}) {r.algorithm}: "
              f"accuracy {agg['mean']:.4f} +/- {agg['standard_error']:.4f}")
    return 0


def _attack(cfg: RunConfig, kinds, stem) -> int:
    fm = _load_features(cfg)
    split = _load_splits(cfg)[cfg.attack_fold]
    models = {(fs, alg): _load_model(cfg, fs, alg, cfg.attack_fold)
              for fs in cfg.feature_sets for alg in cfg.algorithms}
    curves = run_attacks(fm, split, models, kinds, cfg.seed, cfg.jobs, cfg.attack_all_rows, cfg.existing_tec,
                         ranking_method=cfg.ranking, repeats=cfg.repeats, steps=cfg.steps, n_max=cfg.n_max,
                         days=cfg.days, counts=cfg.counts)
    for kind in kinds:
        sel = [c for c in curves if c.attack_kind == kind]
        path = _out(cfg) / "curves" / f"{stem}{kind}.csv"
        _write(path, curves_to_csv(sel, header_lines(cfg)))
        print(f"wrote {len(sel)} curves to {path}")
    return 0


def cmd_attack(cfg: RunConfig, args) -> int:
    return _attack(cfg, cfg.attack_kinds, "attack_")


def cmd_drift(cfg: RunConfig, args) -> int:
    return _attack(cfg, DRIFT_KINDS, "")


def cmd_report(cfg: RunConfig, args) -> int:
    """Merge the evaluation report and every curve file into summary.json."""
    import csv

    report = json.loads(_need(_out(cfg) / "report.json", "evaluate").read_text(encoding="utf-8"))
    curves = {}
    for path in sorted((_out(cfg) / "curves").glob("*.csv")):
        rows = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
        curves[path.stem] = list(csv.DictReader(rows))
    summary = {
        "meta": header(cfg),
        "config": {k: v for k, v in cfg.to_dict().items() if k not in _UNHASHED},
        "accuracy": {
            f"{r['feature_set']}/{r['algorithm']}": r["mean_se"]["accuracy"] for r in report["reports"]
        },
        "reports": report["reports"],
        "curves": curves,
    }
    _write(_out(cfg) / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {_out(cfg) / 'summary.json'}")
    return 0


def cmd_run(cfg: RunConfig, args) -> int:
    steps = [cmd_synth] if cfg.source == "synth" else []
    for fn in steps + [cmd_extract, cmd_train, cmd_evaluate, cmd_attack, cmd_drift, cmd_report]:
        code = fn(cfg, args)
        if code:
            return code
    return 0


COMMANDS = {
    "catalog": cmd_catalog,
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "attack": cmd_attack,
    "drift": cmd_drift,
    "report": cmd_report,
    "run": cmd_run,
}


def _csv_list(conv):
    def parse(text):
        try:
            return [conv(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--cache-dir", dest="cache_dir")
    common.add_argument("--jobs", type=int, help="worker processes; results do not depend on it")
    common.add_argument("--source", choices=["synth", "corpus"])
    common.add_argument("--corpus", help="labeled JSON Lines corpus")
    common.add_argument("--malicious", help="JSON Lines corpus of malicious packages")
    common.add_argument("--benign", help="JSON Lines corpus of benign packages")
    common.add_argument("--ratio", choices=sorted(RATIOS))
    common.add_argument("--n-malicious", dest="n_malicious", type=int)
    common.add_argument("--n-benign", dest="n_benign", type=int)
    common.add_argument("--reference-time", dest="reference_time")
    common.add_argument("--ccs-base", dest="ccs_base", type=float)
    common.add_argument("--include-special-char", dest="include_special_char", action="store_const", const=True)
    common.add_argument("--feature-sets", dest="feature_sets", type=_csv_list(str))
    common.add_argument("--algorithms", type=_csv_list(str))
    common.add_argument("--folds", type=int)
    common.add_argument("--split-scheme", dest="split_scheme", choices=["holdout", "kfold"])
    common.add_argument("--kind", dest="attack_kinds", type=_csv_list(str),
                        help="attack kinds: percentage, topn, information")
    common.add_argument("--steps", type=_csv_list(float), help="fractions or percentages, e.g. 10,20,...,100")
    common.add_argument("--n-max", dest="n_max", type=int)
    common.add_argument("--ranking", choices=["permutation", "exact_shapley"])
    common.add_argument("--repeats", type=int)
    common.add_argument("--attack-all-rows", dest="attack_all_rows", action="store_const", const=True)
    common.add_argument("--attack-fold", dest="attack_fold", type=int)
    common.add_argument("--days", type=_csv_list(int))
    common.add_argument("--counts", type=_csv_list(int))
    common.add_argument("--offline", action="store_const", const=True)
    common.add_argument("--max-concurrent", dest="max_concurrent", type=int)
    common.add_argument("--rps", type=float)

    parser = argparse.ArgumentParser(prog="memptec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"memptec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=(COMMANDS[name].__doc__ or "").strip() or None)
        if name == "catalog":
            p.add_argument("--feature-set", choices=list(FEATURE_SETS) + ["all"], default=None)
        if name == "ingest":
            p.add_argument("packages", nargs="*", default=None)
            p.add_argument("--label", type=int, choices=[0, 1])
            p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if getattr(args, "packages", None) == []:
        args.packages = None
    try:
        cfg = resolve_config(args)
    except ConfigInvalid as exc:
        print(f"memptec: invalid configuration: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigInvalid as exc:
        print(f"memptec: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except (MemptecError, OSError, ValueError) as exc:
        print(f"memptec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
