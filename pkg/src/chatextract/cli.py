"""``chatextract`` command line.

Settings resolve flags first, then a YAML config file (``--config``), then
``CHATEXTRACT_*`` environment variables; the manifest written next to each
report records where every setting came from. The API token is only ever
read from the environment and never written out.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import yaml

from .chat import BackendConfig, TranscriptStore, forbid_network, make_backend
from .datasets import DEFAULT_SCHEMA, FORMATS, load_dataset, subsample
from .errors import ChatExtractError, ConfigError, DatasetError, SchemaError
from .metrics import REGIMES, default_regime, evaluate
from .pipeline import BatchReport, run_batch
from .schema import TaskSchema, builtin_schema, builtin_schema_path, load_schema, serialize_schema

FORMAT_TASK = {"nyt11": "RE", "duie2": "RE", "conllpp": "NER", "msra": "NER", "duee1": "EE", "ace05-lines": "EE"}
ENV_PREFIX = "CHATEXTRACT_"
EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

# name -> (type, default); these are the settings a config file or the
# environment may supply
SETTINGS: dict[str, tuple[type, Any]] = {
    "task": (str, None),
    "schema": (str, None),
    "dataset": (str, None),
    "format": (str, None),
    "backend": (str, "gold-oracle"),
    "endpoint": (str, None),
    "model": (str, None),
    "temperature": (float, 0.0),
    "rate_limit": (float, None),
    "timeout": (float, 60.0),
    "max_retries": (int, 3),
    "transcripts": (str, None),
    "limit": (int, None),
    "seed": (int, 0),
    "workers": (int, 1),
    "output_dir": (str, "runs/latest"),
    "skip_stage1": (bool, None),
    "span_check": (bool, False),
}


def _coerce(name: str, value: Any) -> Any:
    kind = SETTINGS[name][0]
    if value is None or isinstance(value, kind):
        return value
    if kind is bool:
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected {kind.__name__}, got {value!r}") from None


def resolve_settings(
    flags: dict[str, Any], config_path: str | None, environ: dict[str, str]
) -> tuple[dict[str, Any], dict[str, str]]:
    """Merge settings by precedence; returns values and their sources."""
    values = {k: d for k, (_, d) in SETTINGS.items()}
    sources = {k: "default" for k in SETTINGS}
    for name in SETTINGS:
        env = environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            values[name], sources[name] = _coerce(name, env), "env"
    if config_path:
        try:
            doc = yaml.safe_load(Path(config_path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"config {config_path} must be a mapping")
        unknown = sorted(set(doc) - set(SETTINGS))
        if unknown:
            raise ConfigError(f"config {config_path}: unknown setting(s) {unknown}")
        for name, value in doc.items():
            values[name], sources[name] = _coerce(name, value), "config"
    for name, value in flags.items():
        if name in SETTINGS and value is not None:
            values[name], sources[name] = _coerce(name, value), "flag"
    return values, sources


@dataclass(frozen=True)
class RunConfig:
    task: str
    schema: TaskSchema
    schema_ref: str
    dataset: Path
    format: str
    backend: BackendConfig
    limit: int | None
    seed: int
    workers: int
    output_dir: Path
    skip_stage1: bool | None
    span_check: bool
    record_to: Path | None = None

    def semantic(self) -> dict[str, Any]:
        """Fields that can change what a run produces."""
        return {
            "task": self.task,
            "schema_sha256": hashlib.sha256(serialize_schema(self.schema).encode()).hexdigest(),
            "dataset_sha256": _file_sha256(self.dataset),
            "format": self.format,
            "backend_kind": self.backend.kind,
            "model": self.model_fingerprint(),
            "limit": self.limit,
            "seed": self.seed,
            "skip_stage1": self.skip_stage1,
            "span_check": self.span_check,
        }

    def model_fingerprint(self) -> str:
        if self.backend.kind == "gold_oracle":
            return "gold-oracle"
        if self.backend.kind == "replay" and not self.backend.model_name:
            # the store names the model when it holds exactly one
            prints = TranscriptStore(self.backend.transcript_path).fingerprints()
            return ",".join(sorted(prints))
        return self.backend.fingerprint()

    def fingerprint(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def resolve_schema(ref: str) -> TaskSchema:
    path = Path(ref)
    if path.exists():
        return load_schema(path)
    if "/" in ref or not builtin_schema_path(ref).is_file():
        raise ConfigError(f"schema {ref!r} is neither a file nor a built-in schema name")
    return builtin_schema(ref)


def build_run_config(values: dict[str, Any], *, mode: str) -> RunConfig:
    """Validate merged settings for ``mode`` in {extract, record, replay}."""
    fmt = values["format"]
    if not values["dataset"]:
        raise ConfigError("--dataset is required")
    dataset = Path(values["dataset"])
    if not dataset.is_file():
        raise ConfigError(f"dataset {dataset} does not exist")
    if fmt not in FORMATS:
        raise ConfigError(f"--format must be one of {', '.join(FORMATS)}")
    schema_ref = values["schema"] or DEFAULT_SCHEMA[fmt]
    schema = resolve_schema(schema_ref)
    task = (values["task"] or schema.task).upper()
    if task != schema.task:
        raise ConfigError(f"task {task} does not match schema {schema_ref!r}, which is for {schema.task}")
    if FORMAT_TASK[fmt] != task:
        raise ConfigError(f"dataset format {fmt} holds {FORMAT_TASK[fmt]} data, not {task}")
    if values["skip_stage1"] is not None:
        if values["skip_stage1"] and task != "NER":
            raise ConfigError("skipping stage I is only possible for NER")
        schema = dataclasses.replace(schema, skip_stage1=values["skip_stage1"])

    kind = values["backend"].replace("-", "_")
    record_to = None
    if mode == "replay":
        if values["endpoint"]:
            raise ConfigError("replay never contacts an endpoint; drop --endpoint")
        kind = "replay"
        if not values["transcripts"]:
            raise ConfigError("replay needs --transcripts")
        if not Path(values["transcripts"]).is_file():
            raise ConfigError(f"transcript store {values['transcripts']} does not exist")
    elif mode == "record":
        kind = "live"
        if not values["transcripts"]:
            raise ConfigError("record needs --transcripts to write to")
        record_to = Path(values["transcripts"])
    elif kind == "replay" and values["endpoint"]:
        raise ConfigError("a replay backend cannot be combined with --endpoint")
    backend = BackendConfig(
        kind=kind,
        endpoint=values["endpoint"] if kind == "live" else None,
        model_name=values["model"],
        request_timeout=values["timeout"],
        max_retries=values["max_retries"],
        rate_limit=values["rate_limit"],
        transcript_path=values["transcripts"] if kind == "replay" else None,
        temperature=values["temperature"],
    )
    if values["workers"] < 1:
        raise ConfigError("--workers must be >= 1")
    return RunConfig(
        task=task,
        schema=schema,
        schema_ref=schema_ref,
        dataset=dataset,
        format=fmt,
        backend=backend,
        limit=values["limit"],
        seed=values["seed"],
        workers=values["workers"],
        output_dir=Path(values["output_dir"]),
        skip_stage1=values["skip_stage1"],
        span_check=values["span_check"],
        record_to=record_to,
    )


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary sibling and rename, so readers never see a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def run_extract(config: RunConfig, sources: dict[str, str], *, transport=None, clock=None) -> BatchReport:
    samples = load_dataset(config.dataset, config.format, config.schema)
    if config.limit is not None:
        samples = subsample(samples, config.limit, config.seed)
    backend = make_backend(config.backend, config.schema, transport=transport, clock=clock, record_to=config.record_to)
    if config.backend.kind == "replay":
        with forbid_network():
            report = run_batch(samples, config.schema, backend, workers=config.workers, span_check=config.span_check)
    else:
        report = run_batch(samples, config.schema, backend, workers=config.workers, span_check=config.span_check)
    out = config.output_dir
    atomic_write(out / "report.jsonl", report.to_jsonl())
    manifest = {
        "fingerprint": config.fingerprint(),
        "config": config.semantic(),
        "schema": config.schema_ref,
        "dataset": str(config.dataset),
        "backend": {k: v for k, v in config.backend.to_dict().items() if k != "api_key_env"},
        "workers": config.workers,
        "sources": sources,
        "precedence": "flag > config > env > default",
        "samples": len(report.results),
        "failures": len(report.failures),
        "turns": report.total_turns,
        "requests": report.request_count,
        "wall_time": report.wall_time,
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")
    return report


def _add_run_flags(p: argparse.ArgumentParser, *, live: bool, backend_choice: bool) -> None:
    p.add_argument("--config", help="YAML file with default settings")
    p.add_argument("--task", type=str.upper, choices=("RE", "NER", "EE"))
    p.add_argument("--schema", help="built-in schema name or path to a schema YAML")
    p.add_argument("--dataset", help="JSON-lines evaluation split")
    p.add_argument("--format", choices=FORMATS, help="dataset layout")
    if backend_choice:
        p.add_argument("--backend", choices=("live", "replay", "gold-oracle"))
    if live:
        p.add_argument("--endpoint", help="chat-completion URL")
        p.add_argument("--rate-limit", type=float, help="requests per minute")
        p.add_argument("--timeout", type=float, help="per-request timeout in seconds")
        p.add_argument("--max-retries", type=int)
    p.add_argument("--model", help="model name (part of the transcript fingerprint)")
    p.add_argument("--temperature", type=float)
    p.add_argument("--transcripts", help="transcript store (JSON lines)")
    p.add_argument("--limit", type=int, help="evaluate a seeded random subset of this size")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="samples processed in parallel")
    p.add_argument("--output-dir")
    p.add_argument("--skip-stage1", action=argparse.BooleanOptionalAction, default=None,
                   help="NER only: ask for every entity type without the type question")
    p.add_argument("--span-check", action=argparse.BooleanOptionalAction, default=None,
                   help="drop extracted spans that do not occur in the sentence")
    p.add_argument("--fail-on-partial", action="store_true",
                   help="exit 2 when any sample failed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chatextract", description="Zero-shot extraction by multi-turn chat.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run extraction with any backend")
    _add_run_flags(p, live=True, backend_choice=True)
    p = sub.add_parser("record", help="run against a live endpoint and store every exchange")
    _add_run_flags(p, live=True, backend_choice=False)
    p = sub.add_parser("replay", help="rerun from a transcript store with the network disabled")
    _add_run_flags(p, live=False, backend_choice=False)
    # accepted only to reject it with a clear message
    p.add_argument("--endpoint", help=argparse.SUPPRESS)

    p = sub.add_parser("eval", help="score a report against gold")
    p.add_argument("--predictions", required=True, help="report.jsonl from extract/record/replay")
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", required=True, choices=FORMATS)
    p.add_argument("--schema", help="schema used to read gold labels (default: the format's)")
    p.add_argument("--regime", choices=REGIMES, help="default chosen from the task and dataset")
    p.add_argument("--equivalences", help="YAML/JSON list of [relation, inverse] pairs; default: the schema's")
    p.add_argument("--output-dir", default=None, help="where to write metrics.json and metrics.txt")

    p = sub.add_parser("schemas", help="schema utilities")
    ssub = p.add_subparsers(dest="schemas_command", required=True)
    v = ssub.add_parser("validate", help="check schema files")
    v.add_argument("paths", nargs="+")
    return parser


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k in SETTINGS}


def cmd_run(args: argparse.Namespace, mode: str) -> int:
    values, sources = resolve_settings(_flags(args), args.config, dict(os.environ))
    config = build_run_config(values, mode=mode)
    report = run_extract(config, sources)
    summary = report.summary()
    print(
        f"{summary['samples']} samples, {summary['failures']} failed, {summary['turns']} turns, "
        f"{summary['requests']} requests -> {config.output_dir / 'report.jsonl'}"
    )
    if report.failures:
        print(f"failure kinds: {', '.join(summary['failure_kinds'])}", file=sys.stderr)
        if args.fail_on_partial:
            return EXIT_PARTIAL
    return EXIT_OK


def _load_equivalences(path: str | None, schema: TaskSchema) -> list[tuple[str, str]]:
    if path is None:
        return [tuple(p) for p in schema.inverse_relations]
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or []
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read equivalences {path}: {exc}") from None
    if not all(isinstance(p, (list, tuple)) and len(p) == 2 for p in doc):
        raise ConfigError(f"{path}: expected a list of [relation, inverse] pairs")
    return [(str(a), str(b)) for a, b in doc]


def cmd_eval(args: argparse.Namespace) -> int:
    schema = resolve_schema(args.schema or DEFAULT_SCHEMA[args.format])
    try:
        text = Path(args.predictions).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read predictions: {exc}") from None
    report = BatchReport.from_jsonl(text)
    if report.task != schema.task:
        raise ConfigError(f"predictions are {report.task}, gold schema is {schema.task}")
    samples = load_dataset(args.dataset, args.format, schema)
    gold = {s.id: s.gold.elements for s in samples}
    predictions = {r.sample_id: r.elements for r in report.results}
    has_types = args.format == "duie2"
    regime = args.regime or default_regime(schema.task, has_types, schema.language)
    metrics = evaluate(predictions, gold, regime, _load_equivalences(args.equivalences, schema))
    table = metrics.table()
    print(table)
    out = Path(args.output_dir) if args.output_dir else Path(args.predictions).parent
    atomic_write(out / "metrics.json", json.dumps(metrics.to_record(), indent=2, ensure_ascii=False) + "\n")
    atomic_write(out / "metrics.txt", table + "\n")
    return EXIT_OK


def cmd_schemas_validate(args: argparse.Namespace) -> int:
    bad = 0
    for ref in args.paths:
        try:
            schema = resolve_schema(ref)
        except (SchemaError, ConfigError) as exc:
            print(f"{ref}: {type(exc).__name__}: {exc}", file=sys.stderr)
            bad += 1
            continue
        print(f"{ref}: ok ({schema.task}, {schema.language}, {len(schema.type_names)} types)")
    return EXIT_CONFIG if bad else EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command in ("extract", "record", "replay"):
            return cmd_run(args, args.command)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_schemas_validate(args)
    except (ConfigError, SchemaError, DatasetError) as exc:
        print(f"chatextract: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChatExtractError as exc:
        print(f"chatextract: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
