"""Pipeline configuration and per-stage manifest files.

One config object feeds every stage; a YAML file sets any subset of fields
and CLI flags override the file. Validation collects every problem before
failing so a bad config surfaces all at once.

Each stage writes a manifest JSON listing its input and output hashes plus
the config it ran under. Manifests contain no timestamps, so re-running a
stage over unchanged inputs rewrites byte-identical files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from . import __version__
from .errors import ConfigError, InputError
from .forecasting import FORECASTERS

PERIOD_POLICIES = ("observed_only", "zero_fill_gaps")
MATCH_BACKENDS = ("local_rule", "remote_llm")
EMBED_BACKENDS = ("local", "remote")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 42
    # embedding
    embed_backend: str = "local"
    embed_dim: int = 1024
    embed_url: str = ""
    embed_model: str = ""
    remote_dim: int = 3072
    # variant merge + matching
    variant_threshold: float = 0.92
    match_backend: str = "local_rule"
    match_threshold: float = 0.40
    candidates: int = 5
    n_workers: int = 1
    chat_url: str = ""
    chat_model: str = ""
    # series
    period_policy: str = "observed_only"
    # evaluation / forecasting
    models: tuple = ("naive", "drift", "ses", "ridge_ar", "dlinear_like")
    seq_lens: tuple = (4, 6)
    pred_len: int = 3
    train_frac: float = 0.7
    standardize: bool = False
    forecast_model: str = "dlinear_like"
    forecast_seq_len: int = 4
    horizon: int = 6
    ridge_lambda: float = 1.0
    # training
    epochs: int = 20
    batch_size: int = 1
    patience: int = 3
    learning_rate: float = 1e-4
    moving_avg: int = 25
    # classification
    history_months: int = 12
    forecast_months: int = 6
    quantile: float = 0.75
    # report
    log_scale_figure: bool = False

    def validate(self) -> None:
        """Raise ConfigError listing every invalid field at once."""
        problems: list[str] = []
        if self.embed_backend not in EMBED_BACKENDS:
            problems.append(f"embed_backend must be one of {EMBED_BACKENDS}, got {self.embed_backend!r}")
        if self.embed_backend == "remote" and not (self.embed_url and self.embed_model):
            problems.append("remote embed backend needs embed_url and embed_model")
        if self.embed_dim < 1:
            problems.append(f"embed_dim must be >= 1, got {self.embed_dim}")
        if not 0.0 < self.variant_threshold <= 1.0:
            problems.append(f"variant_threshold must be in (0, 1], got {self.variant_threshold}")
        if self.match_backend not in MATCH_BACKENDS:
            problems.append(f"match_backend must be one of {MATCH_BACKENDS}, got {self.match_backend!r}")
        if self.match_backend == "remote_llm" and not (self.chat_url and self.chat_model):
            problems.append("remote_llm matching needs chat_url and chat_model")
        if not -1.0 <= self.match_threshold <= 1.0:
            problems.append(f"match_threshold must be in [-1, 1], got {self.match_threshold}")
        if self.candidates < 1:
            problems.append(f"candidates must be >= 1, got {self.candidates}")
        if self.n_workers < 1:
            problems.append(f"n_workers must be >= 1, got {self.n_workers}")
        if self.period_policy not in PERIOD_POLICIES:
            problems.append(f"period_policy must be one of {PERIOD_POLICIES}, got {self.period_policy!r}")
        unknown = [m for m in self.models if m not in FORECASTERS]
        if unknown:
            problems.append(f"unknown models {unknown}, available: {sorted(FORECASTERS)}")
        if self.forecast_model not in FORECASTERS:
            problems.append(f"unknown forecast_model {self.forecast_model!r}")
        for name, v in (("pred_len", self.pred_len), ("horizon", self.horizon),
                        ("epochs", self.epochs), ("batch_size", self.batch_size),
                        ("moving_avg", self.moving_avg), ("history_months", self.history_months),
                        ("forecast_months", self.forecast_months), ("forecast_seq_len", self.forecast_seq_len)):
            if v < 1:
                problems.append(f"{name} must be >= 1, got {v}")
        if any(k < 1 for k in self.seq_lens):
            problems.append(f"seq_lens must all be >= 1, got {self.seq_lens}")
        if not 0.0 < self.train_frac <= 1.0:
            problems.append(f"train_frac must be in (0, 1], got {self.train_frac}")
        if not 0.0 <= self.quantile <= 1.0:
            problems.append(f"quantile must be in [0, 1], got {self.quantile}")
        if self.patience < 0:
            problems.append(f"patience must be >= 0, got {self.patience}")
        if self.learning_rate <= 0:
            problems.append(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.ridge_lambda < 0:
            problems.append(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if problems:
            raise ConfigError("invalid configuration:\n  - " + "\n  - ".join(problems))

    def as_dict(self, manifest: bool = False) -> dict:
        out = dataclasses.asdict(self)
        out["models"] = list(self.models)
        out["seq_lens"] = list(self.seq_lens)
        if manifest:
            # worker count is execution topology, guaranteed not to change
            # outputs, so it must not change manifest bytes either
            out.pop("n_workers")
        return out


_LIST_FIELDS = {"models", "seq_lens"}


def load_config(path: str | Path | None = None, overrides: Mapping | None = None) -> PipelineConfig:
    """Defaults, then the YAML file, then explicit overrides; then validate."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise InputError(f"config file not found: {path}")
        loaded = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file must hold a mapping: {path}")
        values.update(loaded)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {unknown}")
    for name in _LIST_FIELDS & set(values):
        v = values[name]
        if isinstance(v, str):
            v = [p.strip() for p in v.split(",") if p.strip()]
        values[name] = tuple(int(x) if name == "seq_lens" else str(x) for x in v)
    cfg = PipelineConfig(**values)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# manifests


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(out_dir: str | Path, stage: str) -> Path:
    return Path(out_dir) / f"{stage}.manifest.json"


def _portable_path(p: Path, out_dir: Path) -> str:
    """Paths inside the output dir are stored relative so two runs into
    different directories still produce byte-identical manifests."""
    try:
        return Path(p).resolve().relative_to(Path(out_dir).resolve()).as_posix()
    except ValueError:
        return str(p)


def write_manifest(
    out_dir: str | Path,
    stage: str,
    inputs: Mapping[str, Path],
    outputs: Mapping[str, Path],
    config: PipelineConfig,
) -> Path:
    out_dir = Path(out_dir)
    payload = {
        "stage": stage,
        "inputs": {
            name: {"path": _portable_path(p, out_dir), "sha256": file_sha256(p)}
            for name, p in sorted(inputs.items())
        },
        "outputs": {
            name: {"path": _portable_path(p, out_dir), "sha256": file_sha256(p)}
            for name, p in sorted(outputs.items())
        },
        "config": config.as_dict(manifest=True),
        "package_version": __version__,
    }
    path = manifest_path(out_dir, stage)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(out_dir: str | Path, stage: str) -> dict:
    path = manifest_path(out_dir, stage)
    if not path.exists():
        raise InputError(f"manifest not found for stage {stage!r}: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def check_stage_output(out_dir: str | Path, producer_stage: str, artifact: str) -> Path:
    """Confirm a consumed artifact still matches its producer's recorded hash."""
    manifest = read_manifest(out_dir, producer_stage)
    entry = manifest.get("outputs", {}).get(artifact)
    if entry is None:
        raise InputError(f"stage {producer_stage!r} manifest has no output {artifact!r}")
    path = Path(entry["path"])
    if not path.is_absolute():
        path = Path(out_dir) / path
    if not path.exists():
        raise InputError(f"artifact {artifact!r} from stage {producer_stage!r} is missing: {path}")
    actual = file_sha256(path)
    if actual != entry["sha256"]:
        raise InputError(
            f"artifact {artifact!r} changed since stage {producer_stage!r} wrote it "
            f"(expected {entry['sha256'][:12]}, found {actual[:12]})"
        )
    return path
