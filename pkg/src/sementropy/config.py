"""Declarative run configuration shared by every pipeline stage.

Defaults encode the reference generation/scoring protocol: greedy decoding
at temperature 0.1, twenty samples at temperature 1.0 with top-k 50 and
top-p 0.9, hallucination labels from a 0.5 ROUGE-L threshold, detection at
theta_star = -3.5, softmax inverse temperature beta = 10, entropy
temperature tau = 1.

Config files are YAML with flat per-stage sections (paths, generation,
scoring, labeling, detection, sampling, synth). Precedence: built-in
defaults < config file < explicit CLI flags. Every artifact the pipeline
writes embeds ``config_hash``, the first 12 hex digits of the SHA-256 of
the canonical (sorted-key JSON) config, so equal hashes mean identical
settings.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping

import yaml

from .errors import ValidationError

WEIGHT_SCALES = ("softmax", "softmax_times_n")
TOKENIZER_MODES = ("default", "cased")
BACKENDS = ("precomputed", "scorer_service")
ESTIMATOR_CHOICES = ("snne", "qa_snne_emb", "qa_snne_ent", "qa_snne_crosse", "dse")


@dataclass(frozen=True)
class RunConfig:
    """All tunables for a pipeline run; defaults match the reference protocol."""

    # paths
    dataset_path: str = ""
    samples_path: str = ""
    labels_path: str = ""
    scores_path: str = ""
    output_dir: str = "out"
    # generation
    greedy_temperature: float = 0.1
    sample_temperature: float = 1.0
    n_samples: int = 20
    top_k: int = 50
    top_p: float = 0.9
    prompt_template: str = ""
    model_name: str = ""
    endpoint_url: str = ""
    # scoring
    tau: float = 1.0
    beta: float = 10.0
    gamma: float = 1.0
    lambda_: float = 1.0
    weight_scale: str = "softmax"
    tokenizer_mode: str = "default"
    estimators: tuple = ("snne",)
    cluster_method: str = "rouge_threshold"
    cluster_threshold: float = 0.5
    alignment_backend: str = "precomputed"
    alignment_files: Mapping = field(default_factory=dict)
    scorer_url: str = ""
    # labeling / detection
    label_threshold: float = 0.5
    theta_star: float = -3.5
    allow_dse_detection: bool = False
    # sampling
    concurrency: int = 4
    max_attempts: int = 3
    backoff_base: float = 0.5
    # synth
    seed: int = 1234
    n_grounded: int = 100
    n_hallucinated: int = 100
    paired: bool = False

    def __post_init__(self) -> None:
        if self.greedy_temperature <= 0 or self.sample_temperature <= 0:
            raise ValidationError("temperatures must be > 0")
        if self.n_samples < 2:
            raise ValidationError("n_samples must be >= 2")
        if self.top_k < 1:
            raise ValidationError("top_k must be >= 1")
        if not (0.0 < self.top_p <= 1.0):
            raise ValidationError("top_p must be in (0, 1]")
        if self.tau <= 0:
            raise ValidationError("tau must be > 0")
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        if not (0.0 <= self.label_threshold <= 1.0):
            raise ValidationError("label_threshold must be in [0, 1]")
        if self.weight_scale not in WEIGHT_SCALES:
            raise ValidationError(f"weight_scale must be one of {WEIGHT_SCALES}")
        if self.tokenizer_mode not in TOKENIZER_MODES:
            raise ValidationError(f"tokenizer_mode must be one of {TOKENIZER_MODES}")
        if self.alignment_backend not in BACKENDS:
            raise ValidationError(f"alignment_backend must be one of {BACKENDS}")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        for est in self.estimators:
            if est not in ESTIMATOR_CHOICES:
                raise ValidationError(
                    f"unknown estimator {est!r}; expected one of {ESTIMATOR_CHOICES}"
                )

    def to_json_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lambda_")
        out["estimators"] = list(self.estimators)
        out["alignment_files"] = dict(self.alignment_files)
        return out


# Which config-file section each field lives in; "lambda" is accepted as the
# spelled key for the lambda_ field.
_SECTIONS = {
    "paths": ("dataset_path", "samples_path", "labels_path", "scores_path", "output_dir"),
    "generation": (
        "greedy_temperature",
        "sample_temperature",
        "n_samples",
        "top_k",
        "top_p",
        "prompt_template",
        "model_name",
        "endpoint_url",
    ),
    "scoring": (
        "tau",
        "beta",
        "gamma",
        "lambda_",
        "weight_scale",
        "tokenizer_mode",
        "estimators",
        "cluster_method",
        "cluster_threshold",
        "alignment_backend",
        "alignment_files",
        "scorer_url",
    ),
    "labeling": ("label_threshold",),
    "detection": ("theta_star", "allow_dse_detection"),
    "sampling": ("concurrency", "max_attempts", "backoff_base"),
    "synth": ("seed", "n_grounded", "n_hallucinated", "paired"),
}

_FIELD_TO_SECTION = {name: section for section, names in _SECTIONS.items() for name in names}


def load_config(path=None, overrides: Mapping | None = None) -> RunConfig:
    """Build a RunConfig from defaults, an optional YAML file, and overrides.

    Overrides (typically CLI flags) use field names directly and win over
    the file; None values in overrides are ignored.
    """
    values: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: config root must be a mapping")
        for section, content in doc.items():
            if section not in _SECTIONS:
                raise ValidationError(f"{path}: unknown config section {section!r}")
            if content is None:
                continue
            if not isinstance(content, dict):
                raise ValidationError(f"{path}: section {section!r} must be a mapping")
            for key, value in content.items():
                name = "lambda_" if key == "lambda" else key
                if name not in _SECTIONS[section]:
                    raise ValidationError(
                        f"{path}: unknown key {key!r} in section {section!r}"
                    )
                values[name] = value
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        name = "lambda_" if key == "lambda" else key
        if name not in _FIELD_TO_SECTION:
            raise ValidationError(f"unknown config field {key!r}")
        values[name] = value
    return RunConfig(**values)


def config_hash(config: RunConfig) -> str:
    """First 12 hex digits of the SHA-256 over the canonical config JSON."""
    canon = json.dumps(config.to_json_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]
