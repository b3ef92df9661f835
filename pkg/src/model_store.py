#!/usr/bin/env python3
"""
Model containers: one JSON document per trained model.

A container records its kind, format version, creation time and the full
run configuration next to the model payload. Documents are written with
sorted keys so that save -> load -> save reproduces the file byte for byte.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, Optional

import jsonschema

from .errors import DataError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_EPOCH = 0
KINDS = ("tissue_color_model", "threshold_svr", "diagnosis_svm")

CONTAINER_SCHEMA = {
    "type": "object",
    "required": ["format_version", "kind", "payload", "created", "config_echo"],
    "additionalProperties": False,
    "properties": {
        "format_version": {"type": "integer"},
        "kind": {"enum": list(KINDS)},
        "payload": {"type": "object"},
        "created": {"type": "string"},
        "config_echo": {"type": "object"},
    },
}



def creation_time() -> str:
    """ISO-8601 UTC stamp: SOURCE_DATE_EPOCH when set, else DEFAULT_EPOCH"""
    epoch = os.getenv("SOURCE_DATE_EPOCH")
    try:
        seconds = int(epoch) if epoch else DEFAULT_EPOCH
    except ValueError:
        raise DataError(f"SOURCE_DATE_EPOCH must be an integer, got {epoch!r}")
    return datetime.fromtimestamp(seconds, tz=timezone.utc).isoformat()


@dataclass(frozen=True)
class ModelContainer:
    kind: str
    payload: Dict
    config_echo: Dict = field(default_factory=dict)
    created: str = field(default_factory=creation_time)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown model kind {self.kind!r}")

    def to_dict(self) -> Dict:
        return {
            "format_version": self.format_version,
            "kind": self.kind,
            "payload": self.payload,
            "created": self.created,
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: Dict) -> 'ModelContainer':
        return cls(
            kind=data["kind"],
            payload=data["payload"],
            config_echo=data["config_echo"],
            created=data["created"],
            format_version=data["format_version"],
        )


def save_container(path: str, container: ModelContainer) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(container.to_json())
    logger.info("Saved %s model to %s", container.kind, path)
    return path


def save_model(path: str, kind: str, model, config_echo: Optional[Dict] = None) -> str:
    """Wrap a model exposing to_dict() in a container and write it"""
    return save_container(path, ModelContainer(kind, model.to_dict(), dict(config_echo or {})))


def load_container(path: str, expected_kind: Optional[str] = None) -> ModelContainer:
    """
    Read and validate a container.

    Raises:
        DataError: missing file, invalid document, unsupported version or wrong kind
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise DataError(f"model file not found: {path}")
    except json.JSONDecodeError as e:
        raise DataError(f"model file {path} is not valid JSON: {e}")

    try:
        jsonschema.validate(data, CONTAINER_SCHEMA)
    except jsonschema.ValidationError as e:
        raise DataError(f"model file {path} is not a model container: {e.message}")
    if data["format_version"] != FORMAT_VERSION:
        raise DataError(f"model file {path} has format_version {data['format_version']}, "
                        f"expected {FORMAT_VERSION}")
    if expected_kind is not None and data["kind"] != expected_kind:
        raise DataError(f"model file {path} holds a {data['kind']} model, expected {expected_kind}")
    return ModelContainer.from_dict(data)


def load_model(path: str, kind: str, model_cls):
    """Load a container of the given kind and rebuild its payload with model_cls.from_dict"""
    container = load_container(path, expected_kind=kind)
    try:
        return model_cls.from_dict(container.payload)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"model file {path} has a malformed {kind} payload: {e}")
