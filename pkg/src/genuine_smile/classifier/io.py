"""Versioned model files (``.npz`` container with a JSON header)."""
from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

from ..errors import LoadFailure, VersionMismatch
from .fusion import FusionHead
from .model import SequenceModel

FORMAT = "genuine-smile-model"
FORMAT_VERSION = 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_model(model: SequenceModel | FusionHead, path) -> Path:
    """Write a model or fusion head; parameters are stored bit-exactly."""
    path = Path(path)
    if isinstance(model, SequenceModel):
        header = {"type": "sequence_model", "kind": model.kind, "input_dim": model.input_dim}
        arrays = {f"param/{k}": v for k, v in model.params.items()}
        arrays["norm/mean"] = model.in_mean
        arrays["norm/scale"] = model.in_scale
    elif isinstance(model, FusionHead):
        header = {"type": "fusion_head", "members": list(model.members), "dims": list(model.dims)}
        arrays = {f"param/{k}": v for k, v in model.params.items()}
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    header.update(format=FORMAT, version=FORMAT_VERSION, metadata=_jsonable(model.metadata))
    arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_model(path) -> SequenceModel | FusionHead:
    """Read a file written by :func:`save_model`.

    Raises
    ------
    LoadFailure
        Missing, truncated or malformed file.
    VersionMismatch
        File written by another format version.
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError, zipfile.BadZipFile, EOFError, KeyError) as exc:
        raise LoadFailure(f"cannot read model file {path}: {exc}") from exc
    try:
        header = json.loads(arrays.pop("header").tobytes().decode())
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise LoadFailure(f"{path}: missing or corrupt header") from exc
    if header.get("format") != FORMAT:
        raise LoadFailure(f"{path}: not a {FORMAT} file")
    if header.get("version") != FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: format version {header.get('version')!r}, this build reads {FORMAT_VERSION}"
        )
    params = {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("param/")}
    try:
        if header["type"] == "sequence_model":
            return SequenceModel(
                header["kind"], int(header["input_dim"]), params,
                arrays["norm/mean"], arrays["norm/scale"], header.get("metadata", {}),
            )
        if header["type"] == "fusion_head":
            return FusionHead(tuple(header["members"]), tuple(header["dims"]), params,
                              header.get("metadata", {}))
    except (KeyError, ValueError) as exc:
        raise LoadFailure(f"{path}: inconsistent model contents ({exc})") from exc
    raise LoadFailure(f"{path}: unknown model type {header['type']!r}")
