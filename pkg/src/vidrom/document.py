"""Model documents: JSON serialization of every fitted model plus provenance.

A document records the full pipeline state needed to reproduce a prediction:
embedding settings (including the resolved fixed-point offset and scale), the
manifold, reduced and normal-form models, the polar model when one exists,
training metrics and provenance (input hashes, the configuration snapshot and
a timestamp).  The reproducibility hash is the SHA-256 of the canonical JSON
with the timestamp removed, so two runs over identical inputs hash equal.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dynamics import NormalFormModel, PolarModel, ReducedModel
from .errors import InputError
from .manifold import ManifoldModel

SCHEMA_VERSION = 1


def _real_array(arr):
    # + 0.0 folds negative zeros so the canonical JSON text is stable
    return (np.asarray(arr, dtype=float) + 0.0).tolist()

def _complex_array(arr):
    a = np.asarray(arr, dtype=complex)
    return (np.stack([a.real, a.imag], axis=-1) + 0.0).tolist()


def _from_complex(data):
    a = np.asarray(data, dtype=float)
    if a.size == 0:
        # tolist() drops the trailing [re, im] axis of empty arrays
        return a.astype(complex)
    return a[..., 0] + 1j * a[..., 1]


def manifold_to_dict(m: ManifoldModel) -> dict:
    return {
        "tangent_basis": _real_array(m.tangent_basis),
        "coeffs": _real_array(m.coeffs),
        "order": m.order,
        "training_ermse": m.training_ermse,
    }


def manifold_from_dict(d: dict) -> ManifoldModel:
    return ManifoldModel(
        np.asarray(d["tangent_basis"], dtype=float),
        np.asarray(d["coeffs"], dtype=float),
        int(d["order"]),
        float(d["training_ermse"]),
    )


def reduced_to_dict(m: ReducedModel) -> dict:
    return {
        "dim": m.dim,
        "order": m.order,
        "coeffs": _real_array(m.coeffs),
        "fit_rms": m.fit_rms,
    }


def reduced_from_dict(d: dict) -> ReducedModel:
    return ReducedModel(
        int(d["dim"]), int(d["order"]),
        np.asarray(d["coeffs"], dtype=float), float(d["fit_rms"]),
    )


def normal_form_to_dict(m: NormalFormModel) -> dict:
    return {
        "eigvals": _complex_array(m.eigvals),
        "eigvecs": _complex_array(m.eigvecs),
        "num_pairs": m.num_pairs,
        "order": m.order,
        "inverse_coeffs": _complex_array(m.inverse_coeffs),
        "dynamics_coeffs": _complex_array(m.dynamics_coeffs),
        "forward_coeffs": _complex_array(m.forward_coeffs),
        "resonant_mask": np.asarray(m.resonant_mask, dtype=bool).tolist(),
        "resonance_tol": m.resonance_tol,
        "trained_amplitude": (
            None if m.trained_amplitude is None else list(m.trained_amplitude)
        ),
        "roundtrip_error": m.roundtrip_error,
    }


def normal_form_from_dict(d: dict) -> NormalFormModel:
    return NormalFormModel(
        _from_complex(d["eigvals"]),
        _from_complex(d["eigvecs"]),
        int(d["num_pairs"]),
        int(d["order"]),
        _from_complex(d["inverse_coeffs"]),
        _from_complex(d["dynamics_coeffs"]),
        _from_complex(d["forward_coeffs"]),
        np.asarray(d["resonant_mask"], dtype=bool),
        float(d["resonance_tol"]),
        None if d["trained_amplitude"] is None else tuple(d["trained_amplitude"]),
        float(d["roundtrip_error"]),
    )


def polar_to_dict(m: PolarModel) -> dict:
    return {"decay": [list(row) for row in m.decay],
            "frequency": [list(row) for row in m.frequency]}


def polar_from_dict(d: dict) -> PolarModel:
    return PolarModel(
        tuple(tuple(row) for row in d["decay"]),
        tuple(tuple(row) for row in d["frequency"]),
    )


@dataclass
class ModelDocument:
    """Everything a prediction needs, as one JSON-serializable bundle."""

    manifold: ManifoldModel
    reduced: ReducedModel
    normal_form: NormalFormModel
    polar: PolarModel = None
    embedding: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "provenance": self.provenance,
            "embedding": self.embedding,
            "manifold": manifold_to_dict(self.manifold),
            "reduced": reduced_to_dict(self.reduced),
            "normal_form": normal_form_to_dict(self.normal_form),
            "polar": None if self.polar is None else polar_to_dict(self.polar),
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelDocument":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise InputError(
                f"unsupported document schema version {version!r} "
                f"(expected {SCHEMA_VERSION})"
            )
        return cls(
            manifold=manifold_from_dict(d["manifold"]),
            reduced=reduced_from_dict(d["reduced"]),
            normal_form=normal_form_from_dict(d["normal_form"]),
            polar=None if d.get("polar") is None else polar_from_dict(d["polar"]),
            embedding=dict(d.get("embedding", {})),
            metrics=dict(d.get("metrics", {})),
            provenance=dict(d.get("provenance", {})),
            schema_version=version,
        )


def reproducibility_hash(doc_dict: dict) -> str:
    """SHA-256 over the canonical document JSON, timestamp excluded."""
    trimmed = json.loads(json.dumps(doc_dict))
    trimmed.get("provenance", {}).pop("timestamp", None)
    canonical = json.dumps(trimmed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_provenance(input_paths, config_snapshot: dict) -> dict:
    return {
        "input_hashes": {str(p): file_sha256(p) for p in input_paths},
        "config": dict(config_snapshot),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def save_document(doc: ModelDocument, path) -> None:
    Path(path).write_text(json.dumps(doc.to_dict(), indent=1) + "\n")


def load_document(path) -> ModelDocument:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}") from exc
    return ModelDocument.from_dict(data)
