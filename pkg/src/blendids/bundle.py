"""Model bundle persistence.

A bundle is a single JSON document (sorted keys, one-space indent) holding the
schema, the config snapshot, fitted scaling, all five models, the selection
outcome and a SHA-256 digest of the canonical encoding of everything else.
Floats are written with Python's shortest round-trip repr, so a reloaded
bundle predicts bit-for-bit like the in-memory one.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .blend import BlendedEnsemble
from .dataset import FeatureSchema, Preprocessor
from .errors import DataError
from .evaluate import ClassGate, FinalModel
from .net import NetModel
from .pipeline import TwoPhaseModel

FORMAT = "blendids-bundle"
VERSION = 1


class BundleError(DataError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest_of(content: dict) -> str:
    return hashlib.sha256(canonical_json(content).encode("utf-8")).hexdigest()


@dataclass(eq=False)
class ModelBundle:
    schema: FeatureSchema
    config: dict
    model: TwoPhaseModel
    digest: str = ""

    def content(self) -> dict:
        final = self.model.final
        return {
            "format": FORMAT,
            "version": VERSION,
            "schema": self.schema.to_dict(),
            "config": self.config,
            "preprocessor": self.model.preprocessor.to_dict(),
            "blend": final.blend.to_dict(),
            "net": final.net.to_dict(),
            "net_input": final.net_input,
            "chosen": final.chosen,
            "validation_correct": final.validation_correct,
            "validation_accuracy": final.validation_accuracy,
            "gate": None if final.gate is None else final.gate.to_dict(),
        }

    def to_json(self) -> str:
        content = self.content()
        self.digest = digest_of(content)
        return json.dumps(dict(content, digest=self.digest), sort_keys=True, indent=1, allow_nan=False) + "\n"

    def save(self, path: str | Path) -> str:
        Path(path).write_text(self.to_json(), encoding="utf-8")
        return self.digest

    @classmethod
    def from_json(cls, text: str) -> "ModelBundle":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BundleError(f"bundle is not valid JSON: {exc}") from exc
        if data.get("format") != FORMAT:
            raise BundleError(f"not a model bundle (format={data.get('format')!r})")
        if data.get("version") != VERSION:
            raise BundleError(f"unsupported bundle version {data.get('version')!r}; this build reads {VERSION}")
        stored = data.pop("digest", None)
        if stored != digest_of(data):
            raise BundleError("bundle digest does not match its content")
        final = FinalModel(
            chosen=data["chosen"],
            blend=BlendedEnsemble.from_dict(data["blend"]),
            net=NetModel.from_dict(data["net"]),
            net_input=data["net_input"],
            validation_correct=dict(data["validation_correct"]),
            validation_accuracy=dict(data["validation_accuracy"]),
            gate=None if data["gate"] is None else ClassGate.from_dict(data["gate"]),
        )
        model = TwoPhaseModel(Preprocessor.from_dict(data["preprocessor"]), final)
        return cls(FeatureSchema.from_dict(data["schema"]), data["config"], model, stored)

    @classmethod
    def load(cls, path: str | Path) -> "ModelBundle":
        path = Path(path)
        if not path.is_file():
            raise BundleError(f"bundle not found: {path}")
        return cls.from_json(path.read_text(encoding="utf-8"))
