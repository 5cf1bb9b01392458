"""Self-describing JSON model files."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import SchemaError
from .boosting import StumpBoostClassifier
from .scaling import RangeScaler
from .svm import LinearSVMClassifier, SMOClassifier

FORMAT = 1
KINDS = {"adaboost": StumpBoostClassifier, "svm_linear": LinearSVMClassifier,
         "svm_rbf": SMOClassifier}


def model_kind(model) -> str:
    for kind, cls in KINDS.items():
        if type(model) is cls:
            return kind
    raise SchemaError(f"cannot serialise {type(model).__name__}")


@dataclass
class ModelBundle:
    """A trained classifier with the scaler and feature names it expects."""

    model: object
    scaler: RangeScaler
    feature_names: list
    participant_id: str = ""

    @property
    def kind(self) -> str:
        return model_kind(self.model)

    def predict(self, X):
        return self.model.predict(self.scaler.transform(X))

    def decision_function(self, X):
        return self.model.decision_function(self.scaler.transform(X))

    def to_dict(self) -> dict:
        return {"format": FORMAT, "kind": self.kind, "participant_id": self.participant_id,
                "feature_names": list(self.feature_names), "scaler": self.scaler.to_dict(),
                "model": self.model.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "ModelBundle":
        if d.get("format") != FORMAT:
            raise SchemaError(f"unsupported model format {d.get('format')!r}")
        kind = d.get("kind")
        if kind not in KINDS:
            raise SchemaError(f"unknown model kind {kind!r}")
        names = list(d["feature_names"])
        if kind == "adaboost":
            model = StumpBoostClassifier.from_dict(d["model"], names)
        else:
            model = KINDS[kind].from_dict(d["model"])
        return cls(model, RangeScaler.from_dict(d["scaler"]), names, d.get("participant_id", ""))


def save_model(path, bundle: ModelBundle):
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    tmp.write_text(json.dumps(bundle.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def load_model(path) -> ModelBundle:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a model file ({exc})") from exc
    return ModelBundle.from_dict(data)
