import json

import numpy as np
import pytest

from stressdetect.data import NEUTRAL, STRESS
from stressdetect.errors import SchemaError
from stressdetect.learning import LinearSVMClassifier, RangeScaler, SMOClassifier, StumpBoostClassifier
from stressdetect.learning.persistence import ModelBundle, load_model, save_model


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 4)) * [1, 10, 100, 0.1]
    y = np.where(X[:, 0] + X[:, 1] / 10 > 0, STRESS, NEUTRAL)
    return X, y


@pytest.mark.parametrize("make", [lambda: StumpBoostClassifier(15, list("abcd")),
                                  lambda: LinearSVMClassifier(10.0),
                                  lambda: SMOClassifier("rbf", 4.0, 0.5)])
def test_round_trip(tmp_path, data, make):
    X, y = data
    scaler = RangeScaler().fit(X)
    bundle = ModelBundle(make().fit(scaler.transform(X), y), scaler, list("abcd"), "P4")
    save_model(tmp_path / "m.json", bundle)
    loaded = load_model(tmp_path / "m.json")
    assert loaded.kind == bundle.kind and loaded.participant_id == "P4"
    np.testing.assert_allclose(loaded.decision_function(X), bundle.decision_function(X),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(loaded.predict(X), bundle.predict(X))
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["format"] == 1 and doc["feature_names"] == list("abcd")
    assert not list(tmp_path.glob("*.partial"))


def test_rejects_bad_files(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(SchemaError):
        load_model(tmp_path / "bad.json")
    (tmp_path / "v2.json").write_text(json.dumps({"format": 2, "kind": "adaboost"}))
    with pytest.raises(SchemaError):
        load_model(tmp_path / "v2.json")
    (tmp_path / "kind.json").write_text(json.dumps({"format": 1, "kind": "forest"}))
    with pytest.raises(SchemaError):
        load_model(tmp_path / "kind.json")
