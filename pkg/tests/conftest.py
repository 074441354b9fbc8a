import numpy as np
import pytest

from focusloop import features, mlp, preprocess, simulate


@pytest.fixture(scope="session")
def scenario_run():
    """One full default-scenario run shared across the suite."""
    return simulate.run_scenario(simulate.default_script(seed=7))


@pytest.fixture(scope="session")
def scenario_dataset(scenario_run):
    """Labeled feature matrix from the default scenario."""
    X, y = [], []
    for w in scenario_run.windows:
        if w.label is None:
            continue
        fv = features.extract_features(preprocess.clean_window(w))
        assert not isinstance(fv, features.MissingFeatures)
        X.append(fv.to_array())
        y.append(w.label.value)
    return np.array(X), np.array(y, dtype=np.int64)


@pytest.fixture(scope="session")
def trained_model(scenario_dataset):
    X, y = scenario_dataset
    model, report = mlp.train(X, y, mlp.TrainConfig(seed=3))
    assert report.val_accuracy >= 0.9
    return model
