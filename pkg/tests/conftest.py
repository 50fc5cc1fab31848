import numpy as np
import pytest

from actemb.ingest import HAR_CHANNELS


def write_casas_fixture(path, n_events=45, label_cycle=("Enter Home", "Cook", None)):
    """Whitespace-delimited ambient log: one event per minute with
    microsecond timestamps, cycling sensors and labels (None = unlabeled)."""
    sensors = ("D002", "M001", "M002")
    statuses = ("OPEN", "ON", "OFF")
    lines = []
    for i in range(n_events):
        hh, mm = divmod(i, 60)
        ts = f"2012-08-17 {19 + hh:02d}:{mm:02d}:02.{677811 + i:06d}"
        sensor = sensors[i % len(sensors)]
        status = statuses[i % len(statuses)]
        label = label_cycle[i % len(label_cycle)]
        row = f"{ts} {sensor} {status}"
        if label is not None:
            row += " " + label.replace(" ", "_")
        lines.append(row)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def casas_file(tmp_path):
    return write_casas_fixture(tmp_path / "hh_fixture.txt")


def write_mini_har(root, n_train=12, n_test=6, seed=0):
    """Fabricate the public HAR directory layout at a tiny scale."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    names = [
        "WALKING", "WALKING_UPSTAIRS", "WALKING_DOWNSTAIRS",
        "SITTING", "STANDING", "LAYING",
    ]
    (root / "activity_labels.txt").write_text(
        "".join(f"{i + 1} {n}\n" for i, n in enumerate(names)), encoding="utf-8"
    )
    for split, n in (("train", n_train), ("test", n_test)):
        sig = root / split / "Inertial Signals"
        sig.mkdir(parents=True)
        for ch in HAR_CHANNELS:
            mat = rng.normal(size=(n, 128))
            np.savetxt(sig / f"{ch}_{split}.txt", mat, fmt="%13.6e")
        labels = rng.integers(1, 7, size=n)
        np.savetxt(root / split / f"y_{split}.txt", labels, fmt="%d")
    return root


@pytest.fixture
def mini_har_dir(tmp_path):
    return write_mini_har(tmp_path / "har")


def nn1_accuracy(x, y):
    """Leave-one-out 1-nearest-neighbour accuracy (test-suite oracle)."""
    x = np.asarray(x, dtype=np.float64)
    hits = 0
    for i in range(x.shape[0]):
        d2 = ((x - x[i]) ** 2).sum(axis=1)
        d2[i] = np.inf
        hits += y[int(d2.argmin())] == y[i]
    return hits / x.shape[0]


def zscore(x):
    """Per-dimension standardization (constant dims pass through)."""
    x = np.asarray(x, dtype=np.float64)
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    return (x - x.mean(axis=0)) / std
