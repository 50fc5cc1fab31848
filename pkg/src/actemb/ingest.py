"""Dataset ingestion for the two sensor families.

* Ambient smart-home event logs (CASAS style): text lines of
  ``timestamp sensor status [label]``, whitespace- or comma-delimited, cut
  into fixed-length overlapping event windows and one-hot encoded.
* Wearable inertial recordings (public HAR layout): nine per-channel
  fixed-width text matrices of pre-segmented 128-reading windows.

Vocabularies and normalization statistics are functions of the training
split alone; nothing here ever peeks at test data.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import DataError

OTHER_ACTIVITY = "Other Activity"  # class assigned to unlabeled ambient events

ON_TOKENS = frozenset({"ON", "OPEN", "PRESENT"})
OFF_TOKENS = frozenset({"OFF", "CLOSE", "CLOSED", "ABSENT"})

SECONDS_PER_DAY = 86400.0

HAR_CHANNELS = (
    "body_acc_x", "body_acc_y", "body_acc_z",
    "body_gyro_x", "body_gyro_y", "body_gyro_z",
    "total_acc_x", "total_acc_y", "total_acc_z",
)
HAR_WINDOW_LEN = 128


@dataclass
class Event:
    """One ambient sensor log record."""

    timestamp: datetime
    sensor_id: str
    status: str
    label: str | None = None

    def effective_label(self) -> str:
        return self.label if self.label is not None else OTHER_ACTIVITY


@dataclass
class EventWindow:
    """A fixed-length slice of the event stream, labeled by majority vote."""

    id: int
    events: list[Event]
    label: str
    start: datetime
    end: datetime


@dataclass
class SensorWindow:
    """One encoded (T, D) window ready for the autoencoder."""

    id: int
    data: np.ndarray
    label: str
    source: str  # "HAR" | "CASAS" | "synthetic"
    start: datetime | None = None
    end: datetime | None = None


# ---------------------------------------------------------------------------
# CASAS event parsing


_TS_FORMATS = ("%Y-%m-%d %H:%M:%S.%f", "%Y-%m-%d %H:%M:%S")


def _parse_timestamp(text: str, line_no: int | None) -> datetime:
    for fmt in _TS_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    where = f" at line {line_no}" if line_no is not None else ""
    raise DataError(f"malformed timestamp {text!r}{where}")


def parse_casas_line(line: str, line_no: int | None = None) -> Event:
    """Parse one log line into an Event.

    Accepts comma-delimited (``ts,sensor,status[,label]``) and
    whitespace-delimited (timestamp split over date and time tokens,
    underscores in the label standing for spaces) records. A missing label
    stays absent here; the "Other Activity" assignment happens downstream.
    """
    where = f" at line {line_no}" if line_no is not None else ""
    stripped = line.strip()
    if not stripped:
        raise DataError(f"empty line{where}")
    if "," in stripped:
        fields = [f.strip() for f in stripped.split(",")]
        if len(fields) < 3:
            raise DataError(f"expected >= 3 comma fields{where}: {stripped!r}")
        ts = _parse_timestamp(fields[0], line_no)
        sensor, status = fields[1], fields[2]
        label = ", ".join(fields[3:]).strip() if len(fields) > 3 else None
    else:
        toks = stripped.split()
        if len(toks) < 4:
            raise DataError(f"expected >= 4 whitespace fields{where}: {stripped!r}")
        ts = _parse_timestamp(toks[0] + " " + toks[1], line_no)
        sensor, status = toks[2], toks[3]
        label = " ".join(toks[4:]).replace("_", " ") if len(toks) > 4 else None
    if not sensor:
        raise DataError(f"empty sensor id{where}")
    if label == "":
        label = None
    return Event(timestamp=ts, sensor_id=sensor, status=status, label=label)


def format_casas_line(event: Event) -> str:
    """Canonical comma-delimited form; parse(format(e)) preserves all four
    fields including microseconds."""
    ts = event.timestamp.strftime("%Y-%m-%d %H:%M:%S.%f")
    label = f",{event.label}" if event.label is not None else ""
    return f"{ts},{event.sensor_id},{event.status}{label}"


def read_casas_file(path: str) -> list[Event]:
    """All events of a log file, in timestamp order (stable-sorted if the
    file is not already sorted)."""
    events: list[Event] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            events.append(parse_casas_line(line, line_no))
    if not events:
        raise DataError(f"no events in {path}")
    if any(events[i].timestamp > events[i + 1].timestamp for i in range(len(events) - 1)):
        events.sort(key=lambda e: e.timestamp)
    return events


# ---------------------------------------------------------------------------
# Windowing


def window_events(events: list[Event], k: int, stride: int) -> list[EventWindow]:
    """Fixed-size windows of k events starting every ``stride`` events;
    the trailing partial window is dropped.

    Window label: majority over the k events' effective labels; a tie goes
    to the tied label occurring latest in the window (so the last event's
    label wins whenever it is among the leaders).
    """
    if k < 1:
        raise ValueError("window length k must be >= 1")
    if not 1 <= stride <= k:
        raise ValueError(f"stride must be in [1, k], got {stride} for k={k}")
    windows: list[EventWindow] = []
    wid = 0
    for start in range(0, len(events) - k + 1, stride):
        chunk = events[start : start + k]
        counts: dict[str, int] = {}
        last_pos: dict[str, int] = {}
        for pos, ev in enumerate(chunk):
            lab = ev.effective_label()
            counts[lab] = counts.get(lab, 0) + 1
            last_pos[lab] = pos
        top = max(counts.values())
        label = max((l for l, c in counts.items() if c == top), key=last_pos.__getitem__)
        windows.append(
            EventWindow(
                id=wid,
                events=chunk,
                label=label,
                start=chunk[0].timestamp,
                end=chunk[-1].timestamp,
            )
        )
        wid += 1
    return windows


# ---------------------------------------------------------------------------
# One-hot encoding


@dataclass
class SensorVocab:
    """Sensor inventory learned from training data only.

    Encoding layout per event: one-hot over ``sensors`` (lexicographic
    order), then the binary status pair [on-like, off-like], then the
    time-of-day scalar. Sensors unseen at fit time encode as an all-zero
    block and bump ``unknown_count``.
    """

    sensors: list[str]
    on_tokens: frozenset[str] = ON_TOKENS
    off_tokens: frozenset[str] = OFF_TOKENS
    unknown_count: int = 0

    @property
    def width(self) -> int:
        return len(self.sensors) + 3

    def sensor_index(self, sensor_id: str) -> int | None:
        # sensors list is sorted; linear scan is fine at ambient-home scale
        try:
            return self.sensors.index(sensor_id)
        except ValueError:
            return None


def build_vocab(windows: list[EventWindow]) -> SensorVocab:
    """Vocabulary from TRAINING windows only."""
    seen = {ev.sensor_id for w in windows for ev in w.events}
    return SensorVocab(sensors=sorted(seen))


def time_of_day(ts: datetime) -> float:
    """Seconds since midnight (with microseconds) scaled into [0, 1)."""
    secs = ts.hour * 3600 + ts.minute * 60 + ts.second + ts.microsecond / 1e6
    return secs / SECONDS_PER_DAY


def encode_casas_window(w: EventWindow, vocab: SensorVocab) -> np.ndarray:
    """(k, |sensors|+3) one-hot matrix for one event window."""
    n_sensors = len(vocab.sensors)
    mat = np.zeros((len(w.events), vocab.width))
    for row, ev in enumerate(w.events):
        idx = vocab.sensor_index(ev.sensor_id)
        if idx is None:
            vocab.unknown_count += 1
        else:
            mat[row, idx] = 1.0
        status = ev.status.upper()
        if status in vocab.on_tokens:
            mat[row, n_sensors] = 1.0
        elif status in vocab.off_tokens:
            mat[row, n_sensors + 1] = 1.0
        mat[row, n_sensors + 2] = time_of_day(ev.timestamp)
    return mat


def encode_event_windows(
    windows: list[EventWindow], vocab: SensorVocab
) -> list[SensorWindow]:
    return [
        SensorWindow(
            id=w.id,
            data=encode_casas_window(w, vocab),
            label=w.label,
            source="CASAS",
            start=w.start,
            end=w.end,
        )
        for w in windows
    ]


# ---------------------------------------------------------------------------
# HAR loading


def _har_label_map(root: str) -> dict[int, str]:
    path = os.path.join(root, "activity_labels.txt")
    if not os.path.exists(path):
        raise DataError(f"missing activity label file {path}")
    mapping: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            num, name = line.split(None, 1)
            mapping[int(num)] = name.strip().lower().replace("_", " ")
    if not mapping:
        raise DataError(f"empty activity label file {path}")
    return mapping


def _load_har_split(root: str, split: str, labels: dict[int, str],
                    id_start: int) -> list[SensorWindow]:
    sig_dir = os.path.join(root, split, "Inertial Signals")
    channels = []
    n_rows = None
    for ch in HAR_CHANNELS:
        path = os.path.join(sig_dir, f"{ch}_{split}.txt")
        if not os.path.exists(path):
            raise DataError(f"missing channel file {path}")
        mat = np.loadtxt(path, dtype=np.float64, ndmin=2)
        if mat.shape[1] != HAR_WINDOW_LEN:
            raise DataError(
                f"channel file {path} has {mat.shape[1]} readings per window, "
                f"expected {HAR_WINDOW_LEN}"
            )
        if n_rows is None:
            n_rows = mat.shape[0]
        elif mat.shape[0] != n_rows:
            raise DataError(
                f"row-count mismatch: {path} has {mat.shape[0]} windows, "
                f"other channels have {n_rows}"
            )
        channels.append(mat)
    y_path = os.path.join(root, split, f"y_{split}.txt")
    if not os.path.exists(y_path):
        raise DataError(f"missing label file {y_path}")
    y = np.loadtxt(y_path, dtype=np.int64, ndmin=1)
    if y.shape[0] != n_rows:
        raise DataError(f"label file {y_path} has {y.shape[0]} rows, windows have {n_rows}")
    stacked = np.stack(channels, axis=2)  # (N, 128, 9) in HAR_CHANNELS order
    out = []
    for row in range(n_rows):
        lab_id = int(y[row])
        if lab_id not in labels:
            raise DataError(f"unknown activity id {lab_id} in {y_path}")
        out.append(
            SensorWindow(
                id=id_start + row,
                data=np.ascontiguousarray(stacked[row]),
                label=labels[lab_id],
                source="HAR",
            )
        )
    return out


def load_har(root: str) -> tuple[list[SensorWindow], list[SensorWindow]]:
    """Load the public HAR distribution's pre-materialized train/test split.

    Each window is a 128x9 matrix of the inertial channels in
    :data:`HAR_CHANNELS` order; labels come from the distribution's
    activity_labels file, lowercased with spaces.
    """
    if not os.path.isdir(root):
        raise DataError(f"HAR directory {root} does not exist")
    labels = _har_label_map(root)
    train = _load_har_split(root, "train", labels, id_start=0)
    test = _load_har_split(root, "test", labels, id_start=len(train))
    return train, test


# ---------------------------------------------------------------------------
# Handcrafted baselines (representative statistical subsets)


def handcrafted_har(w: SensorWindow) -> np.ndarray:
    """Channel-major (mean, population variance, min, max) per channel."""
    data = np.asarray(w.data, dtype=np.float64)
    feats = np.empty(4 * data.shape[1])
    for ch in range(data.shape[1]):
        col = data[:, ch]
        feats[4 * ch : 4 * ch + 4] = (col.mean(), col.var(), col.min(), col.max())
    return feats


def handcrafted_casas(w: EventWindow, vocab: SensorVocab) -> np.ndarray:
    """Window summary: duration (s), start/end time of day, distinct-sensor
    count, one-hot of the dominant sensor (ties -> lexicographic first),
    per-vocab-sensor event counts."""
    n_sensors = len(vocab.sensors)
    counts: dict[str, int] = {}
    for ev in w.events:
        counts[ev.sensor_id] = counts.get(ev.sensor_id, 0) + 1
    top = max(counts.values())
    dominant = min(s for s, c in counts.items() if c == top)
    feats = np.zeros(4 + 2 * n_sensors)
    feats[0] = (w.end - w.start).total_seconds()
    feats[1] = time_of_day(w.start)
    feats[2] = time_of_day(w.end)
    feats[3] = float(len(counts))
    dom_idx = vocab.sensor_index(dominant)
    if dom_idx is not None:
        feats[4 + dom_idx] = 1.0
    for sensor, c in counts.items():
        idx = vocab.sensor_index(sensor)
        if idx is not None:
            feats[4 + n_sensors + idx] = float(c)
    return feats


# ---------------------------------------------------------------------------
# Rolling day split


def split_hh101(windows: list) -> list[tuple[list, list]]:
    """Rolling 4-train/2-test day folds over windows carrying start
    timestamps.

    Days with data are taken in chronological order and cut into consecutive
    blocks of six (boundaries at midnight, a window belongs to the day of
    its start); a trailing block of fewer than six days is dropped.
    """
    if any(w.start is None for w in windows):
        raise DataError("rolling split needs windows with start timestamps")
    days = sorted({w.start.date() for w in windows})
    if len(days) < 6:
        raise DataError(f"rolling split needs >= 6 distinct days, got {len(days)}")
    by_day: dict = {}
    for w in windows:
        by_day.setdefault(w.start.date(), []).append(w)
    folds = []
    for b in range(len(days) // 6):
        block = days[6 * b : 6 * b + 6]
        train = [w for d in block[:4] for w in by_day[d]]
        test = [w for d in block[4:] for w in by_day[d]]
        folds.append((train, test))
    return folds


# ---------------------------------------------------------------------------
# Normalization


@dataclass
class NormStats:
    """Per-channel z-score statistics fit on the training split only."""

    mean: np.ndarray
    std: np.ndarray          # 1.0 where the training channel was constant
    constant_mask: np.ndarray  # bool flags for zero-variance channels

    @property
    def n_channels(self) -> int:
        return self.mean.shape[0]


def fit_normalize(train_features: np.ndarray) -> NormStats:
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("fit_normalize needs a non-empty (N, F) matrix")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    constant = std == 0.0
    std = np.where(constant, 1.0, std)
    return NormStats(mean=mean, std=std, constant_mask=constant)


def apply_normalize(features: np.ndarray, stats: NormStats) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != stats.n_channels:
        raise DataError(
            f"feature width {x.shape[-1]} does not match stats ({stats.n_channels})"
        )
    return (x - stats.mean) / stats.std


# ---------------------------------------------------------------------------
# CSV export


def write_sequence_csv(path: str, windows: list[SensorWindow], seed: int) -> None:
    """One (window, timestep) pair per row: id,label,t,x0..x{D-1}."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        d = windows[0].data.shape[1] if windows else 0
        writer.writerow(["id", "label", "t"] + [f"x{j}" for j in range(d)])
        for w in windows:
            for t in range(w.data.shape[0]):
                writer.writerow([w.id, w.label, t] + [repr(float(v)) for v in w.data[t]])


def write_features_csv(
    path: str, ids: list[int], labels: list[str], features: np.ndarray, seed: int,
    prefix: str = "f",
) -> None:
    """One window per row: id,label,f0..f{F-1}."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        n_feats = features.shape[1] if len(features) else 0
        writer.writerow(["id", "label"] + [f"{prefix}{j}" for j in range(n_feats)])
        for i, (wid, lab) in enumerate(zip(ids, labels)):
            writer.writerow([wid, lab] + [repr(float(v)) for v in features[i]])
