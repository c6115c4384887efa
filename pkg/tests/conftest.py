import json
import math

import numpy as np
import pytest

from topopath.ingest import AssociationMatrix, ConditionCode, PatientRecord

# the thirty-one condition codes used by the marginal fixtures
CODES_31 = [
    "I21.9", "I27.", "I49.9", "I50.9", "J02.9", "J18.", "J34.89", "J96.",
    "M25.50", "M62.838", "M79.10", "M89.8X9", "N17.9", "R05", "R06.",
    "R06.7", "R07.", "R09.3", "R09.81", "R10.9", "R11.", "R19.", "R42",
    "R50.9", "R51", "R52", "R53.", "R63.0", "R65.21", "R68.83", "R68.2",
]

# patients-with-k-codes histogram the marginal fixture reproduces
K_HISTOGRAM = (651, 431, 286, 115, 45, 11, 5, 1)
FEVER_CODE = "R50.9"
FEVER_SUPPORT = 1073


def make_matrix(incidence, code_names=None) -> AssociationMatrix:
    """AssociationMatrix from a raw 0/1 array, generating labels as needed."""
    incidence = np.asarray(incidence, dtype=np.uint8)
    n, m = incidence.shape
    if code_names is None:
        code_names = [f"c{j}" for j in range(m)]
    return AssociationMatrix(
        patients=tuple(f"p{i}" for i in range(n)),
        codes=tuple(ConditionCode(name) for name in code_names),
        incidence=incidence,
    )


def marginal_fixture_records():
    """1545 synthetic records shaped like the marginal fixtures.

    Row-sum histogram equals K_HISTOGRAM, R50.9 appears in exactly 1073
    records, and every code keeps support >= 5 so the default 0.3 percent
    filter retains all 31 columns.
    """
    others = [c for c in CODES_31 if c != FEVER_CODE]
    k_values = []
    for k, count in enumerate(K_HISTOGRAM, start=1):
        k_values.extend([k] * count)
    assert len(k_values) == 1545

    records = []
    ring = 0
    for i, k in enumerate(k_values):
        codes = set()
        if i < FEVER_SUPPORT:
            codes.add(FEVER_CODE)
        while len(codes) < k:
            codes.add(others[ring % len(others)])
            ring += 1
        records.append(PatientRecord(patient_id=f"p{i:04d}", codes=frozenset(codes)))
    return records


def marginal_code_table():
    return [ConditionCode(code) for code in CODES_31]


@pytest.fixture(scope="session")
def marginal_records():
    return marginal_fixture_records()


@pytest.fixture(scope="session")
def marginal_table():
    return marginal_code_table()


def circle_distances(n_points=24):
    """Euclidean distance matrix of points evenly spaced on the unit circle."""
    theta = 2 * math.pi * np.arange(n_points) / n_points
    xy = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def betti6_distances():
    """Six points, two squares sharing the edge 2-3, all edges at 0.3.

    Square 0-1-2-3 is filled first (diagonal 0-2 at 0.42), square 2-4-5-3
    later (diagonals at 0.48); cross-square distances sit at 0.5.
    """
    d = np.zeros((6, 6))

    def setd(i, j, v):
        d[i, j] = d[j, i] = v

    for i, j in [(0, 1), (1, 2), (2, 3), (0, 3), (2, 4), (4, 5), (3, 5)]:
        setd(i, j, 0.3)
    setd(0, 2, 0.42)
    setd(1, 3, 0.45)
    setd(2, 5, 0.48)
    setd(3, 4, 0.48)
    for i, j in [(0, 4), (0, 5), (1, 4), (1, 5)]:
        setd(i, j, 0.5)
    return d


def square_loop_patient_sets():
    """Four patient sets on a square: sides at Jaccard 0.4, diagonals at 6/13.

    24 patients sit in all four sets, 6 in each adjacent pair only, 4 in each
    diagonal pair only; each set has 40 patients out of 56.
    """
    sets = {k: set() for k in range(4)}
    pid = 0

    def add(members, count):
        nonlocal pid
        for _ in range(count):
            for m in members:
                sets[m].add(pid)
            pid += 1

    add([0, 1, 2, 3], 24)
    add([0, 1], 6)
    add([1, 2], 6)
    add([2, 3], 6)
    add([3, 0], 6)
    add([0, 2], 4)
    add([1, 3], 4)
    return sets, pid


def write_square_loop_dataset(directory):
    """CSV records + code table for the twin-pattern square-loop pipeline runs.

    Codes A and B mark the same patient set (an exact redescription); codes
    C, D, E complete a square in cluster space whose hole is born at 0.4 and
    filled at 6/13, all under the 0.5 threshold.
    """
    sets, n_patients = square_loop_patient_sets()
    membership = {
        "A": sets[0], "B": sets[0], "C": sets[1], "D": sets[2], "E": sets[3],
    }
    lines = ["patient_id,codes"]
    for pid in range(n_patients):
        codes = sorted(code for code, patients in membership.items() if pid in patients)
        lines.append(f"q{pid:02d},{';'.join(codes)}")
    records_path = directory / "records.csv"
    records_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    table_path = directory / "codes.json"
    table_path.write_text(
        json.dumps([{"code": c, "description": f"synthetic {c}"} for c in "ABCDE"]),
        encoding="utf-8",
    )
    config = {
        "input_path": str(records_path),
        "input_format": "csv",
        "code_table": str(table_path),
        "output_dir": str(directory / "out"),
        "min_support_fraction": 0.0,
        "max_order": 1,
        "min_support": 5,
        "n_shuffles": 64,
        "z_threshold": 3.0,
        "rips_threshold": 0.5,
        "max_dim": 2,
        "min_persistence": 0.0,
        "seed": 42,
    }
    config_path = directory / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return config_path, config
