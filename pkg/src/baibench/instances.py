"""
Registry of the ten synthetic benchmark instances (K=40) and loaders for the
two real-data instances (80 ad CTRs, 31 movie ratings).

Synthetic default budgets are heuristics ("unverified" in their provenance
note): the budgets used for published error tables are not part of the
instance definitions, so these are just sensible defaults for the CLI.
"""

import hashlib
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Dict, List, Optional

import numpy as np

from .model import Instance


class DataFormatError(ValueError):
    """Raised when a vendored or user-supplied data table fails validation."""


OBD_MEAN_STD = 0.057774753125
OBD_SCALE = np.sqrt(1000.0)  # one pull models a thousand impressions
MOVIELENS_MEAN_STD = 0.17820006619699696

_DATA_SHA256 = {
    "obd_ctr.txt": "c239cf111ababd76eea14999dd35b7b103c6595527bd6e628e01c70bc562ec89",
    "movielens_ratings.txt": "197335c2fd6d8c9dda9d2aaf5dbc1695cfe4801fd0149a267271f1462bf40b24",
}


@dataclass(frozen=True)
class InstanceSpec:
    """Registry entry: identifier, arm count, default budget, provenance note."""

    id: str
    k: int
    default_budget: int
    note: str
    build: Callable[[], Instance]


def _synthetic_means(index: int) -> np.ndarray:
    k = 40
    i = np.arange(1, k + 1, dtype=np.float64)
    if index == 1:
        return 1.0 - (i - 1) * 0.05
    if index == 2:
        return 10.0 * (i - 1) ** 0.8 / 39.0 ** 0.8
    if index == 3:
        return 1.0 - np.sqrt(i - 1) / 10.0
    if index == 4:
        return np.array([1.0] + [0.9] * 4 + [0.0] * 35)
    if index == 5:
        rest = np.sin(9.0 * np.pi * (k - i[1:]) / (20.0 * k))
        return np.concatenate(([np.sin((k - 1) * np.pi / (2.0 * k))], rest))
    if index == 6:
        return 0.75 * 3.0 ** (-i / 10.0)
    if index == 7:
        return np.array([1.0] + [0.8] * 39)
    if index == 8:
        return np.array([1.0] + [0.8] * 3 + [0.8] * 6 + [0.2] * 10 + [0.0] * 20)
    if index == 9:
        return np.array([1.0, 0.8, 0.8] + [0.0] * 37)
    if index == 10:
        return np.array([1.0, 0.9, 0.85, 0.8] + [0.0] * 36)
    raise ValueError(f"synthetic instance id must be 1..10, got {index}")


def synthetic_instance(index: int) -> Instance:
    """One of the ten synthetic K=40 benchmark instances."""
    inst = Instance(means=_synthetic_means(index), label=str(index))
    inst.best_arm()  # every registered instance has a unique best arm
    return inst


def _read_table(name: str, path: Optional[str]) -> List[float]:
    if path is None:
        payload = resources.files("baibench.data").joinpath(name).read_bytes()
        digest = hashlib.sha256(payload).hexdigest()
        if digest != _DATA_SHA256[name]:
            raise DataFormatError(f"vendored table {name} is corrupted (sha256 mismatch)")
        text = payload.decode("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    values = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            try:
                values.append(float(line))
            except ValueError as exc:
                raise DataFormatError(f"bad value in {name}: {line!r}") from exc
    return values


def load_real_instance(
    name: str, path: Optional[str] = None, table_is_final_means: bool = False
) -> Instance:
    """
    Build the Open Bandit ("obd") or MovieLens ("movielens") instance from its
    vendored table (or `path`, same one-value-per-line format).

    obd: mean_i = (ctr_i / mean-std) * sqrt(1000), K=80.
    movielens: mean_i = rating_i / mean-std, K=31. Whether the published
    table is pre- or post-division is ambiguous; `table_is_final_means=True`
    skips the division and uses the table verbatim.
    """
    if name == "obd":
        values = _read_table("obd_ctr.txt", path)
        if len(values) != 80:
            raise DataFormatError(f"obd table must have 80 rows, got {len(values)}")
        means = np.asarray(values) / OBD_MEAN_STD * OBD_SCALE
    elif name == "movielens":
        values = _read_table("movielens_ratings.txt", path)
        if len(values) != 31:
            raise DataFormatError(f"movielens table must have 31 rows, got {len(values)}")
        means = np.asarray(values)
        if not table_is_final_means:
            means = means / MOVIELENS_MEAN_STD
    else:
        raise ValueError(f"unknown real instance {name!r}")
    inst = Instance(means=means, label=name)
    inst.best_arm()
    return inst


def _specs() -> Dict[str, InstanceSpec]:
    # Synthetic budgets scale roughly with H1 so default runs land at a
    # moderate error level; they are not authoritative.
    synthetic_budgets = {
        1: 15000, 2: 1000, 3: 11000, 4: 10000, 5: 40000,
        6: 2000, 7: 22000, 8: 3000, 9: 2000, 10: 9000,
    }
    specs: Dict[str, InstanceSpec] = {}
    for i in range(1, 11):
        specs[str(i)] = InstanceSpec(
            id=str(i),
            k=40,
            default_budget=synthetic_budgets[i],
            note="synthetic; default budget unverified heuristic",
            build=lambda i=i: synthetic_instance(i),
        )
    specs["obd"] = InstanceSpec(
        id="obd", k=80, default_budget=3000,
        note="Open Bandit CTR table", build=lambda: load_real_instance("obd"),
    )
    specs["movielens"] = InstanceSpec(
        id="movielens", k=31, default_budget=10000,
        note="MovieLens rating table", build=lambda: load_real_instance("movielens"),
    )
    return specs


REGISTRY: Dict[str, InstanceSpec] = _specs()


def instance_ids() -> List[str]:
    return list(REGISTRY)


def get_instance(instance_id: str) -> Instance:
    """Look up a registered instance by id ("1".."10", "obd", "movielens")."""
    spec = REGISTRY.get(str(instance_id))
    if spec is None:
        raise KeyError(f"unknown instance id {instance_id!r}")
    return spec.build()
