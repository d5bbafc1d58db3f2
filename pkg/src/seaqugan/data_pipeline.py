"""Port ingestion, great-circle distances and the 4-port graph corpus.

Edge weights of a 4-node graph are stored in lexicographic pair order
``(0,1), (0,2), (0,3), (1,2), (1,3), (2,3)``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import CorruptDatasetError, DegenerateInputError, InfeasibleSamplingError, PortFileError

log = logging.getLogger(__name__)

EARTH_RADIUS_NM = 3440.065
MIN_DISTANCE_NM = 100.0
MAX_REJECTIONS = 10_000
SUM_EPS = 1e-12

EDGE_PAIRS = tuple(combinations(range(4), 2))
EDGE_COLUMNS = ("w01", "w02", "w03", "w12", "w13", "w23")
PORT_COLUMNS = ("id", "name", "lat_deg", "lon_deg")


@dataclass(frozen=True)
class Port:
    id: int
    name: str
    lat: float
    lon: float


@dataclass
class Dataset:
    weights: np.ndarray  # (N, 6)
    raw_distances: np.ndarray | None = None  # (N, 6) nautical miles, when known
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.weights)


def _validate_port(port: Port, where: str) -> None:
    if not -90.0 <= port.lat <= 90.0:
        raise PortFileError(f"{where}: latitude {port.lat} outside [-90, 90]")
    if not -180.0 < port.lon <= 180.0:
        raise PortFileError(f"{where}: longitude {port.lon} outside (-180, 180]")


def load_ports(path) -> list[Port]:
    ports: list[Port] = []
    seen: set[int] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PORT_COLUMNS:
            raise PortFileError(f"{path}: expected header {','.join(PORT_COLUMNS)}, got {header}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise PortFileError(f"{path}:{line}: expected 4 fields, got {len(row)}")
            try:
                port = Port(int(row[0]), row[1].strip(), float(row[2]), float(row[3]))
            except ValueError as exc:
                raise PortFileError(f"{path}:{line}: {exc}") from None
            _validate_port(port, f"{path}:{line}")
            if port.id in seen:
                raise PortFileError(f"{path}:{line}: duplicate port id {port.id}")
            seen.add(port.id)
            ports.append(port)
    return ports


def bundled_ports_path() -> Path:
    return Path(str(resources.files("seaqugan") / "data" / "ports.csv"))


def bundled_ports() -> list[Port]:
    return load_ports(bundled_ports_path())


def port_list_hash(ports) -> str:
    h = hashlib.sha256()
    for p in ports:
        h.update(f"{p.id},{p.name},{p.lat!r},{p.lon!r}\n".encode())
    return h.hexdigest()


def great_circle_nm(a: Port, b: Port) -> float:
    """Haversine distance in nautical miles."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_NM * math.asin(min(1.0, math.sqrt(h)))


def normalize_edges(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] != 6:
        raise ValueError(f"expected 6 edge weights, got shape {raw.shape}")
    if np.any(raw < 0):
        raise ValueError("edge weights must be nonnegative")
    total = raw.sum(axis=-1, keepdims=True)
    if np.any(total <= SUM_EPS):
        raise DegenerateInputError("edge weights sum to zero")
    return raw / total


def quad_distances(ports) -> np.ndarray:
    return np.array([great_circle_nm(ports[i], ports[j]) for i, j in EDGE_PAIRS])


def sample_graph(rng: np.random.Generator, ports, threshold_nm: float = MIN_DISTANCE_NM):
    """Draw 4 distinct ports until all pair distances reach ``threshold_nm``.

    Returns ``(weights, raw_distances)``.
    """
    if len(ports) < 4:
        raise ValueError(f"need at least 4 ports, got {len(ports)}")
    for _ in range(MAX_REJECTIONS):
        idx = rng.choice(len(ports), size=4, replace=False)
        raw = quad_distances([ports[i] for i in idx])
        if raw.min() >= threshold_nm:
            return normalize_edges(raw), raw
    raise InfeasibleSamplingError(
        f"{MAX_REJECTIONS} consecutive quadruples rejected at {threshold_nm} nmi; port list too clustered"
    )


def build_dataset(n: int, seed: int, ports, threshold_nm: float = MIN_DISTANCE_NM) -> Dataset:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    weights, raws = [], []
    for _ in range(n):
        w, raw = sample_graph(rng, ports, threshold_nm)
        weights.append(w)
        raws.append(raw)
    weights = np.array(weights)
    provenance = {
        "seed": seed,
        "n_samples": n,
        "threshold_nm": threshold_nm,
        "earth_radius_nm": EARTH_RADIUS_NM,
        "port_list_hash": port_list_hash(ports),
        "n_ports": len(ports),
    }
    log.info("built %d graphs, pooled weight std %.6f", n, weights.std())
    return Dataset(weights, np.array(raws), provenance)


def bundled_dataset(n: int = 1000, seed: int = 0) -> Dataset:
    """Default training corpus: 1000 graphs over the bundled ports."""
    return build_dataset(n, seed, bundled_ports())


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_weights_csv(path, weights) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("graph_id",) + EDGE_COLUMNS)
        for i, row in enumerate(weights):
            writer.writerow([i] + [repr(float(w)) for w in row])


def read_weights_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != ("graph_id",) + EDGE_COLUMNS:
            raise CorruptDatasetError(f"{path}: unexpected header {header}")
        try:
            rows = [[float(x) for x in row[1:]] for row in reader if row]
        except ValueError as exc:
            raise CorruptDatasetError(f"{path}:{reader.line_num}: {exc}") from None
    if any(len(r) != 6 for r in rows):
        raise CorruptDatasetError(f"{path}: every row needs 6 weights")
    return np.array(rows, dtype=float).reshape(-1, 6)


def save_dataset(dataset: Dataset, path) -> None:
    write_weights_csv(path, dataset.weights)
    sidecar_path(path).write_text(json.dumps(dataset.provenance, indent=2, sort_keys=True) + "\n")


def load_dataset(path) -> Dataset:
    weights = read_weights_csv(path)
    if len(weights) == 0:
        raise CorruptDatasetError(f"{path}: no samples")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise CorruptDatasetError(f"{path}: negative or non-finite weight")
    bad = np.abs(weights.sum(axis=1) - 1.0) > 1e-9
    if np.any(bad):
        raise CorruptDatasetError(f"{path}: row {int(np.argmax(bad))} does not sum to one")
    side = sidecar_path(path)
    if side.exists():
        provenance = json.loads(side.read_text())
    else:
        log.warning("%s: provenance sidecar missing", path)
        provenance = {}
    return Dataset(weights, None, provenance)
