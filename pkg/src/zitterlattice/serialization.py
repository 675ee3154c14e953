"""Config files, manifests and plot-ready CSV/JSON outputs."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml

from .errors import ConfigError

SECTIONS = ("lattice", "plan", "sweep", "analytic", "compare", "dispersion")
MANIFEST_NAME = "manifest.json"


def load_config(path) -> dict:
    """Read a YAML config with top-level sections named after the dataclasses they feed."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    check_sections(data)
    return data


def check_sections(data: dict) -> None:
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for name, body in data.items():
        if body is not None and not isinstance(body, dict):
            raise ConfigError(f"section {name!r} must be a mapping")


def apply_overrides(data: dict, assignments: Iterable[str]) -> dict:
    """Apply ``section.key=value`` overrides (value parsed as YAML); later ones win."""
    out = {k: dict(v or {}) for k, v in data.items()}
    for item in assignments or ():
        key, sep, raw = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r} in override")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw!r}") from exc
        target = out.setdefault(section, {})
        # dotted paths reach into nested mappings such as sweep.axis_x.size
        parts = name.split(".")
        for p in parts[:-1]:
            nxt = target.setdefault(p, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r} descends into a non-mapping")
            target = nxt
        target[parts[-1]] = value
    return out


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(resolved: dict) -> str:
    return hashlib.sha256(canonical_json(resolved).encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str
    duration_s: float = 0.0
    termination: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    @property
    def config_sha256(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config_sha256"] = self.config_sha256
        return d

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
        d.pop("config_sha256", None)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"malformed manifest {path}: {exc}") from exc


def _preamble(fh, manifest: RunManifest, description: str, units: Optional[dict]):
    fh.write(f"# {description}\n")
    fh.write(f"# produced by: zitterlattice {manifest.tool_version} {manifest.command}\n")
    fh.write(f"# manifest: {MANIFEST_NAME}\n")
    fh.write(f"# config_sha256: {manifest.config_sha256}\n")
    for col, unit in (units or {}).items():
        fh.write(f"# unit {col}: {unit}\n")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def write_series_csv(path, manifest: RunManifest, columns: Sequence[str], data: Sequence,
                     description: str, units: Optional[dict] = None) -> Path:
    """Columns of equal length, one row per sample; floats written with repr precision."""
    path = Path(path)
    cols = [np.asarray(c) for c in data]
    if len({len(c) for c in cols}) > 1:
        raise ValueError("series columns differ in length")
    with path.open("w", newline="") as fh:
        _preamble(fh, manifest, description, units)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in zip(*cols):
            w.writerow([_cell(v) for v in row])
    manifest.outputs.append(path.name)
    return path


def write_matrix_csv(path, manifest: RunManifest, matrix: np.ndarray, row_name: str,
                     row_values, col_name: str, col_values, description: str) -> Path:
    """Dense grid; the header row carries the column axis, the first column the row axis."""
    path = Path(path)
    m = np.asarray(matrix)
    with path.open("w", newline="") as fh:
        _preamble(fh, manifest, description, None)
        fh.write(f"# rows: {row_name}; columns: {col_name}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{row_name}\\{col_name}"] + [_cell(v) for v in col_values])
        for y, row in zip(row_values, m):
            w.writerow([_cell(y)] + [_cell(v) for v in row])
    manifest.outputs.append(path.name)
    return path


def write_json(path, manifest: RunManifest, payload: dict) -> Path:
    path = Path(path)
    body = {"manifest": MANIFEST_NAME, "config_sha256": manifest.config_sha256, **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    manifest.outputs.append(path.name)
    return path


def read_series_csv(path):
    """Return (columns, float array) from a file written by :func:`write_series_csv`."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], np.array(rows[1:], dtype=float)
