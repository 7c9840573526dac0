"""Random environment: one two-sided Brownian motion per integer level on a uniform grid."""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"BLPP"
VERSION = b"1"
_HEADER = struct.Struct("<qqdddQ")
_LEVEL_OFFSET = 1 << 62


class FieldFormatError(ValueError):
    pass


class ChecksumError(FieldFormatError):
    pass


class VersionError(FieldFormatError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    level_min: int
    level_max: int
    t_min: float
    t_max: float
    delta: float
    seed: int = 0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.t_min < 0 < self.t_max:
            raise ValueError(f"need t_min < 0 < t_max, got [{self.t_min}, {self.t_max}]")
        if self.level_max < self.level_min:
            raise ValueError("level_max < level_min")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        for name, span in (("t_max - t_min", self.t_max - self.t_min), ("-t_min", -self.t_min)):
            q = span / self.delta
            if abs(q - round(q)) > 1e-9 * max(1.0, abs(q)):
                raise ValueError(f"{name} = {span} is not a multiple of delta = {self.delta}")

    @property
    def n_levels(self) -> int:
        return self.level_max - self.level_min + 1

    @property
    def n_nodes(self) -> int:
        return int(round((self.t_max - self.t_min) / self.delta)) + 1

    @property
    def zero_index(self) -> int:
        return int(round(-self.t_min / self.delta))

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.level_min, self.level_max + 1)

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.n_nodes) - self.zero_index) * self.delta

    def time_of(self, index):
        return (np.asarray(index) - self.zero_index) * self.delta

    def index_of(self, t) -> int:
        """Nearest grid node to time t."""
        return int(round(t / self.delta)) + self.zero_index

    def row(self, level: int) -> int:
        if not self.level_min <= level <= self.level_max:
            raise IndexError(f"level {level} outside [{self.level_min}, {self.level_max}]")
        return level - self.level_min

    def contains(self, level: int, index: int) -> bool:
        return self.level_min <= level <= self.level_max and 0 <= index < self.n_nodes


class BrownianField:
    """Immutable node values B_k(t_i); rows indexed by level - level_min."""

    def __init__(self, spec: FieldSpec, values: np.ndarray):
        values = np.array(values, dtype=np.float64)
        if values.shape != (spec.n_levels, spec.n_nodes):
            raise ValueError(f"expected shape {(spec.n_levels, spec.n_nodes)}, got {values.shape}")
        values.setflags(write=False)
        self.spec = spec
        self.values = values

    def __getitem__(self, level: int) -> np.ndarray:
        return self.values[self.spec.row(level)]

    def __eq__(self, other):
        return (isinstance(other, BrownianField) and self.spec == other.spec
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        s = self.spec
        return (f"BrownianField(levels {s.level_min}..{s.level_max}, "
                f"t in [{s.t_min}, {s.t_max}], delta={s.delta}, seed={s.seed})")

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=1)


def _normals(seed: int, level: int, side: int, n: int) -> np.ndarray:
    # output j depends only on (seed, level, side, j): Philox raw words 2j, 2j+1
    key = np.array([seed, ((level + _LEVEL_OFFSET) << 1) | side], dtype=np.uint64)
    raw = np.random.Philox(key=key).random_raw(2 * n).reshape(n, 2)
    u1 = 1.0 - (raw[:, 0] >> np.uint64(11)) * 2.0**-53
    u2 = (raw[:, 1] >> np.uint64(11)) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def generate_field(spec: FieldSpec) -> BrownianField:
    z = spec.zero_index
    n_right = spec.n_nodes - 1 - z
    scale = np.sqrt(spec.delta)
    values = np.empty((spec.n_levels, spec.n_nodes))
    for row, level in enumerate(spec.levels):
        right = _normals(spec.seed, int(level), 0, n_right) * scale
        left = _normals(spec.seed, int(level), 1, z) * scale
        values[row, z] = 0.0
        values[row, z + 1:] = np.cumsum(right)
        # left half walks backwards from 0: B(-k delta) = -(sum of k left increments)
        values[row, :z] = -np.cumsum(left)[::-1]
    return BrownianField(spec, values)


def inject_field(spec: FieldSpec, arrays) -> BrownianField:
    return BrownianField(spec, arrays)


def save_field(field: BrownianField, path) -> None:
    s = field.spec
    body = MAGIC + VERSION + _HEADER.pack(s.level_min, s.level_max, s.t_min, s.t_max, s.delta, s.seed)
    body += np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    tmp.replace(path)


def load_field(path) -> BrownianField:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 1 or not data.startswith(MAGIC):
        raise FieldFormatError("not a BLPP field file")
    if data[len(MAGIC):len(MAGIC) + 1] != VERSION:
        raise VersionError(f"unsupported field file version {data[len(MAGIC):len(MAGIC) + 1]!r}")
    if len(data) < len(MAGIC) + 1 + _HEADER.size + 4:
        raise ChecksumError("file truncated")
    body, crc = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(body) != crc:
        raise ChecksumError("checksum mismatch")
    off = len(MAGIC) + 1
    lo, hi, t0, t1, delta, seed = _HEADER.unpack_from(body, off)
    try:
        spec = FieldSpec(lo, hi, t0, t1, delta, seed)
    except ValueError as e:
        raise FieldFormatError(f"corrupt header: {e}") from e
    arr = np.frombuffer(body, dtype="<f8", offset=off + _HEADER.size)
    if arr.size != spec.n_levels * spec.n_nodes:
        raise FieldFormatError("payload size does not match header")
    return BrownianField(spec, arr.reshape(spec.n_levels, spec.n_nodes))
