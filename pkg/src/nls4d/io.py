"""Run artifacts: binary field snapshots, flat key = value configs,
run manifests, and small CSV helpers.

Snapshot layout, everything little-endian:

    bytes 0..3    magic "NLS4"
    bytes 4..7    format version, u32
    bytes 8..11   dimension d, u32
    bytes 12..15  points per axis n, u32
    bytes 16..23  box half-length L, f64
    bytes 24..31  sample time t, f64
    bytes 32..    n**d complex values, interleaved (re, im) f64, row-major
    trailing 4    CRC-32 of the payload, u32

The header is exactly 32 bytes.  A file that does not carry the full
payload plus trailer fails the checksum stage with a structured error
rather than crashing in the array reshape.

Config grammar: section names in brackets, one ``key = value`` pair per
line.  ``#`` or ``;`` opens a comment when it starts the line or follows
whitespace, so values may not contain those characters bare.  Keys must
be unique within their section and may only appear inside a section;
values are uninterpreted strings, the consumer does the typing.  The run
manifest is written in the same grammar and round-trips through
parse_config.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import grid as gr

SNAPSHOT_MAGIC = b"NLS4"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")  # magic, version, d, n, L, t


class SnapshotError(ValueError):
    """Malformed snapshot file; reason is one of magic, version, header,
    grid, checksum."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


class ConfigError(ValueError):
    pass


def write_snapshot(f: gr.ComplexField, path) -> None:
    g = f.grid
    payload = np.ascontiguousarray(f.values, dtype=np.complex128)
    payload = payload.astype("<c16", copy=False).tobytes(order="C")
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.d, g.n,
                          float(g.L), float(f.t))
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def read_snapshot(path) -> gr.ComplexField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise SnapshotError("magic", f"{path}: not a field snapshot "
                            f"(magic {raw[:4]!r})")
    if len(raw) < _HEADER.size:
        raise SnapshotError("header", f"{path}: header truncated at "
                            f"{len(raw)} bytes, need {_HEADER.size}")
    _, version, d, n, L, t = _HEADER.unpack_from(raw, 0)
    if version != SNAPSHOT_VERSION:
        raise SnapshotError("version", f"{path}: format version {version}, "
                            f"reader supports {SNAPSHOT_VERSION}")
    try:
        g = gr.make_grid(int(d), int(n), float(L))
    except Exception as exc:
        raise SnapshotError("grid", f"{path}: header describes an "
                            f"unusable grid: {exc}") from exc
    nbytes = 16 * g.npoints
    body = raw[_HEADER.size:]
    if len(body) != nbytes + 4:
        raise SnapshotError(
            "checksum", f"{path}: payload truncated or padded "
            f"({len(body)} bytes, expected {nbytes} + 4 trailer); "
            "checksum cannot be verified")
    payload, trailer = body[:nbytes], body[nbytes:]
    (crc_stored,) = struct.unpack("<I", trailer)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    if crc != crc_stored:
        raise SnapshotError("checksum", f"{path}: payload CRC-32 "
                            f"{crc:#010x} != stored {crc_stored:#010x}")
    values = np.frombuffer(payload, dtype="<c16").reshape(g.shape)
    return gr.field(g, values.astype(np.complex128), t=float(t))


# -- flat key = value configs ------------------------------------------

def _strip_comment(line: str) -> str:
    for mark in "#;":
        pos = 0
        while True:
            pos = line.find(mark, pos)
            if pos < 0:
                break
            if pos == 0 or line[pos - 1].isspace():
                line = line[:pos]
                break
            pos += 1
    return line.strip()


def parse_config(text: str) -> Dict[str, Dict[str, str]]:
    sections: Dict[str, Dict[str, str]] = {}
    current: Optional[str] = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = _strip_comment(rawline)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ConfigError(f"line {lineno}: empty section name")
            if current in sections:
                raise ConfigError(f"line {lineno}: duplicate section "
                                  f"[{current}]")
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, "
                              f"got {line!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in "
                              f"[{current}]")
        sections[current][key] = value.strip()
    return sections


def format_config(sections: Dict[str, Dict[str, str]]) -> str:
    lines: List[str] = []
    for name, pairs in sections.items():
        lines.append(f"[{name}]")
        for key, value in pairs.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def read_config(path) -> Dict[str, Dict[str, str]]:
    with open(path) as fh:
        return parse_config(fh.read())


def write_config(path, sections: Dict[str, Dict[str, str]]) -> None:
    with open(path, "w") as fh:
        fh.write(format_config(sections))


# -- run manifest -------------------------------------------------------

@dataclass
class RunManifest:
    """What a command did: config echo, code version, seed, grid, guard
    notes, baselines consulted, and wall-clock seconds per phase.

    Written on success and on failure paths alike; the text form uses
    the config grammar and parses back to an equal manifest.
    """

    command: str
    code_version: str
    status: str = "ok"
    seed: Optional[int] = None
    grid: Optional[gr.GridSpec] = None
    config: Dict[str, Dict[str, str]] = dc_field(default_factory=dict)
    guards: List[str] = dc_field(default_factory=list)
    baselines: List[str] = dc_field(default_factory=list)
    timings: Dict[str, float] = dc_field(default_factory=dict)

    def note_guard(self, message: str) -> None:
        self.guards.append(message)
        self.status = "guard-breach"

    def to_text(self) -> str:
        head: Dict[str, str] = {
            "command": self.command,
            "code_version": self.code_version,
            "status": self.status,
        }
        if self.seed is not None:
            head["seed"] = str(self.seed)
        sections: Dict[str, Dict[str, str]] = {"manifest": head}
        if self.grid is not None:
            sections["grid"] = {"d": str(self.grid.d), "n": str(self.grid.n),
                                "L": repr(float(self.grid.L))}
        sections["guards"] = {"count": str(len(self.guards))}
        for i, note in enumerate(self.guards, start=1):
            sections["guards"][f"guard_{i}"] = note
        sections["baselines"] = {"count": str(len(self.baselines))}
        for i, name in enumerate(self.baselines, start=1):
            sections["baselines"][f"baseline_{i}"] = name
        sections["timing_seconds"] = {k: repr(float(v))
                                      for k, v in self.timings.items()}
        for name, pairs in self.config.items():
            sections[f"config.{name}"] = dict(pairs)
        return format_config(sections)

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        sections = parse_config(text)
        head = sections.get("manifest", {})
        grid = None
        if "grid" in sections:
            gs = sections["grid"]
            grid = gr.make_grid(int(gs["d"]), int(gs["n"]), float(gs["L"]))
        guards_raw = sections.get("guards", {"count": "0"})
        guards = [guards_raw[f"guard_{i}"]
                  for i in range(1, int(guards_raw["count"]) + 1)]
        base_raw = sections.get("baselines", {"count": "0"})
        baselines = [base_raw[f"baseline_{i}"]
                     for i in range(1, int(base_raw["count"]) + 1)]
        timings = {k: float(v)
                   for k, v in sections.get("timing_seconds", {}).items()}
        config = {name[len("config."):]: dict(pairs)
                  for name, pairs in sections.items()
                  if name.startswith("config.")}
        seed = head.get("seed")
        return cls(command=head.get("command", ""),
                   code_version=head.get("code_version", ""),
                   status=head.get("status", "ok"),
                   seed=None if seed is None else int(seed),
                   grid=grid, config=config, guards=guards,
                   baselines=baselines, timings=timings)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls.from_text(fh.read())


# -- CSV helpers --------------------------------------------------------

def write_csv(path, names: Sequence[str], columns: Sequence) -> None:
    """Plain CSV with one header row; names carry units in brackets.

    Values go out at full float precision so downstream plots regenerate
    bit-identically from the file.
    """
    cols = [np.asarray(c, dtype=float) for c in columns]
    if len(cols) != len(names):
        raise ValueError("one name per column required")
    length = max((c.size for c in cols), default=0)
    for c in cols:
        if c.ndim != 1 or c.size != length:
            raise ValueError("columns must be 1-d and equally long")
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(length):
            fh.write(",".join("%.17g" % c[i] for c in cols) + "\n")


def read_csv(path):
    """Header names (units stripped) and the data columns as a dict."""
    with open(path) as fh:
        header = fh.readline().strip()
    names = [part.split("[")[0].strip() for part in header.split(",")]
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(names)}


def write_scale_csv(path, scale) -> None:
    """Scale-function dump in the format scale_from_csv reads: the kind
    on a leading comment line, then t, value rows."""
    bp = np.asarray(scale.breakpoints, dtype=float)
    vals = np.asarray(scale.values, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"# {scale.kind}\n")
        fh.write("# t [time], N [frequency scale]\n")
        for t, v in zip(bp, vals):
            fh.write("%.17g,%.17g\n" % (t, v))
