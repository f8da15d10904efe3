"""Checkpoint, CSV and campaign-artifact persistence.

Checkpoint wire format (little-endian): magic b"CTL1", version u32, Nx Ny Nz
u32, t f64, nu f64, remap count u32, then the (u1,u2,u3) coefficient triples
as complex64 in array index order.
"""

import json
import os
import struct

import numpy as np

from .errors import CheckpointError
from .solver3d import NonlinearState

MAGIC = b"CTL1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIddI")


def write_checkpoint(state: NonlinearState, path):
    u = np.ascontiguousarray(np.stack([state.u[0], state.u[1], state.u[2]], axis=-1))
    payload = u.astype(np.complex64)
    nx, ny, nzr = state.u[0].shape
    header = _HEADER.pack(MAGIC, VERSION, nx, ny, nzr, state.t, state.nu, state.remaps)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(payload.tobytes(order="C"))
    os.replace(tmp, path)


def read_checkpoint(path, expect_dims=None):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, nx, ny, nzr, t, nu, remaps = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    if expect_dims is not None and (nx, ny, nzr) != tuple(expect_dims):
        raise CheckpointError(
            f"{path}: dimension mismatch: file has {(nx, ny, nzr)}, expected {tuple(expect_dims)}")
    want = nx * ny * nzr * 3 * 8
    body = raw[_HEADER.size:]
    if len(body) != want:
        raise CheckpointError(
            f"{path}: truncated payload ({len(body)} of {want} bytes)")
    u = np.frombuffer(body, dtype=np.complex64).reshape(nx, ny, nzr, 3)
    u = np.ascontiguousarray(np.moveaxis(u, -1, 0)).astype(np.complex128)
    return NonlinearState(u=u, t=t, nu=nu, remaps=remaps)


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def emit_diagnostics(rows, path, columns):
    """Header plus one row per record; 17 significant digits throughout."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(float(row.get(c, 0.0))) for c in columns) + "\n")
    os.replace(tmp, path)


def read_diagnostics(path):
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    columns = lines[0].split(",")
    rows = [dict(zip(columns, map(float, ln.split(",")))) for ln in lines[1:]]
    return columns, rows


def write_json(obj, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


class CampaignLog:
    """Append-only classification log keyed by (nu, seed, eps); drives resume."""

    def __init__(self, path, header):
        self.path = path
        self.header = header
        self.cache = {}
        if path is not None and os.path.exists(path):
            self._load()
        elif path is not None:
            with open(path, "w", encoding="utf-8") as f:
                f.write(json.dumps({"entry": "header", **header}, sort_keys=True) + "\n")

    def _load(self):
        with open(self.path, encoding="utf-8") as f:
            lines = [json.loads(ln) for ln in f if ln.strip()]
        if not lines or lines[0].get("entry") != "header":
            raise CheckpointError(f"{self.path}: missing campaign header")
        stored = {k: lines[0].get(k) for k in self.header}
        if stored != self.header:
            raise CheckpointError(
                f"{self.path}: campaign log belongs to a different configuration: "
                f"{stored} != {self.header}")
        for entry in lines[1:]:
            if entry.get("entry") == "run":
                self.cache[(entry["nu"], entry["seed"], entry["eps_hex"])] = entry

    def key(self, nu, seed, eps):
        return (nu, seed, float(eps).hex())

    def lookup(self, nu, seed, eps):
        return self.cache.get(self.key(nu, seed, eps))

    def record(self, nu, seed, eps, result):
        entry = {"entry": "run", "nu": nu, "seed": seed, "eps_hex": float(eps).hex(),
                 "eps": eps, **result}
        self.cache[self.key(nu, seed, eps)] = entry
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
        return entry
