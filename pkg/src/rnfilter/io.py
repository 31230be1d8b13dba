"""PGM images, flat key=value configs, and trajectory exports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dynamics import SolverConfig, Trajectory
from .kernels import KernelSpec, default_epsilon


class PgmError(ValueError):
    """Base class for PGM parsing failures."""


class PgmHeaderError(PgmError):
    """Malformed header (dimensions, maxval, or stray bytes)."""


class PgmTruncatedError(PgmError):
    """Payload shorter than the header promises."""


class PgmUnsupportedError(PgmError):
    """Magic number other than P2/P5."""


class ConfigError(ValueError):
    """Unparseable or unknown configuration entry."""


# -- PGM -----------------------------------------------------------------

def _read_header_tokens(data: bytes, count: int, start: int) -> tuple[list[bytes], int]:
    """Collect whitespace-separated header tokens, skipping # comments."""
    tokens: list[bytes] = []
    i = start
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i < len(data) and data[i:i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise PgmTruncatedError("header ended prematurely")
        tokens.append(data[i:j])
        i = j
    return tokens, i


def read_pgm(path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) PGM into a float array.

    Integer sample values are preserved exactly; maxval up to 65535 is
    supported, with two-byte big-endian samples in binary files.
    """
    data = Path(path).read_bytes()
    if len(data) < 2:
        raise PgmTruncatedError("file too short for a PGM header")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PgmUnsupportedError(f"unsupported magic {magic!r}")
    try:
        tokens, pos = _read_header_tokens(data, 3, 2)
    except PgmTruncatedError:
        raise
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PgmHeaderError(f"non-numeric header fields {tokens!r}") from None
    if width < 1 or height < 1:
        raise PgmHeaderError(f"bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise PgmHeaderError(f"maxval {maxval} out of range")

    n = width * height
    if magic == b"P2":
        body = data[pos:].split()
        if len(body) < n:
            raise PgmTruncatedError(f"expected {n} samples, found {len(body)}")
        try:
            values = np.array([int(t) for t in body[:n]], dtype=float)
        except ValueError:
            raise PgmHeaderError("non-numeric sample in ASCII payload") from None
        return values.reshape(height, width)

    # P5: exactly one whitespace byte separates maxval from the payload
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PgmHeaderError("missing whitespace before binary payload")
    payload = data[pos + 1:]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = n * dtype.itemsize
    if len(payload) < need:
        raise PgmTruncatedError(f"payload holds {len(payload)} bytes, need {need}")
    values = np.frombuffer(payload[:need], dtype=dtype).astype(float)
    return values.reshape(height, width)


def write_pgm(grid, path, maxval: int = 255) -> None:
    """Write a grid as binary P5, rounding and clamping into [0, maxval]."""
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval {maxval} out of range")
    arr = np.asarray(grid, dtype=float)
    if arr.ndim != 2:
        raise ValueError("PGM output requires a 2-d grid")
    clamped = np.clip(np.rint(arr), 0, maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + clamped.astype(dtype).tobytes())


def mask_to_pgm(mask, path) -> None:
    """Write a boolean mask as P5 with values in {0, 255}."""
    write_pgm(np.where(np.asarray(mask, dtype=bool), 255, 0), path, maxval=255)


def mask_from_pgm(path) -> np.ndarray:
    return read_pgm(path) > 0


# -- flat key=value config -----------------------------------------------

CONFIG_KEYS = {
    "kernel.family": str,
    "kernel.h": float,
    "kernel.epsilon": float,
    "solver.lambda": float,
    "solver.tau0": "tau0",
    "solver.tau_max": float,
    "solver.fp_tol": float,
    "solver.fp_max_iter": int,
    "solver.max_steps": int,
    "solver.energy_tol": float,
    "solver.record_every": int,
    "pipeline.h_background": float,
    "pipeline.h_nucleus": float,
    "pipeline.q": int,
    "pipeline.gap_tol": float,
}


def parse_config(text: str) -> dict:
    """Parse flat ``section.key=value`` lines; # starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        kind = CONFIG_KEYS[key]
        try:
            if kind == "tau0":
                out[key] = value if value == "auto" else float(value)
            elif kind is str:
                out[key] = value
            else:
                out[key] = kind(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return out


def read_config(path) -> dict:
    return parse_config(Path(path).read_text())


def solver_from_config(cfg: dict, **overrides) -> SolverConfig:
    """Build a SolverConfig from parsed keys, applying keyword overrides."""
    kwargs = dict(
        lam=cfg.get("solver.lambda", 0.0),
        tau0=cfg.get("solver.tau0", "auto"),
        tau_max=cfg.get("solver.tau_max", 1.0),
        fp_tol=cfg.get("solver.fp_tol", 1e-5),
        fp_max_iter=cfg.get("solver.fp_max_iter", 100),
        max_steps=cfg.get("solver.max_steps", 1000),
        energy_tol=cfg.get("solver.energy_tol", 1e-10),
        record_every=cfg.get("solver.record_every", 1),
    )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    config = SolverConfig(**kwargs)
    config.validate()
    return config


def kernel_from_config(cfg: dict, dynamic_range: float | None = None,
                       h: float | None = None) -> KernelSpec:
    """Build a KernelSpec from parsed keys; ``h`` overrides the config."""
    family = cfg.get("kernel.family", "gaussian")
    h_val = h if h is not None else cfg.get("kernel.h", 25.0)
    if family == "gaussian":
        return KernelSpec.gaussian(h_val)
    if family == "histogram_prescription":
        eps = cfg.get("kernel.epsilon")
        if eps is None:
            eps = default_epsilon(dynamic_range if dynamic_range else 255.0)
        return KernelSpec.histogram(h_val, eps)
    raise ConfigError(f"kernel family {family!r} not constructible from config")


# -- trajectory exports ----------------------------------------------------

def _fmt(x: float) -> str:
    return format(x, ".17g")


def export_trajectory(traj: Trajectory, path, fmt: str = "csv") -> None:
    """Write a trajectory as CSV (step,t,tau,inner_iters,energy,c_1..c_Q)
    or as JSON mirroring the Trajectory fields."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            q = traj.q
            writer.writerow(["step", "t", "tau", "inner_iters", "energy"]
                            + [f"c_{j + 1}" for j in range(q)])
            for i in range(len(traj.steps)):
                writer.writerow(
                    [traj.steps[i], _fmt(traj.times[i]), _fmt(traj.taus[i]),
                     traj.inner_iters[i], _fmt(traj.energies[i])]
                    + [_fmt(v) for v in traj.levels[i]])
    elif fmt == "json":
        doc = {
            "steps": traj.steps,
            "times": traj.times,
            "taus": traj.taus,
            "inner_iters": traj.inner_iters,
            "energies": traj.energies,
            "levels": [list(map(float, c)) for c in traj.levels],
            "termination": traj.termination,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")


def load_trajectory_json(path) -> Trajectory:
    with open(path) as fh:
        doc = json.load(fh)
    traj = Trajectory(
        steps=[int(s) for s in doc["steps"]],
        times=[float(t) for t in doc["times"]],
        taus=[float(t) for t in doc["taus"]],
        inner_iters=[int(i) for i in doc["inner_iters"]],
        energies=[float(e) for e in doc["energies"]],
        levels=[np.array(c, dtype=float) for c in doc["levels"]],
        termination=doc["termination"],
    )
    return traj
