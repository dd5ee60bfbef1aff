"""Bit-exact text checkpoints for network parameter pairs.

Layout: a version header, the architecture preset name, then each
network as a block of layer shapes followed by row-major weights and
biases. Floats are written as C99 hex literals, so save -> load is
exact at the bit level on any platform.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .kernel import MLPParams
from .networks import Discriminator, GeneratorPair

_MAGIC = "gcse-checkpoint v1"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    generator: GeneratorPair
    discriminator: Discriminator
    preset: str


def _hex(v: float) -> str:
    return float(v).hex()


def _emit_net(lines: list[str], net: MLPParams) -> None:
    lines.append(f"layers {net.n_layers}")
    for w, b in zip(net.weights, net.biases):
        lines.append(f"weight {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(_hex(v) for v in row))
        lines.append(f"bias {b.shape[0]}")
        lines.append(" ".join(_hex(v) for v in b))


def save_checkpoint(path: str, gen: GeneratorPair, disc: Discriminator, preset: str) -> None:
    """Write both networks atomically (temp file + rename)."""
    lines = [_MAGIC, f"preset {preset}"]
    clamp = "none" if gen.clamp is None else _hex(gen.clamp)
    lines.append(
        f"generator noise_dim={gen.noise_dim} covariate_dim={gen.covariate_dim} "
        f"alpha={_hex(gen.net.alpha)} clamp={clamp}"
    )
    _emit_net(lines, gen.net)
    lines.append(
        f"discriminator covariate_dim={disc.covariate_dim} alpha={_hex(disc.net.alpha)}"
    )
    _emit_net(lines, disc.net)
    lines.append("end")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


class _LineReader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise CheckpointError("unexpected end of checkpoint")
        line = self.lines[self.pos]
        self.pos += 1
        return line


def _parse_fields(line: str, expect: str) -> dict[str, str]:
    parts = line.split()
    if not parts or parts[0] != expect:
        raise CheckpointError(f"expected {expect!r} section, got {line!r}")
    return dict(p.split("=", 1) for p in parts[1:])


def _read_net(reader: _LineReader, alpha: float, output: str) -> MLPParams:
    head = reader.next().split()
    if head[0] != "layers":
        raise CheckpointError(f"expected layer count, got {head!r}")
    n_layers = int(head[1])
    weights, biases = [], []
    for _ in range(n_layers):
        wline = reader.next().split()
        if wline[0] != "weight":
            raise CheckpointError("expected weight block")
        rows, cols = int(wline[1]), int(wline[2])
        w = np.empty((rows, cols))
        for i in range(rows):
            vals = reader.next().split()
            if len(vals) != cols:
                raise CheckpointError(f"weight row has {len(vals)} values, wanted {cols}")
            w[i] = [float.fromhex(v) for v in vals]
        bline = reader.next().split()
        if bline[0] != "bias" or int(bline[1]) != rows:
            raise CheckpointError("expected matching bias block")
        b = np.array([float.fromhex(v) for v in reader.next().split()])
        if b.shape != (rows,):
            raise CheckpointError("bias length mismatch")
        weights.append(w)
        biases.append(b)
    return MLPParams(tuple(weights), tuple(biases), alpha=alpha, output=output)


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    reader = _LineReader(text)
    if reader.next() != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    preset_line = reader.next().split(maxsplit=1)
    if preset_line[0] != "preset" or len(preset_line) != 2:
        raise CheckpointError("missing preset line")
    preset = preset_line[1]
    gfields = _parse_fields(reader.next(), "generator")
    clamp = None if gfields["clamp"] == "none" else float.fromhex(gfields["clamp"])
    gnet = _read_net(reader, float.fromhex(gfields["alpha"]), "heads")
    gen = GeneratorPair(
        gnet, int(gfields["noise_dim"]), int(gfields["covariate_dim"]), clamp
    )
    dfields = _parse_fields(reader.next(), "discriminator")
    dnet = _read_net(reader, float.fromhex(dfields["alpha"]), "linear")
    disc = Discriminator(dnet, int(dfields["covariate_dim"]))
    if reader.next() != "end":
        raise CheckpointError("missing end marker")
    return Checkpoint(gen, disc, preset)
