"""Versioned JSON checkpoints for optimized and tailgated circuits.

A checkpoint stores the circuit structure (gate kinds and wires), the
optimized angles, and free-form metadata. Tailgated circuits keep the
head/tail split plus the per-gate selection rows, so a downstream Hessian
run can tell which parameters are response-only. Angles survive the JSON
round trip exactly (repr of a binary64 parses back to the same float).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .sim import Circuit, Gate
from .tailgate import TailgatedCircuit

SCHEMA = "vqederiv-checkpoint/1"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    """A loaded checkpoint: the circuit object plus its metadata."""

    obj: object
    metadata: dict = field(default_factory=dict)

    @property
    def circuit(self):
        if isinstance(self.obj, TailgatedCircuit):
            return self.obj.circuit
        return self.obj

    @property
    def tailgated(self):
        return isinstance(self.obj, TailgatedCircuit)


def _gate_row(gate):
    return {"kind": gate.kind, "wires": list(gate.wires),
            "theta": gate.theta}


def _gate_from_row(row):
    try:
        return Gate(row["kind"], tuple(row["wires"]), float(row["theta"]))
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed gate entry {row!r}") from exc


def save_checkpoint(path, obj, metadata=None):
    """Write a Circuit or TailgatedCircuit as schema-versioned JSON."""
    if isinstance(obj, TailgatedCircuit):
        head, tail = obj.head, obj.tail
        selection = (obj.selection_report.rows()
                     if obj.selection_report is not None else None)
        epsilon = (obj.selection_report.epsilon
                   if obj.selection_report is not None else None)
    else:
        head, tail, selection, epsilon = obj, [], None, None
    payload = {
        "schema": SCHEMA,
        "n_qubits": head.n_qubits,
        "occupations": list(head.occupations),
        "head": [_gate_row(g) for g in head.gates],
        "tail": [_gate_row(g) for g in tail],
        "selection": selection,
        "epsilon": epsilon,
        "metadata": metadata or {},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint; returns a Checkpoint wrapping the right type."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != SCHEMA:
        raise CheckpointError(
            f"unsupported checkpoint schema {payload.get('schema')!r}")
    try:
        head = Circuit(int(payload["n_qubits"]),
                       tuple(payload["occupations"]),
                       [_gate_from_row(r) for r in payload["head"]])
    except KeyError as exc:
        raise CheckpointError(f"checkpoint missing key {exc}") from exc
    tail = [_gate_from_row(r) for r in payload.get("tail", [])]
    metadata = payload.get("metadata", {})
    if tail:
        return Checkpoint(TailgatedCircuit(head, tail), metadata)
    return Checkpoint(head, metadata)
