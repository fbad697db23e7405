"""On-disk mode sets: a directory holding the mesh, a JSON index and the vectors.

Layout::

    mesh.txt      mesh in the text format of ``mesh.write_mesh``
    modes.json    one record per mode (lambdasq, provenance, metadata)
    modes.npy     interior-dof vectors, one column per mode
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .eigensolve import Eigenpair
from .mesh import read_mesh, write_mesh
from .operators import OperatorPair, assemble
from .quasimode import ModeField


def _record(mode: ModeField) -> dict:
    return {"lambdasq": mode.lambdasq, "lambda": mode.lam, "f_norm": mode.f_norm,
            "provenance": mode.provenance, "meta": mode.meta}


def save_modes(path, opair: OperatorPair, modes: list[ModeField]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_mesh(opair.mesh, path / "mesh.txt")
    vecs = np.column_stack([m.vector for m in modes]) if modes else np.zeros((opair.n, 0))
    np.save(path / "modes.npy", vecs)
    (path / "modes.json").write_text(json.dumps([_record(m) for m in modes], indent=2, default=_plain) + "\n")
    return path


def load_modes(path) -> tuple[OperatorPair, list[ModeField]]:
    path = Path(path)
    opair = assemble(read_mesh(path / "mesh.txt"))
    vecs = np.load(path / "modes.npy")
    records = json.loads((path / "modes.json").read_text())
    if vecs.shape != (opair.n, len(records)):
        raise ValueError(f"{path}: vector array {vecs.shape} does not match mesh/index ({opair.n}, {len(records)})")
    modes = []
    for j, rec in enumerate(records):
        modes.append(ModeField.from_vector(opair, vecs[:, j], rec["lambdasq"], rec["provenance"],
                                           normalize=False, **rec.get("meta", {})))
    return opair, modes


def eigenpair_meta(p: Eigenpair) -> dict:
    return {"residual_bound": p.residual_bound, "parity": list(p.parity) if p.parity else None,
            "window": [p.window.center, p.window.halfwidth] if p.window else None}


def _plain(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")
