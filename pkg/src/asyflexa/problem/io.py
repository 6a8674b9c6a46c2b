"""JSON problem files."""

import json

import numpy as np

from ..exceptions import StructuralError
from .constraints import constraint_from_dict
from .partition import BlockPartition
from .regularizers import reg_from_dict
from .sets import set_from_dict
from .smooth import smooth_from_dict
from .spec import ProblemSpec


def problem_to_dict(spec):
    d = {
        "name": spec.name,
        "n": spec.n,
        "block_sizes": list(spec.partition.sizes),
        "smooth": spec.smooth.to_dict(),
        "regs": [g.to_dict() for g in spec.regs],
        "sets": [s.to_dict() for s in spec.sets],
        "constraints": None if spec.constraints is None else [[c.to_dict() for c in cs] for cs in spec.constraints],
        "x0": spec.x0.tolist(),
    }
    if spec.meta:
        d["meta"] = spec.meta
    return d


def problem_from_dict(d):
    part = BlockPartition(d["block_sizes"])
    if part.n != d.get("n", part.n):
        raise StructuralError("block sizes do not add up to n")
    cons = d.get("constraints")
    if cons is not None:
        cons = [[constraint_from_dict(c) for c in cs] for cs in cons]
    return ProblemSpec(
        partition=part,
        smooth=smooth_from_dict(d["smooth"], part),
        regs=[reg_from_dict(g) for g in d.get("regs", [None] * part.N)],
        sets=[set_from_dict(s) for s in d.get("sets", [None] * part.N)],
        constraints=cons,
        x0=np.asarray(d["x0"], dtype=float) if d.get("x0") is not None else None,
        name=d.get("name", "problem"),
        meta=d.get("meta", {}),
    )


def save_problem(spec, path):
    # dumps, unlike dump, goes through the C encoder
    text = json.dumps(problem_to_dict(spec))
    with open(path, "w") as fh:
        fh.write(text)


def load_problem(path):
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
