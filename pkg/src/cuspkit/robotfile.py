"""Robot description files: flat ``key = value`` text.

The first non-comment line names the kind (``kind = serial3r``); the
remaining lines set that kind's parameters. Lines starting with ``#`` and
blank lines are ignored. Angles are radians; a key with the ``_deg`` suffix
gives the same parameter in degrees. Unknown keys are rejected.

Kinds and keys (defaults in parentheses, none means required):

    serial3r        d2 d3 d4, r2 (0) r3 (0), alpha2 (-pi/2) alpha3 (pi/2),
                    theta2_min theta2_max theta3_min theta3_max (unlimited)
    rprpr           l (5) rho_min (2) rho_max (7)
    rpr3            c2 (15.9) c3 (0) d3 (10) l1 (16.5) l2 (17) l3 (20.8)
                    rho_min (10) rho_max (32)
    spherical2upsu  h (0) r (1) f (1)
    ppps3           no parameters
    rprrr2          r1 (30) bA (10) hA (5) bB (1) hB (2)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi, radians
from pathlib import Path
from typing import Union

from .atlas import JointLimits, NO_LIMITS
from .parallel import (
    Model2RPRRR,
    Model3PPPSOrientation,
    Model3RPR,
    ModelRPRPR,
    ModelSpherical2UPSU,
)
from .serial3r import Geometry3R

ANGLES = {"alpha2", "alpha3", "theta2_min", "theta2_max", "theta3_min", "theta3_max"}

SCHEMA: dict[str, dict[str, object]] = {
    "serial3r": {"d2": None, "d3": None, "d4": None, "r2": 0.0, "r3": 0.0,
                 "alpha2": -pi / 2, "alpha3": pi / 2,
                 "theta2_min": None, "theta2_max": None, "theta3_min": None, "theta3_max": None},
    "rprpr": {"l": 5.0, "rho_min": 2.0, "rho_max": 7.0},
    "rpr3": {"c2": 15.9, "c3": 0.0, "d3": 10.0, "l1": 16.5, "l2": 17.0, "l3": 20.8,
             "rho_min": 10.0, "rho_max": 32.0},
    "spherical2upsu": {"h": 0.0, "r": 1.0, "f": 1.0},
    "ppps3": {},
    "rprrr2": {"r1": 30.0, "bA": 10.0, "hA": 5.0, "bB": 1.0, "hB": 2.0},
}

OPTIONAL = {"theta2_min", "theta2_max", "theta3_min", "theta3_max"}


class RobotFileError(ValueError):
    pass


@dataclass
class RobotDescription:
    kind: str
    params: dict[str, float] = field(default_factory=dict)

    @property
    def serial(self) -> bool:
        return self.kind == "serial3r"

    def geometry(self) -> Geometry3R:
        if not self.serial:
            raise RobotFileError(f"{self.kind} is not a serial robot")
        p = self.params
        return Geometry3R(p["d2"], p["d3"], p["d4"], p["r2"], p["r3"], p["alpha2"], p["alpha3"])

    def limits(self) -> JointLimits:
        if not self.serial:
            return NO_LIMITS
        p = self.params
        pairs = []
        for name in ("theta2", "theta3"):
            lo, hi = p.get(f"{name}_min"), p.get(f"{name}_max")
            if (lo is None) != (hi is None):
                raise RobotFileError(f"{name}_min and {name}_max must be given together")
            pairs.append(None if lo is None else (lo, hi))
        return JointLimits(*pairs)

    def model(self):
        p = self.params
        if self.kind == "rprpr":
            return ModelRPRPR(p["l"], p["rho_min"], p["rho_max"])
        if self.kind == "rpr3":
            return Model3RPR.from_sides(p["c2"], p["c3"], p["d3"], p["l1"], p["l2"], p["l3"],
                                        p["rho_min"], p["rho_max"])
        if self.kind == "spherical2upsu":
            return ModelSpherical2UPSU(p["h"], p["r"], p["f"])
        if self.kind == "ppps3":
            return Model3PPPSOrientation()
        if self.kind == "rprrr2":
            return Model2RPRRR(p["r1"], p["bA"], p["hA"], p["bB"], p["hB"])
        raise RobotFileError(f"{self.kind} is not a parallel robot")


def parse_robot(text: str, source: str = "<string>") -> RobotDescription:
    kind = None
    values: dict[str, float] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RobotFileError(f"{source}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if kind is None:
            if key != "kind":
                raise RobotFileError(f"{source}:{n}: first entry must be kind")
            if val not in SCHEMA:
                raise RobotFileError(f"{source}:{n}: unknown kind {val!r}")
            kind = val
            continue
        if key == "kind":
            raise RobotFileError(f"{source}:{n}: kind given twice")
        name, deg = (key[:-4], True) if key.endswith("_deg") else (key, False)
        if name not in SCHEMA[kind] or (deg and name not in ANGLES):
            raise RobotFileError(f"{source}:{n}: unknown key {key!r} for {kind}")
        if name in values:
            raise RobotFileError(f"{source}:{n}: {name} given twice")
        try:
            v = float(val)
        except ValueError:
            raise RobotFileError(f"{source}:{n}: {key} is not a number: {val!r}") from None
        values[name] = radians(v) if deg else v
    if kind is None:
        raise RobotFileError(f"{source}: no kind given")
    params = {}
    for name, default in SCHEMA[kind].items():
        if name in values:
            params[name] = values[name]
        elif default is not None:
            params[name] = default
        elif name not in OPTIONAL:
            raise RobotFileError(f"{source}: missing required key {name!r}")
    desc = RobotDescription(kind, params)
    try:
        desc.geometry() if desc.serial else desc.model()
        desc.limits()
    except RobotFileError:
        raise
    except ValueError as e:
        raise RobotFileError(f"{source}: {e}") from None
    return desc


def load_robot(path: Union[str, Path]) -> RobotDescription:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise RobotFileError(f"cannot read {path}: {e.strerror}") from None
    return parse_robot(text, str(path))
