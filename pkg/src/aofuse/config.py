"""Run configuration: JSON in, fully-defaulted dataclasses out.

Validation is exhaustive: every violation in the document is reported with
its JSON-pointer path, not just the first one. An empty object is a valid
config and yields the default desk-scale experiment (sphere+box scene at
1.75 m standoff, 0.24 m baseline, the simulation training hyperparameters
E_t=2000, E_e=5000, alpha_end=0.3, lambda_eik=0.1, lambda_reg=0).
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import BadConfigError
from .scene import AnalyticScene, Material, Primitive, rotation_from_ypr
from .sensors import CameraModel, SonarModel
from .simulate import SimulationJob, make_trajectory
from .train import LossConfig, ScheduleConfig, TrainOptions

DEG = math.pi / 180.0

DEFAULTS: dict = {
    "seed": 0,
    "scene": {
        "primitives": [
            {"shape": "sphere", "center": [-0.06, -0.05, 1.75], "radius": 0.28},
            {"shape": "box", "center": [0.32, 0.08, 1.72], "size": [0.36, 0.44, 0.30]},
        ],
        "material": {
            "c_dl": 1.0,
            "c_sl": 0.0,
            "sigma_alpha": 0.5,
            "optical_albedo": [0.7, 0.7, 0.7],
        },
    },
    "camera": {
        "f": 0.1,
        "width": 128,
        "height": 96,
        "pixel_pitch": 5.5e-4,
        "principal": None,
    },
    "sonar": {
        "r_min": 1.2,
        "r_max": 2.2,
        "n_range_bins": 64,
        "azimuth_fov": 45.0 * DEG,
        "n_azimuth_bins": 64,
        "phi_min": -6.0 * DEG,
        "phi_max": 6.0 * DEG,
        "e_e": 5.0,
    },
    "trajectory": {"baseline": 0.24, "n_poses": 24, "standoff": 1.75},
    "noise": {"camera_std": 0.0, "sonar_std": 0.0},
    "simulation": {"n_phi": 256},
    "loss": {
        "lambda_eik": 0.1,
        "lambda_reg": 0.0,
        "schedule": {
            "mode": "step",
            "alpha_start": 1.0,
            "alpha_end": 0.3,
            "e_t": 2000,
            "e_e": 5000,
        },
    },
    "optimizer": {"lr": 1e-2, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
    "sampling": {
        "camera_rays": 512,
        "sonar_beams": 8,
        "camera_samples": 64,
        "sonar_elevations": 24,
        "sonar_radial": 96,
        "eikonal_samples": 1024,
    },
    "field": {
        "resolution": 64,
        "bbox_center": None,
        "bbox_extent": 1.4,
        "q_init": 20.0,
        "sphere_frac": 0.4,
    },
}

_PRIMITIVE_KEYS = {
    "sphere": {"radius"},
    "box": {"size"},
    "torus": {"radii"},
    "capsule": {"half_height", "radius"},
}


@dataclass(frozen=True)
class SchemaViolation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


class ConfigError(BadConfigError):
    """Carries the complete list of schema violations."""

    def __init__(self, violations: list[SchemaViolation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass
class RunConfig:
    """Fully-defaulted, validated configuration document."""

    raw: dict

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def scene(self) -> AnalyticScene:
        s = self.raw["scene"]
        prims = []
        for p in s["primitives"]:
            rot = rotation_from_ypr(*p.get("yaw_pitch_roll", (0.0, 0.0, 0.0)))
            if p["shape"] == "sphere":
                dims = (p["radius"],)
            elif p["shape"] == "box":
                dims = tuple(p["size"])
            elif p["shape"] == "torus":
                dims = tuple(p["radii"])
            else:
                dims = (p["half_height"], p["radius"])
            prims.append(Primitive(p["shape"], tuple(p["center"]), dims, rot))
        m = s["material"]
        return AnalyticScene(
            tuple(prims),
            Material(m["c_dl"], m["c_sl"], m["sigma_alpha"], tuple(m["optical_albedo"])),
        )

    def camera(self) -> CameraModel:
        c = self.raw["camera"]
        principal = tuple(c["principal"]) if c["principal"] is not None else None
        return CameraModel(c["f"], c["width"], c["height"], c["pixel_pitch"], principal)

    def sonar(self) -> SonarModel:
        return SonarModel(**self.raw["sonar"])

    def simulation_job(self) -> SimulationJob:
        t = self.raw["trajectory"]
        return SimulationJob(
            scene=self.scene(),
            camera=self.camera(),
            sonar=self.sonar(),
            trajectory=make_trajectory(t["baseline"], t["n_poses"], t["standoff"]),
            camera_noise_std=self.raw["noise"]["camera_std"],
            sonar_noise_std=self.raw["noise"]["sonar_std"],
            seed=self.seed,
            n_phi=self.raw["simulation"]["n_phi"],
            scene_spec=copy.deepcopy(self.raw["scene"]),
        )

    def loss_config(self) -> LossConfig:
        lo = self.raw["loss"]
        sc = lo["schedule"]
        return LossConfig(
            lambda_eik=lo["lambda_eik"],
            lambda_reg=lo["lambda_reg"],
            schedule=ScheduleConfig(
                mode=sc["mode"], alpha_start=sc["alpha_start"], alpha_end=sc["alpha_end"],
                e_t=sc["e_t"], e_e=sc["e_e"],
            ),
        )

    def train_options(self) -> TrainOptions:
        o = self.raw["optimizer"]
        s = self.raw["sampling"]
        f = self.raw["field"]
        bbox_min = bbox_max = None
        if f["bbox_center"] is not None:
            c = np.asarray(f["bbox_center"], dtype=float)
            half = f["bbox_extent"] / 2.0
            bbox_min, bbox_max = c - half, c + half
        return TrainOptions(
            loss=self.loss_config(),
            lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"],
            camera_rays=s["camera_rays"], sonar_beams=s["sonar_beams"],
            camera_samples=s["camera_samples"], sonar_elevations=s["sonar_elevations"],
            sonar_radial=s["sonar_radial"], eikonal_samples=s["eikonal_samples"],
            resolution=f["resolution"], bbox_min=bbox_min, bbox_max=bbox_max,
            bbox_extent=f["bbox_extent"], q_init=f["q_init"], sphere_frac=f["sphere_frac"],
        )


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

class _Checker:
    def __init__(self):
        self.violations: list[SchemaViolation] = []

    def add(self, path: str, message: str) -> None:
        self.violations.append(SchemaViolation(path, message))

    def number(self, doc, path, key, lo=None, hi=None, integer=False,
               lo_strict=False) -> None:
        v = doc[key]
        p = f"{path}/{key}"
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.add(p, "expected a number")
            return
        if integer and not isinstance(v, int):
            self.add(p, "expected an integer")
            return
        if lo is not None and (v <= lo if lo_strict else v < lo):
            self.add(p, f"must be {'>' if lo_strict else '>='} {lo}")
        if hi is not None and v > hi:
            self.add(p, f"must be <= {hi}")

    def vector(self, doc, path, key, size) -> bool:
        v = doc[key]
        p = f"{path}/{key}"
        if not isinstance(v, (list, tuple)) or len(v) != size or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) for x in v
        ):
            self.add(p, f"expected an array of {size} numbers")
            return False
        return True

    def keys(self, doc, path, allowed) -> None:
        for k in doc:
            if k not in allowed:
                self.add(f"{path}/{k}", "unknown key")


def _merge_defaults(defaults, user, path, chk: _Checker):
    """Deep-merge user values over defaults, flagging unknown keys."""
    if not isinstance(user, dict):
        chk.add(path or "/", "expected an object")
        return copy.deepcopy(defaults)
    out = copy.deepcopy(defaults)
    for k, v in user.items():
        if k not in defaults:
            chk.add(f"{path}/{k}", "unknown key")
        elif isinstance(defaults[k], dict):
            out[k] = _merge_defaults(defaults[k], v, f"{path}/{k}", chk)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _validate_primitive(p, path, chk: _Checker) -> None:
    if not isinstance(p, dict):
        chk.add(path, "expected an object")
        return
    shape = p.get("shape")
    if shape not in _PRIMITIVE_KEYS:
        chk.add(f"{path}/shape", f"expected one of {sorted(_PRIMITIVE_KEYS)}")
        return
    required = {"shape", "center"} | _PRIMITIVE_KEYS[shape]
    chk.keys(p, path, required | {"yaw_pitch_roll"})
    for k in required - {"shape"}:
        if k not in p:
            chk.add(f"{path}/{k}", "missing required key")
    if "center" in p:
        chk.vector(p, path, "center", 3)
    if "yaw_pitch_roll" in p:
        chk.vector(p, path, "yaw_pitch_roll", 3)
    for k in ("radius", "half_height"):
        if k in p and k in required:
            chk.number(p, path, k, lo=0, lo_strict=True)
    if shape == "box" and "size" in p and chk.vector(p, path, "size", 3):
        if any(s <= 0 for s in p["size"]):
            chk.add(f"{path}/size", "sides must be positive")
    if shape == "torus" and "radii" in p and chk.vector(p, path, "radii", 2):
        major, minor = p["radii"]
        if not 0 < minor < major:
            chk.add(f"{path}/radii", "need 0 < minor < major")


def validate_config(text: str | dict) -> RunConfig:
    """Parse and validate a config document.

    Returns the fully-defaulted RunConfig, or raises ConfigError carrying
    every violation found (JSON-pointer paths).
    """
    chk = _Checker()
    if isinstance(text, str):
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([SchemaViolation("/", f"invalid JSON: {exc}")]) from exc
    else:
        user = text
    doc = _merge_defaults(DEFAULTS, user, "", chk)

    chk.number(doc, "", "seed", lo=0, integer=True)

    sc = doc["scene"]
    prims = sc["primitives"]
    if not isinstance(prims, list) or not prims:
        chk.add("/scene/primitives", "expected a non-empty array")
    else:
        for i, p in enumerate(prims):
            _validate_primitive(p, f"/scene/primitives/{i}", chk)
    mat = sc["material"]
    if isinstance(mat, dict):
        chk.number(mat, "/scene/material", "c_dl", lo=0)
        chk.number(mat, "/scene/material", "c_sl", lo=0)
        chk.number(mat, "/scene/material", "sigma_alpha", lo=0, lo_strict=True)
        if chk.vector(mat, "/scene/material", "optical_albedo", 3):
            if any(not 0 <= a <= 1 for a in mat["optical_albedo"]):
                chk.add("/scene/material/optical_albedo", "channels must lie in [0, 1]")

    cam = doc["camera"]
    chk.number(cam, "/camera", "f", lo=0, lo_strict=True)
    chk.number(cam, "/camera", "pixel_pitch", lo=0, lo_strict=True)
    chk.number(cam, "/camera", "width", lo=1, integer=True)
    chk.number(cam, "/camera", "height", lo=1, integer=True)
    if cam["principal"] is not None:
        chk.vector(cam, "/camera", "principal", 2)

    son = doc["sonar"]
    chk.number(son, "/sonar", "r_min", lo=0, lo_strict=True)
    chk.number(son, "/sonar", "r_max", lo=0, lo_strict=True)
    if isinstance(son["r_min"], (int, float)) and isinstance(son["r_max"], (int, float)):
        if not isinstance(son["r_min"], bool) and not isinstance(son["r_max"], bool):
            if son["r_max"] <= son["r_min"]:
                chk.add("/sonar/r_max", "must exceed r_min")
    chk.number(son, "/sonar", "n_range_bins", lo=1, integer=True)
    chk.number(son, "/sonar", "n_azimuth_bins", lo=1, integer=True)
    chk.number(son, "/sonar", "azimuth_fov", lo=0, lo_strict=True)
    chk.number(son, "/sonar", "phi_min")
    chk.number(son, "/sonar", "phi_max")
    if all(isinstance(son[k], (int, float)) and not isinstance(son[k], bool)
           for k in ("phi_min", "phi_max")):
        if son["phi_max"] <= son["phi_min"]:
            chk.add("/sonar/phi_max", "must exceed phi_min")
    chk.number(son, "/sonar", "e_e", lo=0, lo_strict=True)

    tr = doc["trajectory"]
    chk.number(tr, "/trajectory", "baseline", lo=0, lo_strict=True)
    chk.number(tr, "/trajectory", "n_poses", lo=2, integer=True)
    chk.number(tr, "/trajectory", "standoff", lo=0, lo_strict=True)

    noz = doc["noise"]
    chk.number(noz, "/noise", "camera_std", lo=0)
    chk.number(noz, "/noise", "sonar_std", lo=0)
    chk.number(doc["simulation"], "/simulation", "n_phi", lo=1, integer=True)

    lo_ = doc["loss"]
    chk.number(lo_, "/loss", "lambda_eik", lo=0)
    chk.number(lo_, "/loss", "lambda_reg", lo=0)
    sch = lo_["schedule"]
    if sch["mode"] not in ("constant", "linear", "step"):
        chk.add("/loss/schedule/mode", "expected constant, linear, or step")
    chk.number(sch, "/loss/schedule", "alpha_start", lo=0, hi=1)
    chk.number(sch, "/loss/schedule", "alpha_end", lo=0, hi=1)
    chk.number(sch, "/loss/schedule", "e_t", lo=0, integer=True)
    chk.number(sch, "/loss/schedule", "e_e", lo=1, integer=True)
    if isinstance(sch["e_t"], int) and isinstance(sch["e_e"], int) and sch["e_t"] > sch["e_e"]:
        chk.add("/loss/schedule/e_t", "must be <= e_e")

    op = doc["optimizer"]
    chk.number(op, "/optimizer", "lr", lo=0, lo_strict=True)
    chk.number(op, "/optimizer", "beta1", lo=0, hi=1)
    chk.number(op, "/optimizer", "beta2", lo=0, hi=1)
    chk.number(op, "/optimizer", "eps", lo=0, lo_strict=True)

    sa = doc["sampling"]
    for k, lo_min in (("camera_rays", 1), ("sonar_beams", 1), ("camera_samples", 2),
                      ("sonar_elevations", 1), ("sonar_radial", 1), ("eikonal_samples", 0)):
        chk.number(sa, "/sampling", k, lo=lo_min, integer=True)

    fl = doc["field"]
    chk.number(fl, "/field", "resolution", lo=2, integer=True)
    chk.number(fl, "/field", "bbox_extent", lo=0, lo_strict=True)
    chk.number(fl, "/field", "q_init", lo=0, lo_strict=True)
    chk.number(fl, "/field", "sphere_frac", lo=0, lo_strict=True)
    if fl["bbox_center"] is not None:
        chk.vector(fl, "/field", "bbox_center", 3)

    if chk.violations:
        raise ConfigError(chk.violations)
    return RunConfig(doc)


def load_config(path) -> RunConfig:
    try:
        with open(path) as f:
            text = f.read()
    except FileNotFoundError as exc:
        raise ConfigError([SchemaViolation("/", f"config file not found: {path}")]) from exc
    return validate_config(text)
