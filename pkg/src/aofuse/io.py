"""On-disk formats: 16-bit PPM, PFM, ASCII PLY, JSON manifests, binary
field checkpoints, and the CSV reports. Byte layouts are documented in
FORMAT.md; writers and readers here are the single source of truth.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import BadDatasetError
from .sensors import CameraModel, SonarModel

CHECKPOINT_MAGIC = b"AOFC"
CHECKPOINT_VERSION = 1


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# images
# ---------------------------------------------------------------------------

def write_ppm16(path, rgb: np.ndarray) -> None:
    """Binary PPM (P6), maxval 65535, big-endian samples; rgb in [0, 1]."""
    rgb = np.asarray(rgb, dtype=float)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected (H, W, 3)")
    h, w = rgb.shape[:2]
    data = np.round(np.clip(rgb, 0.0, 1.0) * 65535.0).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n65535\n".encode("ascii"))
        f.write(data.tobytes())


def read_ppm16(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P6":
            raise ValueError(f"not a binary PPM: {magic!r}")
        fields = []
        while len(fields) < 3:
            line = f.readline()
            if not line:
                raise ValueError("truncated PPM header")
            if line.startswith(b"#"):
                continue
            fields += line.split()
        w, h, maxval = (int(v) for v in fields)
        if maxval != 65535:
            raise ValueError("only 16-bit PPM supported")
        data = np.frombuffer(f.read(w * h * 6), dtype=">u2").reshape(h, w, 3)
    return data.astype(np.float64) / 65535.0


def write_pfm(path, img: np.ndarray) -> None:
    """Grayscale PFM, float32, scale -1.0 (little-endian), rows bottom-up."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError("expected a 2-d array")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.flipud(img).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"Pf":
            raise ValueError("not a grayscale PFM")
        w, h = (int(v) for v in f.readline().split())
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(w * h * 4), dtype=dtype).reshape(h, w)
    return np.flipud(data).astype(np.float64)


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------

def write_ply(path, vertices: np.ndarray, faces: np.ndarray) -> None:
    """ASCII PLY triangle mesh."""
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=int)
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(vertices)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write(f"element face {len(faces)}\n")
        f.write("property list uchar int vertex_indices\nend_header\n")
        for v in vertices:
            f.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for tri in faces:
            f.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")


def read_ply(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as f:
        if f.readline().strip() != "ply":
            raise ValueError("not a PLY file")
        n_v = n_f = 0
        for line in f:
            tok = line.split()
            if tok[:2] == ["element", "vertex"]:
                n_v = int(tok[2])
            elif tok[:2] == ["element", "face"]:
                n_f = int(tok[2])
            elif tok[0] == "end_header":
                break
        verts = np.array([[float(x) for x in f.readline().split()[:3]] for _ in range(n_v)])
        faces = np.array([[int(x) for x in f.readline().split()[1:4]] for _ in range(n_f)])
    return verts, faces


# ---------------------------------------------------------------------------
# field checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, field) -> None:
    """Versioned binary blob: header, then sdf/acoustic/optical grids as
    little-endian float64 in C order."""
    nx, ny, nz = field.resolution
    header = struct.pack(
        "<4sI3I6dd",
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        nx, ny, nz,
        *field.bbox_min.tolist(),
        *field.bbox_max.tolist(),
        field.log_q,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(field.sdf.astype("<f8").tobytes())
        f.write(field.acoustic.astype("<f8").tobytes())
        f.write(field.optical.astype("<f8").tobytes())


def load_checkpoint(path):
    from .field import FieldModel

    head_size = struct.calcsize("<4sI3I6dd")
    with open(path, "rb") as f:
        head = f.read(head_size)
        magic, version, nx, ny, nz, *rest = struct.unpack("<4sI3I6dd", head)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError("not an aofuse checkpoint")
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        bbox_min = np.array(rest[0:3])
        bbox_max = np.array(rest[3:6])
        log_q = rest[6]
        n = nx * ny * nz
        sdf = np.frombuffer(f.read(8 * n), dtype="<f8").reshape(nx, ny, nz)
        acoustic = np.frombuffer(f.read(8 * n), dtype="<f8").reshape(nx, ny, nz)
        optical = np.frombuffer(f.read(8 * 3 * n), dtype="<f8").reshape(nx, ny, nz, 3)
    return FieldModel(bbox_min, bbox_max, sdf.copy(), acoustic.copy(), optical.copy(), log_q)


# ---------------------------------------------------------------------------
# manifests and sensor model (de)serialization
# ---------------------------------------------------------------------------

def write_json(path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)


def camera_to_json(cam: CameraModel) -> dict:
    return {
        "f": cam.f,
        "width": cam.width,
        "height": cam.height,
        "pixel_pitch": cam.pixel_pitch,
        "principal": list(cam.principal),
    }


def camera_from_json(d: dict) -> CameraModel:
    return CameraModel(
        f=d["f"], width=d["width"], height=d["height"],
        pixel_pitch=d["pixel_pitch"],
        principal=tuple(d["principal"]) if d.get("principal") else None,
    )


def sonar_to_json(son: SonarModel) -> dict:
    return {
        "r_min": son.r_min, "r_max": son.r_max, "n_range_bins": son.n_range_bins,
        "azimuth_fov": son.azimuth_fov, "n_azimuth_bins": son.n_azimuth_bins,
        "phi_min": son.phi_min, "phi_max": son.phi_max, "e_e": son.e_e,
    }


def sonar_from_json(d: dict) -> SonarModel:
    return SonarModel(**d)


def load_dataset(dataset_dir):
    """Read a dataset directory back into memory.

    Returns a dict with camera/sonar models, per-pose Pose objects, and
    image arrays stacked along axis 0.
    """
    from .sensors import Pose

    root = Path(dataset_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise BadDatasetError(f"no manifest.json under {root}")
    m = read_json(manifest_path)
    if m.get("format") != "aofuse-dataset":
        raise BadDatasetError("manifest is not an aofuse dataset")
    cam = camera_from_json(m["camera"])
    son = sonar_from_json(m["sonar"])
    cam_poses, son_poses, cam_imgs, son_imgs = [], [], [], []
    for pose_rec, file_rec in zip(m["poses"], m["files"]):
        cam_poses.append(Pose.from_matrix(np.array(pose_rec["camera"]).reshape(4, 4)))
        son_poses.append(Pose.from_matrix(np.array(pose_rec["sonar"]).reshape(4, 4)))
        cam_imgs.append(read_ppm16(root / file_rec["camera"]))
        son_imgs.append(read_pfm(root / file_rec["sonar"]))
    return {
        "camera": cam,
        "sonar": son,
        "camera_poses": cam_poses,
        "sonar_poses": son_poses,
        "camera_images": np.stack(cam_imgs),
        "sonar_images": np.stack(son_imgs),
        "manifest": m,
    }


# ---------------------------------------------------------------------------
# CSV reports
# ---------------------------------------------------------------------------

def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        return header, [row for row in r]
