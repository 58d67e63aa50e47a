"""Analytic scenes: spheres, parallelograms, rectangular area emitters, pinhole camera."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

LAMBERT = 0
LAMBERT_PHONG = 1
_KINDS = {"lambert": LAMBERT, "lambert_phong_mixture": LAMBERT_PHONG}


class SceneError(ValueError):
    pass


@dataclass
class Material:
    id: str
    kind: str = "lambert"
    albedo: tuple = (0.5, 0.5, 0.5)
    spec_albedo: tuple = (0.0, 0.0, 0.0)
    exponent: float = 1.0
    alpha_diffuse: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SceneError(f"unknown material kind {self.kind!r}")
        albedo = np.asarray(self.albedo, dtype=float)
        spec = np.asarray(self.spec_albedo, dtype=float)
        if albedo.shape != (3,) or spec.shape != (3,):
            raise SceneError(f"material {self.id!r}: albedo must be RGB")
        if np.any(albedo < 0) or np.any(spec < 0) or np.any(albedo + spec > 1.0 + 1e-12):
            raise SceneError(f"material {self.id!r} is not energy conserving")
        if self.kind == "lambert_phong_mixture" and not 0.0 < self.alpha_diffuse < 1.0:
            raise SceneError(f"material {self.id!r}: alpha_diffuse must lie in (0, 1)")
        if self.exponent < 0:
            raise SceneError(f"material {self.id!r}: negative Phong exponent")

    def row(self) -> list:
        return [float(_KINDS[self.kind]), *map(float, self.albedo), *map(float, self.spec_albedo),
                float(self.exponent), float(self.alpha_diffuse if self.kind != "lambert" else 1.0),
                0.0]


@dataclass
class Camera:
    position: tuple
    look_at: tuple
    up: tuple = (0.0, 1.0, 0.0)
    fov_degrees: float = 40.0
    resolution: tuple = (32, 32)

    def basis(self):
        pos = np.asarray(self.position, dtype=float)
        fwd = np.asarray(self.look_at, dtype=float) - pos
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, dtype=float))
        if np.linalg.norm(right) < 1e-12:
            raise SceneError("camera up vector is parallel to the view direction")
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        return pos, fwd, right, up

    @property
    def width(self) -> int:
        return int(self.resolution[0])

    @property
    def height(self) -> int:
        return int(self.resolution[1])


@dataclass
class Sphere:
    center: tuple
    radius: float
    material: str


@dataclass
class Rect:
    """Parallelogram ``corner + a*edge1 + b*edge2``; the normal is edge1 x edge2."""

    corner: tuple
    edge1: tuple
    edge2: tuple
    material: str
    emitter: Optional[int] = None


@dataclass
class Emitter:
    rect: Rect
    radiance: tuple


@dataclass
class Scene:
    camera: Camera
    materials: list = field(default_factory=list)
    spheres: list = field(default_factory=list)
    rects: list = field(default_factory=list)
    emitters: list = field(default_factory=list)

    def __post_init__(self):
        self._arrays = None

    # -- validation and numeric packing -------------------------------------

    def material_index(self) -> dict:
        return {m.id: i for i, m in enumerate(self.materials)}

    def validate(self, require_emitter: bool = True):
        ids = self.material_index()
        if len(ids) != len(self.materials):
            raise SceneError("duplicate material ids")
        for prim in [*self.spheres, *self.rects, *(e.rect for e in self.emitters)]:
            if prim.material not in ids:
                raise SceneError(f"unknown material {prim.material!r}")
        for s in self.spheres:
            if not (s.radius > 0 and np.all(np.isfinite(s.center))):
                raise SceneError("sphere must have finite center and positive radius")
        for r in [*self.rects, *(e.rect for e in self.emitters)]:
            e1 = np.asarray(r.edge1, float)
            e2 = np.asarray(r.edge2, float)
            if np.linalg.norm(np.cross(e1, e2)) <= 0:
                raise SceneError("degenerate rectangle")
            if abs(np.dot(e1, e2)) > 1e-9 * np.linalg.norm(e1) * np.linalg.norm(e2):
                raise SceneError("rectangle edges must be orthogonal")
        if require_emitter and not self.emitters:
            raise SceneError("scene has no emitter")
        for e in self.emitters:
            if len(e.radiance) != 3 or min(e.radiance) < 0:
                raise SceneError("emitter radiance must be nonnegative RGB")
        pos = np.asarray(self.camera.position, float)
        for s in self.spheres:
            if np.linalg.norm(pos - np.asarray(s.center, float)) <= s.radius:
                raise SceneError("camera lies inside a sphere")
        return self

    def arrays(self):
        """Tuple of arrays consumed by the jitted kernels (cached)."""
        if self._arrays is None:
            self._arrays = self._pack()
        return self._arrays

    def _pack(self):
        ids = self.material_index()
        sph = np.array([[*s.center, s.radius] for s in self.spheres], dtype=np.float64).reshape(-1, 4)
        sph_mat = np.array([ids[s.material] for s in self.spheres], dtype=np.int64)
        rects = list(self.rects) + [e.rect for e in self.emitters]
        rect = np.array([[*r.corner, *r.edge1, *r.edge2] for r in rects],
                        dtype=np.float64).reshape(-1, 9)
        rect_mat = np.array([ids[r.material] for r in rects], dtype=np.int64)
        rect_emit = np.full(len(rects), -1, dtype=np.int64)
        emit_rect = np.zeros(len(self.emitters), dtype=np.int64)
        for i in range(len(self.emitters)):
            rect_emit[len(self.rects) + i] = i
            emit_rect[i] = len(self.rects) + i
        mats = np.array([m.row() for m in self.materials], dtype=np.float64).reshape(-1, 10)
        rad = np.array([e.radiance for e in self.emitters], dtype=np.float64).reshape(-1, 3)
        power = np.array([
            luminance(e.radiance) * np.linalg.norm(np.cross(e.rect.edge1, e.rect.edge2))
            for e in self.emitters], dtype=np.float64)
        if power.size and power.sum() > 0:
            cdf = np.concatenate([[0.0], np.cumsum(power) / power.sum()])
            cdf[-1] = 1.0
        else:
            cdf = np.linspace(0.0, 1.0, len(self.emitters) + 1)
        pos, fwd, right, up = self.camera.basis()
        tanh = math.tan(math.radians(self.camera.fov_degrees) / 2.0)
        aspect = self.camera.width / self.camera.height
        cam = np.array([*pos, *fwd, *right, *up, tanh, aspect, self.camera.width,
                        self.camera.height], dtype=np.float64)
        return (sph, sph_mat, rect, rect_mat, rect_emit, mats, emit_rect, rad, cdf, cam)

    @property
    def n_pixels(self) -> int:
        return self.camera.width * self.camera.height

    @property
    def max_radiance(self) -> float:
        return max((max(e.radiance) for e in self.emitters), default=0.0)

    def scaled_emission(self, factor: float) -> "Scene":
        emitters = [Emitter(e.rect, tuple(factor * c for c in e.radiance)) for e in self.emitters]
        return Scene(self.camera, list(self.materials), list(self.spheres), list(self.rects),
                     emitters)

    # -- JSON -------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        try:
            cam = data["camera"]
            camera = Camera(tuple(cam["position"]), tuple(cam["look_at"]),
                            tuple(cam.get("up", (0, 1, 0))), float(cam.get("fov_degrees", 40.0)),
                            tuple(cam.get("resolution", (32, 32))))
            materials = [Material(id=str(m["id"]), kind=m.get("kind", "lambert"),
                                  albedo=tuple(m.get("albedo", (0.5, 0.5, 0.5))),
                                  spec_albedo=tuple(m.get("spec_albedo", (0, 0, 0))),
                                  exponent=float(m.get("exponent", 1.0)),
                                  alpha_diffuse=float(m.get("alpha_diffuse", 1.0)))
                         for m in data.get("materials", [])]
            spheres, rects = [], []
            for p in data.get("primitives", []):
                if p["type"] == "sphere":
                    spheres.append(Sphere(tuple(p["center"]), float(p["radius"]), str(p["material"])))
                elif p["type"] == "rect":
                    rects.append(Rect(tuple(p["corner"]), tuple(p["edge1"]), tuple(p["edge2"]),
                                      str(p["material"])))
                else:
                    raise SceneError(f"unknown primitive type {p['type']!r}")
            emitters = []
            if any(m.id == "__emitter__" for m in materials):
                raise SceneError("material id '__emitter__' is reserved")
            materials.append(Material("__emitter__", albedo=(0.0, 0.0, 0.0)))
            for e in data.get("emitters", []):
                rect = Rect(tuple(e["corner"]), tuple(e["edge1"]), tuple(e["edge2"]),
                            str(e.get("material", "__emitter__")))
                emitters.append(Emitter(rect, tuple(float(c) for c in e["radiance"])))
        except (KeyError, TypeError) as exc:
            raise SceneError(f"malformed scene description: {exc!r}") from exc
        return cls(camera, materials, spheres, rects, emitters).validate(require_emitter=False)

    def to_dict(self) -> dict:
        c = self.camera
        return {
            "camera": {"position": list(c.position), "look_at": list(c.look_at), "up": list(c.up),
                       "fov_degrees": c.fov_degrees, "resolution": list(c.resolution)},
            "materials": [
                {"id": m.id, "kind": m.kind, "albedo": list(m.albedo),
                 "spec_albedo": list(m.spec_albedo), "exponent": m.exponent,
                 "alpha_diffuse": m.alpha_diffuse}
                for m in self.materials if m.id != "__emitter__"],
            "primitives": (
                [{"type": "sphere", "center": list(s.center), "radius": s.radius,
                  "material": s.material} for s in self.spheres]
                + [{"type": "rect", "corner": list(r.corner), "edge1": list(r.edge1),
                    "edge2": list(r.edge2), "material": r.material} for r in self.rects]),
            "emitters": [{"corner": list(e.rect.corner), "edge1": list(e.rect.edge1),
                          "edge2": list(e.rect.edge2), "radiance": list(e.radiance)}
                         for e in self.emitters],
        }

    @classmethod
    def load(cls, path) -> "Scene":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SceneError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
        return cls.from_dict(data)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def luminance(rgb) -> float:
    return 0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2]


def cornell_box(resolution=(32, 32), radiance=(12.0, 12.0, 12.0), mixture_sphere=True,
                exponent=20.0) -> Scene:
    """Open-front Cornell box with a ceiling emitter and a Lambert/Phong sphere."""
    d = {
        "camera": {"position": [0.5, 0.5, -1.0], "look_at": [0.5, 0.5, 0.5], "up": [0, 1, 0],
                   "fov_degrees": 40.0, "resolution": list(resolution)},
        "materials": [
            {"id": "white", "kind": "lambert", "albedo": [0.7, 0.7, 0.7]},
            {"id": "red", "kind": "lambert", "albedo": [0.65, 0.1, 0.1]},
            {"id": "green", "kind": "lambert", "albedo": [0.12, 0.6, 0.15]},
            {"id": "glossy", "kind": "lambert_phong_mixture", "albedo": [0.3, 0.3, 0.5],
             "spec_albedo": [0.45, 0.45, 0.45], "exponent": exponent, "alpha_diffuse": 0.5},
            {"id": "matte", "kind": "lambert", "albedo": [0.6, 0.55, 0.4]},
        ],
        "primitives": [
            {"type": "rect", "corner": [0, 0, 0], "edge1": [0, 0, 1], "edge2": [1, 0, 0],
             "material": "white"},
            {"type": "rect", "corner": [0, 1, 0], "edge1": [1, 0, 0], "edge2": [0, 0, 1],
             "material": "white"},
            {"type": "rect", "corner": [0, 0, 1], "edge1": [0, 1, 0], "edge2": [1, 0, 0],
             "material": "white"},
            {"type": "rect", "corner": [0, 0, 0], "edge1": [0, 1, 0], "edge2": [0, 0, 1],
             "material": "red"},
            {"type": "rect", "corner": [1, 0, 0], "edge1": [0, 0, 1], "edge2": [0, 1, 0],
             "material": "green"},
            {"type": "sphere", "center": [0.32, 0.2, 0.62], "radius": 0.2,
             "material": "glossy" if mixture_sphere else "matte"},
            {"type": "sphere", "center": [0.72, 0.15, 0.38], "radius": 0.15, "material": "matte"},
        ],
        "emitters": [
            {"corner": [0.35, 0.999, 0.35], "edge1": [0.3, 0, 0], "edge2": [0, 0, 0.3],
             "radiance": list(radiance)},
        ],
    }
    return Scene.from_dict(d)
