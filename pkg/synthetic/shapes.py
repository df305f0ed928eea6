"""
Параметрические примитивы и равномерное семплирование их поверхностей.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import torch

from geometry.pointcloud import normalize_cloud
from ml.numerics.rng import SeededRng
from utilities.errors import ContractError

# Порядок задает метку категории записи
KINDS = ("sphere", "box", "cylinder", "torus", "composite")
PRIMITIVES = KINDS[:-1]
_SIZE_ARITY = {"sphere": 1, "box": 3, "cylinder": 2, "torus": 2}


@dataclass(frozen=True)
class ShapeSpec:
    """
    Описание фигуры.

    size: sphere (r,), box (ширина, высота, глубина), cylinder (r, h),
    torus (R, r). Для composite size не используется, части в parts.
    rotation: углы Эйлера XYZ в радианах.
    """
    kind: str
    size: Tuple[float, ...] = ()
    rotation: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    translation: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    parts: Tuple["ShapeSpec", ...] = field(default_factory=tuple)

    @property
    def category(self) -> int:
        return KINDS.index(self.kind)

    def validate(self) -> "ShapeSpec":
        if self.kind not in KINDS:
            raise ContractError(f"Неизвестный тип фигуры '{self.kind}', допустимы {KINDS}")
        if float(np.linalg.norm(self.translation)) >= 1.0:
            raise ContractError(f"Смещение {self.translation} выходит за единичный шар")
        if self.kind == "composite":
            if len(self.parts) != 2:
                raise ContractError(f"Составная фигура требует ровно 2 части, получено {len(self.parts)}")
            for part in self.parts:
                if part.kind == "composite":
                    raise ContractError("Части составной фигуры должны быть примитивами")
                part.validate()
            return self
        if len(self.size) != _SIZE_ARITY[self.kind]:
            raise ContractError(
                f"Фигура '{self.kind}' ожидает {_SIZE_ARITY[self.kind]} размеров, получено {self.size}"
            )
        if any(s <= 0 for s in self.size):
            raise ContractError(f"Размеры фигуры должны быть положительными: {self.size}")
        if self.kind == "torus" and self.size[1] >= self.size[0]:
            raise ContractError(f"Тор требует r < R, получено {self.size}")
        return self


def rotation_matrix(angles: Tuple[float, float, float]) -> np.ndarray:
    ax, ay, az = angles
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def surface_area(spec: ShapeSpec) -> float:
    if spec.kind == "sphere":
        (r,) = spec.size
        return 4.0 * math.pi * r * r
    if spec.kind == "box":
        a, b, c = spec.size
        return 2.0 * (a * b + b * c + a * c)
    if spec.kind == "cylinder":
        r, h = spec.size
        return 2.0 * math.pi * r * h + 2.0 * math.pi * r * r
    if spec.kind == "torus":
        big, small = spec.size
        return 4.0 * math.pi ** 2 * big * small
    return sum(surface_area(part) for part in spec.parts)


def _sphere(size, n: int, rng: SeededRng) -> np.ndarray:
    (r,) = size
    v = rng.normal((n, 3), dtype=torch.float64).numpy()
    return r * v / np.linalg.norm(v, axis=1, keepdims=True)


def _box(size, n: int, rng: SeededRng) -> np.ndarray:
    half = np.asarray(size, dtype=np.float64) / 2.0
    a, b, c = size
    # Грань, перпендикулярная оси i, имеет площадь произведения двух других размеров
    face_areas = np.array([b * c, a * c, a * b])
    axis = np.searchsorted(np.cumsum(face_areas / face_areas.sum()), rng.uniform(size=n), side="right")
    axis = np.minimum(axis, 2)
    points = rng.uniform(size=(n, 3), low=-1.0, high=1.0) * half
    sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
    rows = np.arange(n)
    points[rows, axis] = sign * half[axis]
    return points


def _cylinder(size, n: int, rng: SeededRng) -> np.ndarray:
    r, h = size
    lateral = 2.0 * math.pi * r * h
    caps = 2.0 * math.pi * r * r
    on_side = rng.uniform(size=n) < lateral / (lateral + caps)
    theta = rng.uniform(size=n, high=2.0 * math.pi)
    radius = np.where(on_side, r, r * np.sqrt(rng.uniform(size=n)))
    z_side = rng.uniform(size=n, low=-h / 2.0, high=h / 2.0)
    z_cap = np.where(rng.uniform(size=n) < 0.5, -h / 2.0, h / 2.0)
    z = np.where(on_side, z_side, z_cap)
    return np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=1)


def _torus(size, n: int, rng: SeededRng) -> np.ndarray:
    big, small = size
    # Угол трубки по плотности (R + r·cos θ) методом отбора
    accepted = np.empty(0)
    while accepted.size < n:
        theta = rng.uniform(size=2 * n, high=2.0 * math.pi)
        keep = rng.uniform(size=2 * n) * (big + small) < big + small * np.cos(theta)
        accepted = np.concatenate([accepted, theta[keep]])
    theta = accepted[:n]
    phi = rng.uniform(size=n, high=2.0 * math.pi)
    ring = big + small * np.cos(theta)
    return np.stack([ring * np.cos(phi), ring * np.sin(phi), small * np.sin(theta)], axis=1)


_SAMPLERS = {"sphere": _sphere, "box": _box, "cylinder": _cylinder, "torus": _torus}


def sample_surface(spec: ShapeSpec, n: int, rng: SeededRng) -> np.ndarray:
    """
    Равномерные точки на поверхности в позе spec (без нормировки), float64 [n, 3].

    Для составной фигуры число точек каждой части пропорционально ее площади.
    """
    spec.validate()
    if n < 1:
        raise ContractError(f"Число точек должно быть >= 1, получено {n}")

    if spec.kind == "composite":
        first, second = spec.parts
        share = surface_area(first) / surface_area(spec)
        n_first = int(np.sum(rng.uniform(size=n) < share))
        chunks = []
        if n_first:
            chunks.append(sample_surface(first, n_first, rng))
        if n - n_first:
            chunks.append(sample_surface(second, n - n_first, rng))
        points = np.concatenate(chunks, axis=0)
    else:
        points = _SAMPLERS[spec.kind](spec.size, n, rng)

    return points @ rotation_matrix(spec.rotation).T + np.asarray(spec.translation)


def generate_shape(spec: ShapeSpec, n: int, rng: SeededRng) -> torch.Tensor:
    """Нормированное облако float32 [n, 3] на поверхности фигуры."""
    points = torch.from_numpy(sample_surface(spec, n, rng))
    normalized, _, _ = normalize_cloud(points)
    return normalized.to(torch.float32)


def random_spec(rng: SeededRng, kind: Optional[str] = None) -> ShapeSpec:
    """Случайная фигура заданного (или случайного) типа."""
    kind = kind or KINDS[rng.integers(0, len(KINDS))]
    if kind == "composite":
        parts = tuple(
            _random_primitive(rng, PRIMITIVES[rng.integers(0, len(PRIMITIVES))], offset=0.4)
            for _ in range(2)
        )
        return ShapeSpec(kind="composite", parts=parts).validate()
    return _random_primitive(rng, kind, offset=0.0)


def _random_primitive(rng: SeededRng, kind: str, offset: float) -> ShapeSpec:
    if kind == "sphere":
        size = (float(rng.uniform(low=0.3, high=0.6)),)
    elif kind == "box":
        size = tuple(float(v) for v in rng.uniform(size=3, low=0.3, high=1.0))
    elif kind == "cylinder":
        size = (float(rng.uniform(low=0.2, high=0.5)), float(rng.uniform(low=0.4, high=1.0)))
    else:
        big = float(rng.uniform(low=0.4, high=0.6))
        size = (big, float(rng.uniform(low=0.1, high=0.5)) * big)
    rotation = tuple(float(v) for v in rng.uniform(size=3, high=2.0 * math.pi))
    translation = tuple(float(v) for v in rng.uniform(size=3, low=-offset, high=offset)) \
        if offset > 0 else (0.0, 0.0, 0.0)
    return ShapeSpec(kind=kind, size=size, rotation=rotation, translation=translation).validate()
