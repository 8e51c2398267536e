"""Landmark-driven face morphing.

A morphed frame is a pixel-wise blend of two images, each warped so that its
landmarks land on the alpha-interpolated landmark positions.  The warp is
piecewise affine over a Delaunay triangulation built once on the interpolated
point set and reused (as connectivity) for both source geometries, which
guarantees triangle correspondence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .raster import FloatRaster, LandmarkSet, Raster, bilinear_sample, quantize_array

logger = logging.getLogger(__name__)

# blend-weight grid used for systematic morph sequence generation
DEFAULT_ALPHA_GRID = (0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45)

_DEGENERATE_AREA = 1e-9
_DUPLICATE_TOL = 1e-6


@dataclass(frozen=True)
class MorphSpec:
    """Parameters of one morphed frame.

    ``alpha`` is the frame weight factor: the second subject's share of the
    blend.  Endpoints 0 and 1 are identity cases and only allowed when
    ``allow_endpoints`` is set (test mode).
    """

    alpha: float
    composite_inner_only: bool = False
    boundary_padding: bool = True
    allow_endpoints: bool = False

    def __post_init__(self) -> None:
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if self.allow_endpoints:
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"alpha {self.alpha} outside [0, 1]")
        elif not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha {self.alpha} outside (0, 1); endpoints need test mode")


@dataclass(frozen=True)
class WarpMesh:
    """Triangle connectivity (vertex-index triples) over a landmark set."""

    triangles: np.ndarray

    def __post_init__(self) -> None:
        tri = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise ValueError(f"triangles must be an (m, 3) index array, got {tri.shape}")
        tri.setflags(write=False)
        object.__setattr__(self, "triangles", tri)

    def __len__(self) -> int:
        return self.triangles.shape[0]


def interpolate_landmarks(p0: LandmarkSet, p1: LandmarkSet, alpha: float) -> LandmarkSet:
    """Pointwise linear interpolation: (1 - alpha) * p0 + alpha * p1."""
    if len(p0) != len(p1):
        raise ValueError(f"landmark sets differ in length ({len(p0)} vs {len(p1)})")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} outside [0, 1]")
    return LandmarkSet((1.0 - alpha) * p0.points + alpha * p1.points, tags=p0.tags)


def frame_anchor_points(image_size: tuple[int, int]) -> np.ndarray:
    """Four corners plus four edge midpoints of the pixel-center rectangle.

    Appending these to every landmark set makes the triangulation cover the
    whole frame; they sit at the same position in every geometry, so they
    interpolate to themselves.
    """
    w, h = image_size
    x1, y1 = float(w - 1), float(h - 1)
    xm, ym = x1 / 2.0, y1 / 2.0
    return np.array(
        [
            [0.0, 0.0],
            [x1, 0.0],
            [x1, y1],
            [0.0, y1],
            [xm, 0.0],
            [x1, ym],
            [xm, y1],
            [0.0, ym],
        ]
    )


def pad_landmarks(points: np.ndarray, image_size: tuple[int, int]) -> np.ndarray:
    return np.vstack([points, frame_anchor_points(image_size)])


def _dedup_points(points: np.ndarray) -> np.ndarray:
    """Indices of points to keep, dropping later points closer than the
    duplicate tolerance to an earlier one."""
    keep: list[int] = []
    for i, p in enumerate(points):
        if all(np.hypot(*(p - points[j])) >= _DUPLICATE_TOL for j in keep):
            keep.append(i)
    return np.asarray(keep, dtype=np.int64)


def _triangle_areas(points: np.ndarray, tri: np.ndarray) -> np.ndarray:
    a, b, c = points[tri[:, 0]], points[tri[:, 1]], points[tri[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def build_mesh(
    p_alpha: LandmarkSet, image_size: tuple[int, int], boundary_padding: bool = True
) -> WarpMesh:
    """Delaunay triangulation of the (optionally frame-padded) point set.

    Triangle indices refer to the padded point array, i.e. the original
    points followed by :func:`frame_anchor_points` when padding is on.
    Near-coincident points are collapsed before triangulating; indices of the
    retained representatives are used.
    """
    pts = p_alpha.points
    if boundary_padding:
        pts = pad_landmarks(pts, image_size)
    keep = _dedup_points(pts)
    if keep.size < 3:
        raise ValueError("need at least 3 distinct landmarks to triangulate")
    try:
        tri = Delaunay(pts[keep])
    except QhullError as exc:
        raise ValueError("landmarks are collinear; cannot triangulate") from exc
    triangles = keep[tri.simplices]
    areas = np.abs(_triangle_areas(pts, triangles))
    triangles = triangles[areas > _DEGENERATE_AREA]
    if triangles.shape[0] == 0:
        raise ValueError("triangulation produced no non-degenerate triangles")
    return WarpMesh(triangles)


def _barycentric(dst_tri: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Barycentric coordinates of (xs, ys) in one destination triangle."""
    (x0, y0), (x1, y1), (x2, y2) = dst_tri
    denom = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    b1 = ((xs - x0) * (y2 - y0) - (ys - y0) * (x2 - x0)) / denom
    b2 = ((ys - y0) * (x1 - x0) - (xs - x0) * (y1 - y0)) / denom
    return 1.0 - b1 - b2, b1, b2


def warp_sample(
    img: Raster,
    mesh: WarpMesh,
    src_pts: LandmarkSet,
    dst_pts: LandmarkSet,
    p: tuple[float, float],
) -> np.ndarray:
    """Sample the warped image at one destination-space position.

    Locates ``p``'s triangle in the destination geometry, maps it through the
    barycentric correspondence to the source triangle and samples the image
    bilinearly there.  A point outside every triangle falls back to the least
    violated (nearest) triangle's affine map.
    """
    if len(src_pts) != len(dst_pts):
        raise ValueError("source/destination landmark sets differ in length")
    x = np.asarray([float(p[0])])
    y = np.asarray([float(p[1])])
    src = src_pts.points
    dst = dst_pts.points
    best = None  # (min barycentric coord, sample coords)
    for tri in mesh.triangles:
        b0, b1, b2 = _barycentric(dst[tri], x, y)
        lo = min(b0[0], b1[0], b2[0])
        sx = b0 * src[tri[0], 0] + b1 * src[tri[1], 0] + b2 * src[tri[2], 0]
        sy = b0 * src[tri[0], 1] + b1 * src[tri[1], 1] + b2 * src[tri[2], 1]
        if lo >= -1e-9:
            return bilinear_sample(img.data.astype(np.float64), sx, sy)[0]
        if best is None or lo > best[0]:
            best = (lo, sx, sy)
    assert best is not None, "mesh has no triangles"
    return bilinear_sample(img.data.astype(np.float64), best[1], best[2])[0]


def warp_image(
    img: Raster, mesh: WarpMesh, src_pts: LandmarkSet, dst_pts: LandmarkSet
) -> FloatRaster:
    """Whole-frame piecewise-affine warp (destination geometry -> source
    samples), vectorized per triangle."""
    if len(src_pts) != len(dst_pts):
        raise ValueError("source/destination landmark sets differ in length")
    h, w = img.height, img.width
    data = img.data.astype(np.float64)
    src = src_pts.points
    dst = dst_pts.points

    map_x = np.full((h, w), np.nan)
    map_y = np.full((h, w), np.nan)
    inverted = 0
    dst_areas = _triangle_areas(dst, mesh.triangles)
    src_areas = _triangle_areas(src, mesh.triangles)
    for t, tri in enumerate(mesh.triangles):
        # inverted connectivity transfers still map fine through barycentrics
        if dst_areas[t] * src_areas[t] < 0:
            inverted += 1
        d = dst[tri]
        xmin = max(int(np.floor(d[:, 0].min())), 0)
        xmax = min(int(np.ceil(d[:, 0].max())), w - 1)
        ymin = max(int(np.floor(d[:, 1].min())), 0)
        ymax = min(int(np.ceil(d[:, 1].max())), h - 1)
        if xmin > xmax or ymin > ymax:
            continue
        ys, xs = np.mgrid[ymin : ymax + 1, xmin : xmax + 1]
        xs = xs.astype(np.float64)
        ys = ys.astype(np.float64)
        b0, b1, b2 = _barycentric(d, xs, ys)
        inside = (b0 >= -1e-9) & (b1 >= -1e-9) & (b2 >= -1e-9)
        block = map_x[ymin : ymax + 1, xmin : xmax + 1]
        fill = inside & np.isnan(block)
        if not fill.any():
            continue
        sx = b0 * src[tri[0], 0] + b1 * src[tri[1], 0] + b2 * src[tri[2], 0]
        sy = b0 * src[tri[0], 1] + b1 * src[tri[1], 1] + b2 * src[tri[2], 1]
        block[fill] = sx[fill]
        map_y[ymin : ymax + 1, xmin : xmax + 1][fill] = sy[fill]
    if inverted:
        logger.warning("%d triangles inverted in source geometry", inverted)

    missing = np.isnan(map_x)
    if missing.any():
        ys, xs = np.nonzero(missing)
        mx, my = _nearest_triangle_map(mesh, src, dst, xs.astype(np.float64), ys.astype(np.float64))
        map_x[missing] = mx
        map_y[missing] = my
    return FloatRaster(bilinear_sample(data, map_x, map_y))


def _nearest_triangle_map(
    mesh: WarpMesh, src: np.ndarray, dst: np.ndarray, xs: np.ndarray, ys: np.ndarray
):
    """Least-violated-triangle extension for points outside the mesh."""
    best_lo = np.full(xs.shape, -np.inf)
    best_x = np.zeros_like(xs)
    best_y = np.zeros_like(ys)
    for tri in mesh.triangles:
        b0, b1, b2 = _barycentric(dst[tri], xs, ys)
        lo = np.minimum(np.minimum(b0, b1), b2)
        better = lo > best_lo
        if better.any():
            sx = b0 * src[tri[0], 0] + b1 * src[tri[1], 0] + b2 * src[tri[2], 0]
            sy = b0 * src[tri[0], 1] + b1 * src[tri[1], 1] + b2 * src[tri[2], 1]
            best_lo[better] = lo[better]
            best_x[better] = sx[better]
            best_y[better] = sy[better]
    return best_x, best_y


def _hull_mask(face_pts: np.ndarray, w: int, h: int) -> np.ndarray:
    """Boolean (h, w) mask of pixels inside the convex hull of the face
    landmarks; all-False when the hull is degenerate."""
    try:
        tri = Delaunay(face_pts)
    except (QhullError, ValueError):
        return np.zeros((h, w), dtype=bool)
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.column_stack([xs.ravel().astype(np.float64), ys.ravel().astype(np.float64)])
    return (tri.find_simplex(pts) >= 0).reshape(h, w)


def morph(
    i0: Raster, i1: Raster, p0: LandmarkSet, p1: LandmarkSet, spec: MorphSpec
) -> Raster:
    """Blend the two warped images with weights (1 - alpha, alpha).

    With ``composite_inner_only`` the blend is restricted to the convex hull
    of the (pre-padding) face landmarks; outside it the warped first image is
    used unchanged, a simplified stand-in for artifact retouching.
    """
    if (i0.width, i0.height, i0.channels) != (i1.width, i1.height, i1.channels):
        raise ValueError("images differ in size or channel count")
    if len(p0) != len(p1):
        raise ValueError(f"landmark sets differ in length ({len(p0)} vs {len(p1)})")
    w, h = i0.width, i0.height

    # weight pair (1-a, 1-(1-a)) instead of (1-a, a): double complement is
    # idempotent from the first application on, which makes
    # morph(i0,i1,a) == morph(i1,i0,1-a) hold bit-for-bit for every float a
    w0 = 1.0 - spec.alpha
    w1 = 1.0 - w0

    pts0 = p0.points
    pts1 = p1.points
    if spec.boundary_padding:
        pts0 = pad_landmarks(pts0, (w, h))
        pts1 = pad_landmarks(pts1, (w, h))
    pa = w0 * pts0 + w1 * pts1
    p_alpha = LandmarkSet(pa)
    mesh = build_mesh(p_alpha, (w, h), boundary_padding=False)

    warped0 = warp_image(i0, mesh, LandmarkSet(pts0), p_alpha)
    warped1 = warp_image(i1, mesh, LandmarkSet(pts1), p_alpha)
    blend = w0 * warped0.data + w1 * warped1.data

    if spec.composite_inner_only:
        n_face = len(p0)
        inner = _hull_mask(pa[:n_face], w, h)
        blend = np.where(inner[:, :, np.newaxis], blend, warped0.data)
    return Raster(quantize_array(blend))
