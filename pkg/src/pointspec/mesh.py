"""Triangle mesh parsing (OFF format) and surface point sampling."""

from dataclasses import dataclass

import numpy as np

from .cloud import normalize_unit_ball


class MeshError(ValueError):
    """Raised for malformed mesh files or degenerate meshes."""


@dataclass(frozen=True)
class TriangleMesh:
    """Vertex coordinates plus triangle faces (vertex-index triples)."""

    vertices: np.ndarray  # (nv, 3) float64
    faces: np.ndarray     # (nf, 3) int64

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
            raise MeshError("face index out of range")
        for tri in faces:
            if len(set(tri.tolist())) != 3:
                raise MeshError(f"face {tri.tolist()} has repeated vertices")
        verts.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)


def _content_lines(text: str):
    """Yield non-empty, non-comment lines with inline comments stripped."""
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def parse_off(data) -> TriangleMesh:
    """Parse an OFF file given as bytes or str.

    Accepts the common header variants: "OFF" alone on the first line, or
    "OFF" followed by the counts (some CAD exports glue them together).
    Extra per-vertex fields (colors) are ignored. Faces with more than three
    vertices are fan-triangulated; fewer than three is an error.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    lines = list(_content_lines(data))
    if not lines:
        raise MeshError("empty OFF file")

    header = lines[0]
    if not header.startswith("OFF"):
        raise MeshError(f"missing OFF header, got {header[:20]!r}")
    rest = header[3:].strip()
    if rest:
        counts_line, body = rest, lines[1:]
    else:
        if len(lines) < 2:
            raise MeshError("missing counts line")
        counts_line, body = lines[1], lines[2:]

    counts = counts_line.split()
    if len(counts) < 2:
        raise MeshError(f"malformed counts line: {counts_line!r}")
    try:
        n_verts, n_faces = int(counts[0]), int(counts[1])
    except ValueError:
        raise MeshError(f"malformed counts line: {counts_line!r}") from None

    if len(body) < n_verts + n_faces:
        raise MeshError(
            f"count mismatch: declared {n_verts} vertices + {n_faces} faces, "
            f"found {len(body)} data lines"
        )

    verts = np.empty((n_verts, 3), dtype=np.float64)
    for i in range(n_verts):
        fields = body[i].split()
        if len(fields) < 3:
            raise MeshError(f"vertex line {i}: expected 3 coordinates")
        try:
            verts[i] = [float(f) for f in fields[:3]]
        except ValueError:
            raise MeshError(f"vertex line {i}: non-numeric coordinate") from None

    triangles = []
    for i in range(n_faces):
        fields = body[n_verts + i].split()
        try:
            m = int(fields[0])
        except (ValueError, IndexError):
            raise MeshError(f"face line {i}: malformed") from None
        if m < 3:
            raise MeshError(f"face line {i}: a face needs at least 3 vertices, got {m}")
        if len(fields) < 1 + m:
            raise MeshError(f"face line {i}: declared {m} indices, found {len(fields) - 1}")
        try:
            idx = [int(f) for f in fields[1:1 + m]]
        except ValueError:
            raise MeshError(f"face line {i}: non-integer index") from None
        for v in idx:
            if v < 0 or v >= n_verts:
                raise MeshError(f"face line {i}: index {v} out of range")
        # fan triangulation for polygons
        for j in range(1, m - 1):
            triangles.append((idx[0], idx[j], idx[j + 1]))

    return TriangleMesh(verts, np.array(triangles, dtype=np.int64).reshape(-1, 3))


def load_off(path) -> TriangleMesh:
    with open(path, "rb") as fh:
        return parse_off(fh.read())


def face_areas(mesh: TriangleMesh) -> np.ndarray:
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    cross = np.cross(b - a, c - a)
    return 0.5 * np.sqrt((cross * cross).sum(axis=1))


def sample_surface(mesh: TriangleMesh, n: int, seed: int) -> np.ndarray:
    """Draw n points uniformly from the mesh surface, then unit-ball normalize.

    Faces are selected with probability proportional to area; within a face
    the point is placed by the square-root barycentric trick, which is the
    standard unbiased uniform sampler for triangles. Deterministic for a
    fixed seed.
    """
    if n < 2:
        raise MeshError(f"need n >= 2 sample points, got {n}")
    if len(mesh.faces) == 0:
        raise MeshError("mesh has no faces")
    areas = face_areas(mesh)
    total = areas.sum()
    if total <= 0.0:
        raise MeshError("all faces are degenerate (zero total area)")

    rng = np.random.default_rng(seed)
    face_idx = rng.choice(len(areas), size=n, p=areas / total)
    r1 = rng.random(n)
    r2 = rng.random(n)
    u = np.sqrt(r1)

    a = mesh.vertices[mesh.faces[face_idx, 0]]
    b = mesh.vertices[mesh.faces[face_idx, 1]]
    c = mesh.vertices[mesh.faces[face_idx, 2]]
    pts = (1.0 - u)[:, None] * a + (u * (1.0 - r2))[:, None] * b + (u * r2)[:, None] * c
    return normalize_unit_ball(pts)
