"""Conforming triangle meshes, bisection refinement, and vertex patches.

A :class:`Mesh` stores vertices, positively oriented triangles, and a full
side table with deterministic orientation conventions:

* sides are stored as sorted vertex pairs ``(lo, hi)`` and numbered in
  lexicographic order of those pairs;
* the side tangent runs from the lower to the higher vertex index;
* the side normal points from the lower-numbered adjacent triangle into the
  higher-numbered one, and outward on the boundary;
* the refinement edge of every triangle is the edge between its first two
  stored vertices.

Refinement is newest-vertex bisection with recursive conformity closure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyDirichlet,
    InvertedElement,
    IoError,
    IsolatedNeumannVertex,
    NonConforming,
)

INTERIOR, DIRICHLET, NEUMANN = 0, 1, 2

_FMT = "%.17g"


@dataclass(eq=False)
class Mesh:
    """Conforming triangulation with classified boundary sides.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Positively oriented; the refinement edge is ``(t[0], t[1])``.
    sides : (ns, 2) int array
        Vertex pairs ``(lo, hi)``, lexicographically sorted.
    side_tri : (ns, 2) int array
        Adjacent triangles ``(t_minus, t_plus)`` with ``t_minus < t_plus``;
        ``t_plus == -1`` on the boundary.
    side_label : (ns,) int array
        One of ``INTERIOR``, ``DIRICHLET``, ``NEUMANN``.
    tri_sides : (nt, 3) int array
        ``tri_sides[e, j]`` is the side opposite local vertex ``j``.
    parent : (nt,) int array or None
        For refined meshes, the element of the previous mesh containing
        each element; ``None`` for meshes built from scratch.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    sides: np.ndarray
    side_tri: np.ndarray
    side_label: np.ndarray
    tri_sides: np.ndarray
    parent: np.ndarray | None = None

    # geometry caches filled by _finalize
    areas: np.ndarray = field(default=None, repr=False)
    side_length: np.ndarray = field(default=None, repr=False)
    side_normal: np.ndarray = field(default=None, repr=False)
    h: np.ndarray = field(default=None, repr=False)

    def _finalize(self):
        v = self.vertices
        t = self.triangles
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        self.areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        a, b = v[self.sides[:, 0]], v[self.sides[:, 1]]
        self.side_length = np.linalg.norm(b - a, axis=1)
        tang = (b - a) / self.side_length[:, None]
        n0 = np.column_stack([tang[:, 1], -tang[:, 0]])
        centroids = v[t].mean(axis=1)
        mid = 0.5 * (a + b)
        ref = np.where(
            (self.side_tri[:, 1] >= 0)[:, None],
            centroids[self.side_tri[:, 1]] - centroids[self.side_tri[:, 0]],
            mid - centroids[self.side_tri[:, 0]],
        )
        sign = np.sign(np.einsum("ij,ij->i", n0, ref))
        self.side_normal = n0 * sign[:, None]
        edge_len = self.side_length[self.tri_sides]
        self.h = edge_len.max(axis=1)

    # -- basic queries ----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_sides(self) -> int:
        return self.sides.shape[0]

    def boundary_sides(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.side_label == label)

    def vertex_triangles(self):
        """CSR-style map vertex -> incident triangle ids (ascending)."""
        order = np.argsort(self.triangles.ravel(), kind="stable")
        ids = np.repeat(np.arange(self.n_triangles), 3)[order]
        counts = np.bincount(self.triangles.ravel(), minlength=self.n_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, ids

    def vertex_flags(self):
        """Boolean masks (on_dirichlet, on_neumann_only) per vertex."""
        on_d = np.zeros(self.n_vertices, bool)
        on_n = np.zeros(self.n_vertices, bool)
        d = self.sides[self.side_label == DIRICHLET]
        n = self.sides[self.side_label == NEUMANN]
        on_d[d.ravel()] = True
        on_n[n.ravel()] = True
        return on_d, on_n & ~on_d

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.side_label, other.side_label)
        )


def _side_table(triangles, n_vertices):
    """Enumerate unique sides; raise NonConforming on >2 incidences."""
    nt = triangles.shape[0]
    local = triangles[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
    local_sorted = np.sort(local, axis=1)
    sides, inverse, counts = np.unique(
        local_sorted, axis=0, return_inverse=True, return_counts=True
    )
    if counts.max(initial=0) > 2:
        bad = sides[np.argmax(counts)]
        raise NonConforming(f"side {tuple(bad)} is shared by more than two triangles")
    inverse = inverse.reshape(nt, 3)
    order = np.argsort(inverse.ravel(), kind="stable")
    elems = np.repeat(np.arange(nt), 3)[order]
    side_tri = np.full((len(sides), 2), -1, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    side_tri[:, 0] = elems[offsets[:-1]]
    two = counts == 2
    side_tri[two, 1] = elems[offsets[:-1][two] + 1]
    return sides, side_tri, inverse


def _hanging_node_scan(vertices, triangles, sides):
    """Geometric check for vertices lying strictly inside a side."""
    used = np.zeros(vertices.shape[0], bool)
    used[triangles.ravel()] = True
    a = vertices[sides[:, 0]]
    b = vertices[sides[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    cell = max(np.median(lengths), 1e-300)
    buckets: dict[tuple[int, int], list[int]] = {}
    keys = np.floor(vertices / cell).astype(np.int64)
    for vid in np.flatnonzero(used):
        buckets.setdefault((keys[vid, 0], keys[vid, 1]), []).append(vid)
    for s in range(len(sides)):
        lo = np.floor(np.minimum(a[s], b[s]) / cell).astype(np.int64) - 1
        hi = np.floor(np.maximum(a[s], b[s]) / cell).astype(np.int64) + 1
        cand = []
        for ix in range(lo[0], hi[0] + 1):
            for iy in range(lo[1], hi[1] + 1):
                cand.extend(buckets.get((ix, iy), ()))
        if not cand:
            continue
        cand = np.array(cand)
        cand = cand[(cand != sides[s, 0]) & (cand != sides[s, 1])]
        if cand.size == 0:
            continue
        p = vertices[cand]
        ab = b[s] - a[s]
        t = (p - a[s]) @ ab / (lengths[s] ** 2)
        proj = a[s] + t[:, None] * ab
        dist = np.linalg.norm(p - proj, axis=1)
        eps = 1e-12
        onseg = (dist <= 1e-10 * lengths[s]) & (t > eps) & (t < 1 - eps)
        if onseg.any():
            vid = int(cand[np.flatnonzero(onseg)[0]])
            raise NonConforming(
                f"vertex {vid} hangs on side {tuple(sides[s])}"
            )


def _rotate_to_longest_edge(vertices, triangles):
    """Cyclically rotate each triple so the refinement edge (t0, t1) is the
    longest edge, ties broken by the sorted vertex pair."""
    tri = triangles.copy()
    pts = vertices[tri]                                  # (nt, 3, 2)
    # edge j is (t[j], t[j+1]) for j = 0, 1, 2 (cyclic)
    nxt = np.roll(pts, -1, axis=1)
    lens = np.linalg.norm(nxt - pts, axis=2)             # (nt, 3)
    pair_lo = np.minimum(tri, np.roll(tri, -1, axis=1))
    pair_hi = np.maximum(tri, np.roll(tri, -1, axis=1))
    best = np.zeros(len(tri), dtype=np.int64)
    cur = np.zeros(len(tri))
    cur[:] = -np.inf
    cur_lo = np.zeros(len(tri), dtype=np.int64)
    cur_hi = np.zeros(len(tri), dtype=np.int64)
    for j in range(3):
        better = (lens[:, j] > cur) | (
            (lens[:, j] == cur)
            & (
                (pair_lo[:, j] > cur_lo)
                | ((pair_lo[:, j] == cur_lo) & (pair_hi[:, j] > cur_hi))
            )
        )
        best[better] = j
        cur[better] = lens[better, j]
        cur_lo[better] = pair_lo[better, j]
        cur_hi[better] = pair_hi[better, j]
    out = tri.copy()
    for j in (1, 2):
        rows = best == j
        out[rows] = np.roll(tri[rows], -j, axis=1)
    return out


def _check_neumann_vertices(mesh: Mesh):
    """Every pure-traction vertex needs an edge to a non-traction vertex,
    so its hat weight has somewhere to be folded (see modified_patches)."""
    _, on_n_only = mesh.vertex_flags()
    if not on_n_only.any():
        return
    a, b = mesh.sides[:, 0], mesh.sides[:, 1]
    satisfied = np.zeros(mesh.n_vertices, bool)
    np.logical_or.at(satisfied, a, ~on_n_only[b])
    np.logical_or.at(satisfied, b, ~on_n_only[a])
    bad = np.flatnonzero(on_n_only & ~satisfied)
    if bad.size:
        raise IsolatedNeumannVertex(
            f"traction-boundary vertex {int(bad[0])} has no edge to an"
            " interior or displacement-boundary vertex"
        )


def _assemble(
    vertices,
    triangles,
    dirichlet,
    neumann,
    parent=None,
    geometric_check=True,
) -> Mesh:
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise ValueError("vertices must be an (nv, 2) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise ValueError("triangles must be an (nt, 3) array")
    nv = len(vertices)
    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= nv:
        raise ValueError("triangle vertex index out of range")
    if (
        (triangles[:, 0] == triangles[:, 1])
        | (triangles[:, 1] == triangles[:, 2])
        | (triangles[:, 2] == triangles[:, 0])
    ).any():
        raise InvertedElement("triangle with repeated vertex")

    d1 = vertices[triangles[:, 1]] - vertices[triangles[:, 0]]
    d2 = vertices[triangles[:, 2]] - vertices[triangles[:, 0]]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if (area2 <= 0.0).any():
        e = int(np.flatnonzero(area2 <= 0.0)[0])
        raise InvertedElement(f"triangle {e} has non-positive area")

    canon = np.sort(triangles, axis=1)
    uniq = np.unique(canon, axis=0)
    if len(uniq) != len(canon):
        raise NonConforming("duplicate triangle")
    if geometric_check:
        _, dup_counts = np.unique(
            np.round(vertices, 14), axis=0, return_counts=True
        )
        if dup_counts.max(initial=0) > 1:
            raise NonConforming("duplicate vertex coordinates")

    sides, side_tri, tri_sides = _side_table(triangles, nv)
    if geometric_check:
        _hanging_node_scan(vertices, triangles, sides)

    boundary = side_tri[:, 1] < 0
    side_label = np.zeros(len(sides), dtype=np.int64)
    lookup = {(int(lo), int(hi)): i for i, (lo, hi) in enumerate(sides)}

    def _mark(pairs, label, name):
        for i, j in pairs:
            key = (min(int(i), int(j)), max(int(i), int(j)))
            s = lookup.get(key)
            if s is None:
                raise NonConforming(f"{name} side {key} is not a mesh side")
            if not boundary[s]:
                raise NonConforming(f"{name} side {key} is not on the boundary")
            if side_label[s] != INTERIOR:
                raise NonConforming(f"side {key} classified twice")
            side_label[s] = label

    _mark(dirichlet, DIRICHLET, "dirichlet")
    _mark(neumann, NEUMANN, "neumann")
    unclassified = boundary & (side_label == INTERIOR)
    if unclassified.any():
        s = int(np.flatnonzero(unclassified)[0])
        raise NonConforming(f"boundary side {tuple(sides[s])} is unclassified")
    if not (side_label == DIRICHLET).any():
        raise EmptyDirichlet("no dirichlet sides: displacement boundary is empty")

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        sides=sides,
        side_tri=side_tri,
        side_label=side_label,
        tri_sides=tri_sides,
        parent=None if parent is None else np.asarray(parent, dtype=np.int64),
    )
    mesh._finalize()
    _check_neumann_vertices(mesh)
    return mesh


def build_mesh(vertices, triangles, dirichlet, neumann) -> Mesh:
    """Validate and assemble a mesh from raw arrays.

    Parameters
    ----------
    vertices : (nv, 2) array of coordinates.
    triangles : (nt, 3) array of vertex indices, positively oriented.
    dirichlet, neumann : iterables of boundary vertex pairs ``(i, j)``.
        Together they must classify every boundary side exactly once.

    Each triangle is rotated cyclically so its refinement edge (the first
    two stored vertices) is its longest edge, ties broken by vertex ids.

    Raises
    ------
    NonConforming, InvertedElement, EmptyDirichlet, IsolatedNeumannVertex
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if triangles.size:
        triangles = _rotate_to_longest_edge(vertices, triangles)
    return _assemble(vertices, triangles, dirichlet, neumann)


# -- file I/O --------------------------------------------------------------


def write_mesh(mesh: Mesh, path):
    """Write a mesh in the plain-text exchange format.

    Header ``vertices N / triangles M / sides_dirichlet K / sides_neumann L``
    followed by coordinate lines ``x y`` (17 significant digits), triangle
    lines ``i j k``, and boundary side lines ``i j``.  Coordinates re-read
    bit-exactly; refinement lineage is not serialized.
    """
    d = mesh.sides[mesh.side_label == DIRICHLET]
    n = mesh.sides[mesh.side_label == NEUMANN]
    lines = [
        f"vertices {mesh.n_vertices} / triangles {mesh.n_triangles}"
        f" / sides_dirichlet {len(d)} / sides_neumann {len(n)}"
    ]
    lines += [f"{_FMT % x} {_FMT % y}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"{i} {j}" for i, j in d]
    lines += [f"{i} {j}" for i, j in n]
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write mesh file {path}: {exc}") from exc


def read_mesh(path) -> Mesh:
    """Read a mesh written by :func:`write_mesh`.

    The stored vertex order of each triangle is preserved (the first two
    vertices remain the refinement edge); full validation is performed.
    """
    try:
        with open(path) as fh:
            raw = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise IoError(f"cannot read mesh file {path}: {exc}") from exc
    if not raw:
        raise IoError(f"mesh file {path} is empty")
    try:
        fields = raw[0].split("/")
        counts = {}
        for f in fields:
            name, num = f.split()
            counts[name] = int(num)
        nv, nt = counts["vertices"], counts["triangles"]
        nd, nn = counts["sides_dirichlet"], counts["sides_neumann"]
        rows = raw[1:]
        if len(rows) != nv + nt + nd + nn:
            raise ValueError(
                f"expected {nv + nt + nd + nn} data lines, got {len(rows)}"
            )
        vertices = np.array(
            [[float(t) for t in r.split()] for r in rows[:nv]], dtype=np.float64
        ).reshape(nv, 2)
        triangles = np.array(
            [[int(t) for t in r.split()] for r in rows[nv : nv + nt]],
            dtype=np.int64,
        ).reshape(nt, 3)
        dirichlet = [
            tuple(int(t) for t in r.split()) for r in rows[nv + nt : nv + nt + nd]
        ]
        neumann = [tuple(int(t) for t in r.split()) for r in rows[nv + nt + nd :]]
    except (ValueError, KeyError) as exc:
        raise IoError(f"malformed mesh file {path}: {exc}") from exc
    return _assemble(vertices, triangles, dirichlet, neumann)


# -- refinement ------------------------------------------------------------


def refine(mesh: Mesh, marked) -> Mesh:
    """Bisect the marked elements; close recursively to stay conforming.

    Newest-vertex bisection: a triangle ``(a, b, c)`` with refinement edge
    ``(a, b)`` splits at the edge midpoint ``m`` into ``(c, a, m)`` and
    ``(b, c, m)``, so each child's refinement edge is an unsplit edge of
    the parent.  An edge is only split when every triangle sharing it has
    it as its refinement edge, which the recursion establishes first.

    Returns a new mesh whose ``parent`` array maps each element to the
    element of ``mesh`` containing it.  ``refine(mesh, [])`` returns an
    equal mesh.
    """
    marked = sorted({int(m) for m in np.asarray(marked, dtype=np.int64).ravel()})
    if marked and (marked[0] < 0 or marked[-1] >= mesh.n_triangles):
        raise ValueError("marked element index out of range")

    verts = [tuple(p) for p in mesh.vertices]
    tris = [list(t) for t in mesh.triangles]
    alive = [True] * len(tris)
    ancestor = list(range(len(tris)))

    adj: dict[tuple[int, int], list[int]] = {}
    for e, t in enumerate(tris):
        for i, j in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            adj.setdefault((min(i, j), max(i, j)), []).append(e)
    labels = {
        (int(lo), int(hi)): int(lab)
        for (lo, hi), lab in zip(mesh.sides, mesh.side_label)
        if lab != INTERIOR
    }

    def refedge(t):
        a, b = tris[t][0], tris[t][1]
        return (min(a, b), max(a, b))

    def split(edge, members):
        """Bisect all triangles in `members`, each having `edge` as its
        refinement edge."""
        m = len(verts)
        pa, pb = verts[edge[0]], verts[edge[1]]
        verts.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
        lab = labels.pop(edge, None)
        if lab is not None:
            labels[(min(edge[0], m), max(edge[0], m))] = lab
            labels[(min(edge[1], m), max(edge[1], m))] = lab
        adj.pop(edge)
        for t in members:
            a, b, c = tris[t]
            alive[t] = False
            for i, j in ((a, b), (b, c), (c, a)):
                key = (min(i, j), max(i, j))
                if key in adj:
                    adj[key] = [x for x in adj[key] if x != t]
                    if not adj[key]:
                        del adj[key]
            for child in ([c, a, m], [b, c, m]):
                cid = len(tris)
                tris.append(child)
                alive.append(True)
                ancestor.append(ancestor[t])
                for i, j in (
                    (child[0], child[1]),
                    (child[1], child[2]),
                    (child[2], child[0]),
                ):
                    adj.setdefault((min(i, j), max(i, j)), []).append(cid)

    budget = 64 * (mesh.n_triangles + len(marked)) + 4096
    for root in marked:
        stack = [root]
        while stack:
            t = stack[-1]
            if not alive[t]:
                stack.pop()
                continue
            e = refedge(t)
            partners = [x for x in adj.get(e, ()) if x != t and alive[x]]
            incompatible = [x for x in partners if refedge(x) != e]
            if incompatible:
                stack.append(incompatible[0])
            else:
                split(e, [t] + partners)
                stack.pop()
            budget -= 1
            if budget < 0:
                raise RuntimeError(
                    "bisection closure did not terminate; "
                    "inconsistent refinement-edge labels"
                )

    new_tris = np.array(
        [t for t, a in zip(tris, alive) if a], dtype=np.int64
    ).reshape(-1, 3)
    new_parent = np.array(
        [p for p, a in zip(ancestor, alive) if a], dtype=np.int64
    )
    dirichlet = [e for e, lab in labels.items() if lab == DIRICHLET]
    neumann = [e for e, lab in labels.items() if lab == NEUMANN]
    dirichlet.sort()
    neumann.sort()
    return _assemble(
        np.array(verts, dtype=np.float64),
        new_tris,
        dirichlet,
        neumann,
        parent=new_parent,
        geometric_check=False,
    )


def uniform_refine(mesh: Mesh, rounds: int = 2) -> Mesh:
    """Bisect every element `rounds` times (two rounds halve h on meshes of
    right triangles)."""
    for _ in range(rounds):
        mesh = refine(mesh, np.arange(mesh.n_triangles))
    return mesh


# -- vertex patches ---------------------------------------------------------


@dataclass
class VertexPatch:
    """Support of one partition-of-unity weight.

    Attributes
    ----------
    vertex : int
        The vertex carrying the weight.
    elements : (ne,) int array
        Triangles of the patch, ascending.
    weights : (ne, 3) float array
        Nodal values of the (possibly extended) hat weight on each element;
        the weight is affine on each triangle.
    absorbed : (na,) int array
        Traction-boundary vertices whose hat was folded into this weight.
    dirichlet_touching : bool
        True when some side of the closed patch lies on the displacement
        boundary.
    """

    vertex: int
    elements: np.ndarray
    weights: np.ndarray
    absorbed: np.ndarray
    dirichlet_touching: bool


def _patch_from_vertices(mesh, z, group, offsets, ids):
    members = np.unique(
        np.concatenate([ids[offsets[v] : offsets[v + 1]] for v in group])
    )
    tri = mesh.triangles[members]
    weights = np.isin(tri, group).astype(np.float64)
    labels = mesh.side_label[mesh.tri_sides[members]]
    return VertexPatch(
        vertex=int(z),
        elements=members,
        weights=weights,
        absorbed=np.array(sorted(set(group) - {int(z)}), dtype=np.int64),
        dirichlet_touching=bool((labels == DIRICHLET).any()),
    )


def standard_patches(mesh: Mesh) -> list[VertexPatch]:
    """One hat-function patch per mesh vertex; the weights sum to one."""
    offsets, ids = mesh.vertex_triangles()
    return [
        _patch_from_vertices(mesh, z, [z], offsets, ids)
        for z in range(mesh.n_vertices)
    ]


def modified_patches(mesh: Mesh) -> list[VertexPatch]:
    """Patches for the traction-adjusted partition of unity.

    Vertices lying on the traction boundary only (no displacement side)
    carry no patch of their own: each is assigned to the lowest-numbered
    vertex it shares an edge with that is eligible (interior or touching
    the displacement boundary), and its hat weight is folded into that
    vertex's weight.  The extended weight equals one along the connecting
    edge, and the patch is the union of the supports.

    Raises
    ------
    IsolatedNeumannVertex
        If some traction vertex has no eligible neighbour.
    """
    on_d, on_n_only = mesh.vertex_flags()
    offsets, ids = mesh.vertex_triangles()
    assigned: dict[int, list[int]] = {}
    for z_n in np.flatnonzero(on_n_only):
        nbrs = np.concatenate(
            [
                mesh.sides[mesh.sides[:, 0] == z_n, 1],
                mesh.sides[mesh.sides[:, 1] == z_n, 0],
            ]
        )
        eligible = nbrs[~on_n_only[nbrs]]
        if eligible.size == 0:
            raise IsolatedNeumannVertex(
                f"traction vertex {int(z_n)} has no eligible neighbour"
            )
        assigned.setdefault(int(eligible.min()), []).append(int(z_n))
    patches = []
    for z in range(mesh.n_vertices):
        if on_n_only[z]:
            continue
        group = [z] + sorted(assigned.get(z, []))
        patches.append(_patch_from_vertices(mesh, z, group, offsets, ids))
    return patches


# -- quality -----------------------------------------------------------------


def angles(mesh: Mesh) -> np.ndarray:
    """Interior angles per triangle in radians, shape (nt, 3)."""
    p = mesh.vertices[mesh.triangles]
    out = np.empty((mesh.n_triangles, 3))
    for j in range(3):
        u = p[:, (j + 1) % 3] - p[:, j]
        w = p[:, (j + 2) % 3] - p[:, j]
        cosang = np.einsum("ij,ij->i", u, w) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1)
        )
        out[:, j] = np.arccos(np.clip(cosang, -1.0, 1.0))
    return out
