"""Binary program choosing the watertight subset of candidate faces.

The objective blends three normalized terms: a data term rewarding
faces with point support, a complexity term charging every selected
edge where two faces from different planes meet, and a mild preference
for higher faces that separates equally supported hypotheses.  The
hard constraints are the manifold rule (each welded edge borders zero
or two selected faces) and the roof-stack rule (each plan cell gets
exactly one roof).  Both are solved exactly by depth-first branch and
bound over equivalence classes of faces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    Infeasible,
    InfeasibleByConstruction,
    SolverTimeout,
)
from .geom import SurfaceMesh


@dataclass
class SelectionWeights:
    """Convex mix of the three energy terms."""

    data: float = 0.34
    complexity: float = 0.62
    roof: float = 0.04

    def validate(self):
        if self.data <= 0:
            raise ConfigError("the data weight must be positive")
        if self.complexity < 0 or self.roof < 0:
            raise ConfigError("energy weights must be non-negative")
        total = self.data + self.complexity + self.roof
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"energy weights must sum to 1, got {total}")


@dataclass
class Program:
    """Face-level formulation handed to the solver and to LP export."""

    weights: SelectionWeights
    support_frac: np.ndarray
    roof_frac: np.ndarray
    costs: np.ndarray
    constant: float
    crease_weight: float
    edge_faces: list
    edge_keys: list
    stacks: list
    fixed: dict
    n_scored_edges: int


@dataclass
class Solution:
    assignment: np.ndarray
    objective: float
    status: str  # 'optimal' | 'timeout'
    nodes: int
    runtime: float
    data_term: float
    complexity_term: float
    roof_term: float


def build_program(cs, weights: SelectionWeights | None = None, face_prior=True) -> Program:
    """Translate a candidate set into costs and constraint rows.

    Edges with a single candidate force that face off (nothing could
    ever close them); edges with two or more candidates become manifold
    rows and are the population over which creases are normalized.
    """
    w = weights or SelectionWeights()
    w.validate()
    n = len(cs.faces)
    support = np.array([f.support for f in cs.faces], dtype=float)
    support_frac = support / max(cs.n_points, 1)
    roof_frac = cs.roof_coefficients() / max(n, 1)
    costs = -w.data * support_frac + w.roof * roof_frac

    key_ids = {}
    face_key = np.array(
        [key_ids.setdefault(f.plane_key, len(key_ids)) for f in cs.faces]
    )
    edge_faces, edge_keys = [], []
    fixed = {}
    for fid in cs.forced:
        fixed[fid] = 1
    if face_prior:
        pset = set(cs.priors)
        for g in cs.groups:
            inter = pset.intersection(g)
            if len(inter) > 1:
                raise InfeasibleByConstruction(
                    "two preferred faces occupy the same roof stack"
                )
        for fid in cs.priors:
            fixed[fid] = 1
    for key in sorted(cs.edges):
        fids = cs.edges[key]
        if len(fids) >= 2:
            arr = np.array(sorted(fids))
            edge_faces.append(arr)
            edge_keys.append(face_key[arr])
        else:
            f = int(fids[0])
            if fixed.get(f) == 1:
                raise InfeasibleByConstruction(
                    "a required face has an edge no other face can close"
                )
            fixed[f] = 0
    return Program(
        weights=w,
        support_frac=support_frac,
        roof_frac=roof_frac,
        costs=costs,
        constant=w.data,
        crease_weight=w.complexity / max(len(edge_faces), 1),
        edge_faces=edge_faces,
        edge_keys=edge_keys,
        stacks=[np.asarray(g, dtype=int) for g in cs.groups],
        fixed=dict(fixed),
        n_scored_edges=len(edge_faces),
    )


def crease_count(prog: Program, x) -> int:
    """Selected edges whose two faces come from different planes."""
    count = 0
    for faces, keys in zip(prog.edge_faces, prog.edge_keys):
        sel = [k for f, k in zip(faces, keys) if x[f]]
        if len(sel) == 2 and sel[0] != sel[1]:
            count += 1
    return count


def objective_value(prog: Program, x) -> float:
    return prog.constant + float(np.dot(prog.costs, np.asarray(x, dtype=float))) + (
        prog.crease_weight * crease_count(prog, x)
    )


class _Timeout(Exception):
    pass


class _Search:
    """Exact DFS branch and bound over face equivalence classes.

    Two-candidate edges make their faces equal, so the union-find
    classes are the real decision variables.  Unit propagation over
    stack and edge rows runs at every assignment; the bound adds every
    still-possible negative class cost and ignores crease charges,
    which are non-negative.
    """

    def __init__(self, prog: Program):
        self.prog = prog
        n = len(prog.costs)
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for faces in prog.edge_faces:
            if len(faces) == 2:
                ra, rb = find(int(faces[0])), find(int(faces[1]))
                if ra != rb:
                    # keep the smaller id as representative
                    parent[max(ra, rb)] = min(ra, rb)
        self.root_of = np.array([find(i) for i in range(n)])
        roots = sorted(set(self.root_of.tolist()))
        self.ccost = {r: 0.0 for r in roots}
        for i in range(n):
            self.ccost[self.root_of[i]] += float(prog.costs[i])

        self.stacks = []
        self.edges = []
        self.incident = {r: [] for r in roots}
        for g in prog.stacks:
            row = {}
            for f in g:
                r = int(self.root_of[f])
                row[r] = row.get(r, 0) + 1
            entry = sorted(row.items())
            ci = len(self.stacks)
            self.stacks.append(entry)
            for r, _ in entry:
                self.incident[r].append(("s", ci))
        for faces in prog.edge_faces:
            if len(faces) == 2:
                continue  # became an equivalence
            row = {}
            for f in faces:
                r = int(self.root_of[f])
                row[r] = row.get(r, 0) + 1
            entry = sorted(row.items())
            ci = len(self.edges)
            self.edges.append(entry)
            for r, _ in entry:
                self.incident[r].append(("e", ci))

        self.val = {}
        self.trail = []
        self.fix_cost = 0.0
        self.s_neg = sum(min(0.0, self.ccost[r]) for r in roots)
        self.best_obj = np.inf
        self.best_x = None
        self.nodes = 0
        self.roots = roots

    # -- assignment machinery ------------------------------------------------

    def _assign(self, r, v, pending) -> bool:
        cur = self.val.get(r)
        if cur is not None:
            return cur == v
        self.val[r] = v
        self.trail.append(r)
        if v:
            self.fix_cost += self.ccost[r]
        self.s_neg -= min(0.0, self.ccost[r])
        pending.append(r)
        return True

    def _undo_to(self, mark):
        while len(self.trail) > mark:
            r = self.trail.pop()
            if self.val.pop(r):
                self.fix_cost -= self.ccost[r]
            self.s_neg += min(0.0, self.ccost[r])

    def _check_stack(self, ci, pending) -> bool:
        s = 0
        un = []
        for r, m in self.stacks[ci]:
            v = self.val.get(r)
            if v is None:
                un.append((r, m))
            else:
                s += m * v
        if s > 1:
            return False
        for r, m in list(un):
            if m >= 2:  # 2x = 1 has no binary solution
                if not self._assign(r, 0, pending):
                    return False
                un.remove((r, m))
        if s == 1:
            return all(self._assign(r, 0, pending) for r, _ in un)
        if not un:
            return False
        if len(un) == 1:
            return self._assign(un[0][0], 1, pending)
        return True

    def _check_edge(self, ci, pending) -> bool:
        s = 0
        un = []
        for r, m in self.edges[ci]:
            v = self.val.get(r)
            if v is None:
                un.append((r, m))
            else:
                s += m * v
        if s > 2:
            return False
        for r, m in list(un):
            if m > 2 or (s == 1 and m == 2):
                if not self._assign(r, 0, pending):
                    return False
                un.remove((r, m))
        if s == 2:
            return all(self._assign(r, 0, pending) for r, _ in un)
        if s == 1:
            if not un:
                return False
            if len(un) == 1:
                return self._assign(un[0][0], 1, pending)
            return True
        if len(un) == 1 and un[0][1] == 1:
            # a lone candidate cannot reach a sum of two
            return self._assign(un[0][0], 0, pending)
        return True

    def _propagate(self, pending) -> bool:
        while pending:
            r = pending.pop()
            for kind, ci in self.incident[r]:
                ok = (
                    self._check_stack(ci, pending)
                    if kind == "s"
                    else self._check_edge(ci, pending)
                )
                if not ok:
                    return False
        return True

    # -- search --------------------------------------------------------------

    def _leaf(self):
        x = np.array([self.val[r] for r in self.root_of], dtype=bool)
        obj = objective_value(self.prog, x)
        if obj < self.best_obj - 1e-12:
            self.best_obj = obj
            self.best_x = x

    def _dfs(self, k, order):
        while k < len(order) and order[k] in self.val:
            k += 1
        if k == len(order):
            self._leaf()
            return
        if time.monotonic() > self.deadline:
            raise _Timeout
        r = order[k]
        for v in (0, 1):
            mark = len(self.trail)
            pending = []
            if self._assign(r, v, pending) and self._propagate(pending):
                bound = self.prog.constant + self.fix_cost + self.s_neg
                if bound < self.best_obj - 1e-12:
                    self.nodes += 1
                    self._dfs(k + 1, order)
            self._undo_to(mark)

    def run(self, time_limit) -> Solution:
        t0 = time.monotonic()
        self.deadline = t0 + time_limit
        pending = []
        ok = True
        for f in sorted(self.prog.fixed):
            if not self._assign(int(self.root_of[f]), self.prog.fixed[f], pending):
                ok = False
                break
        # sweep every row once so structural contradictions (for example
        # a stack whose members were merged together) surface before any
        # branching happens
        if ok:
            ok = all(self._check_stack(ci, pending) for ci in range(len(self.stacks)))
        if ok:
            ok = all(self._check_edge(ci, pending) for ci in range(len(self.edges)))
        if ok:
            ok = self._propagate(pending)
        if not ok:
            raise InfeasibleByConstruction(
                "forced faces violate the manifold or stack constraints"
            )
        status = "optimal"
        try:
            self._dfs(0, self.roots)
        except _Timeout:
            if self.best_x is None:
                raise SolverTimeout(
                    f"no selection found within {time_limit:.1f}s", incumbent=None
                ) from None
            status = "timeout"
        if self.best_x is None:
            raise Infeasible("no face subset satisfies the manifold constraints")
        x = self.best_x
        prog = self.prog
        e_d = 1.0 - float(np.dot(prog.support_frac, x))
        e_c = crease_count(prog, x) / max(prog.n_scored_edges, 1)
        e_r = float(np.dot(prog.roof_frac, x))
        return Solution(
            assignment=x,
            objective=float(self.best_obj),
            status=status,
            nodes=self.nodes,
            runtime=time.monotonic() - t0,
            data_term=e_d,
            complexity_term=e_c,
            roof_term=e_r,
        )


def solve_program(prog: Program, time_limit=120.0) -> Solution:
    if len(prog.costs) == 0:
        raise Infeasible("no candidate faces to select from")
    return _Search(prog).run(time_limit)


def solve(cs, weights=None, face_prior=True, time_limit=120.0) -> Solution:
    return solve_program(build_program(cs, weights, face_prior), time_limit)


# ---------------------------------------------------------------------------
# mesh extraction


def _merge_rings(rings):
    """Union of consistently wound coplanar rings, or None if the
    result is not a single simple cycle."""
    directed = {}
    for ring in rings:
        for k in range(len(ring)):
            a, b = ring[k], ring[(k + 1) % len(ring)]
            if (a, b) in directed:
                return None
            directed[(a, b)] = True
    boundary = [(a, b) for (a, b) in directed if (b, a) not in directed]
    succ = {}
    for a, b in boundary:
        if a in succ:
            return None  # pinch vertex
        succ[a] = b
    if not boundary:
        return None
    start = min(succ)
    ring = [start]
    cur = succ[start]
    while cur != start:
        ring.append(cur)
        cur = succ.get(cur)
        if cur is None or len(ring) > len(boundary):
            return None
    if len(ring) != len(boundary):
        return None  # holes or several loops
    return ring


def _dissolve_coplanar(sel, cs):
    """Replace edge-connected groups of same-plane faces by their
    union ring; groups that will not dissolve cleanly stay as-is."""
    by_key = {}
    for fid in sel:
        by_key.setdefault(cs.faces[fid].plane_key, []).append(fid)
    out = []
    for key in sorted(by_key):
        fids = sorted(by_key[key])
        if len(fids) == 1:
            out.append(list(cs.rings[fids[0]]))
            continue
        edge_owner = {}
        adj = {f: set() for f in fids}
        for f in fids:
            ring = cs.rings[f]
            for k in range(len(ring)):
                a, b = ring[k], ring[(k + 1) % len(ring)]
                e = (a, b) if a < b else (b, a)
                if e in edge_owner:
                    g = edge_owner[e]
                    adj[f].add(g)
                    adj[g].add(f)
                else:
                    edge_owner[e] = f
        seen = set()
        for f in fids:
            if f in seen:
                continue
            comp, stack = [], [f]
            seen.add(f)
            while stack:
                x = stack.pop()
                comp.append(x)
                for y in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            comp.sort()
            if len(comp) == 1:
                out.append(list(cs.rings[comp[0]]))
                continue
            merged = _merge_rings([cs.rings[x] for x in comp])
            if merged is None:
                out.extend(list(cs.rings[x]) for x in comp)
            else:
                out.append(merged)
    return out


def extract_mesh(cs, assignment, merge_coplanar=False) -> SurfaceMesh:
    """Assemble the selected faces into a consistently oriented mesh.

    Orientation spreads from the lowest face id by flipping neighbors
    until all shared edges are traversed in opposite directions; each
    closed component is then flipped outward by its signed volume.
    With ``merge_coplanar`` adjacent faces on one plane dissolve into a
    single polygon when their union is a simple ring.
    """
    sel = [i for i in range(len(cs.faces)) if assignment[i]]
    if merge_coplanar:
        pool_rings = _dissolve_coplanar(sel, cs)
    else:
        pool_rings = [list(cs.rings[fid]) for fid in sel]
    vmap = {}
    verts = []
    rings = []
    for pring in pool_rings:
        for v in pring:
            if v not in vmap:
                vmap[v] = len(verts)
                verts.append(cs.vertices[v])
        rings.append([vmap[v] for v in pring])
    use = {}
    for li, ring in enumerate(rings):
        for k in range(len(ring)):
            a, b = ring[k], ring[(k + 1) % len(ring)]
            key = (a, b) if a < b else (b, a)
            use.setdefault(key, []).append((li, a, b))
    flip = [None] * len(rings)
    comps = []
    for start in range(len(rings)):
        if flip[start] is not None:
            continue
        flip[start] = False
        comp = [start]
        queue = [start]
        while queue:
            li = queue.pop()
            ring = rings[li]
            for k in range(len(ring)):
                a, b = ring[k], ring[(k + 1) % len(ring)]
                if flip[li]:
                    a, b = b, a
                key = (a, b) if a < b else (b, a)
                for lj, a2, b2 in use[key]:
                    if lj == li or flip[lj] is not None:
                        continue
                    # the neighbor must run the shared edge b -> a
                    flip[lj] = (a2, b2) == (a, b)
                    comp.append(lj)
                    queue.append(lj)
        comps.append(comp)
    varr = np.asarray(verts)
    oriented = [list(reversed(r)) if flip[i] else list(r) for i, r in enumerate(rings)]
    for comp in comps:
        vol = 0.0
        for li in comp:
            pts = varr[np.asarray(oriented[li], dtype=int)]
            for i in range(1, len(pts) - 1):
                vol += float(np.dot(np.cross(pts[0], pts[i]), pts[i + 1])) / 6.0
        if vol < 0:
            for li in comp:
                oriented[li] = list(reversed(oriented[li]))
    return SurfaceMesh(varr, oriented).finalize()


# ---------------------------------------------------------------------------
# LP export


def write_lp(cs, path, weights=None, face_prior=True):
    """Dump the program in CPLEX LP format for external solvers.

    Each scored edge gets a pairing variable ``y`` (edge sum equals
    ``2 y``) and, when it hosts cross-plane pairs, a crease indicator
    ``z`` driven by ``z >= x_a + x_b - 1`` rows.
    """
    prog = build_program(cs, weights, face_prior)
    obj = []
    for i, c in enumerate(prog.costs):
        obj.append(f"{c:+.12g} x{i}")
    rows = []
    binaries = [f"x{i}" for i in range(len(prog.costs))]
    for k, g in enumerate(prog.stacks):
        lhs = " + ".join(f"x{int(i)}" for i in g)
        rows.append(f" stack{k}: {lhs} = 1")
    for k, (faces, keys) in enumerate(zip(prog.edge_faces, prog.edge_keys)):
        lhs = " + ".join(f"x{int(i)}" for i in faces)
        rows.append(f" edge{k}: {lhs} - 2 y{k} = 0")
        binaries.append(f"y{k}")
        cross = [
            (int(faces[a]), int(faces[b]))
            for a in range(len(faces))
            for b in range(a + 1, len(faces))
            if keys[a] != keys[b]
        ]
        if cross:
            obj.append(f"{prog.crease_weight:+.12g} z{k}")
            binaries.append(f"z{k}")
            for j, (fa, fb) in enumerate(cross):
                rows.append(f" crease{k}_{j}: z{k} - x{fa} - x{fb} >= -1")
    for f in sorted(prog.fixed):
        rows.append(f" fix{f}: x{f} = {prog.fixed[f]}")
    text = "\n".join(
        [
            f"\\ objective constant {prog.constant:+.12g} is not representable here",
            "Minimize",
            " obj: " + " ".join(obj),
            "Subject To",
            *rows,
            "Binary",
            " " + " ".join(binaries),
            "End",
            "",
        ]
    )
    with open(path, "w") as fh:
        fh.write(text)
    return prog
