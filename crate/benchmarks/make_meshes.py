#!/usr/bin/env python3
"""Generate the benchmark meshes (Gmsh ASCII 2.2, SI units) with Triangle.

    python3 benchmarks/make_meshes.py [--out benchmarks/meshes]

Outputs:
    tension_h1.msh     notched tension, lower half, h = 1 mm
    tension_h05.msh    notched tension, lower half, h = 0.5 mm
    kalthoff_h1.msh    Kalthoff-Winkler plate, upper half, h = 1 mm
    notched_small.msh  small notched rectangle used by the test-suite
"""

import argparse
import math
import os

import numpy as np
import triangle

MM = 1e-3


def subdivide(a, b, h):
    """Points on segment a-b (a included, b excluded) spaced at most h."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(1, math.ceil(np.linalg.norm(b - a) / h - 1e-9))
    return [a + (b - a) * k / n for k in range(n)]


def polygon(corners, h):
    """Closed polyline through corners, subdivided at spacing h."""
    pts = []
    for i, a in enumerate(corners):
        pts.extend(subdivide(a, corners[(i + 1) % len(corners)], h))
    segs = [(i, (i + 1) % len(pts)) for i in range(len(pts))]
    return pts, segs


def triangulate(pts, segs, h):
    area = math.sqrt(3) / 4 * h * h
    tri = triangle.triangulate(
        {"vertices": np.array(pts), "segments": np.array(segs)},
        f"pq30a{area:.16f}",
    )
    return tri["vertices"], tri["triangles"]


def boundary_edges(tris):
    count = {}
    for t in tris:
        for i in range(3):
            a, b = int(t[i]), int(t[(i + 1) % 3])
            key = (min(a, b), max(a, b))
            count[key] = count.get(key, 0) + 1
    return [e for e, c in count.items() if c == 1]


def write_msh(path, nodes, tris, facets, names):
    """facets: list of (a, b, tag_name); names: ordered tag names."""
    ids = {name: k + 1 for k, name in enumerate(names)}
    with open(path, "w") as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write(f"$PhysicalNames\n{len(names) + 1}\n")
        for name in names:
            f.write(f'1 {ids[name]} "{name}"\n')
        f.write(f'2 {len(names) + 1} "domain"\n$EndPhysicalNames\n')
        f.write(f"$Nodes\n{len(nodes)}\n")
        for i, p in enumerate(nodes):
            f.write(f"{i + 1} {p[0]:.17g} {p[1]:.17g} 0\n")
        f.write("$EndNodes\n")
        f.write(f"$Elements\n{len(facets) + len(tris)}\n")
        k = 1
        for a, b, name in facets:
            f.write(f"{k} 1 2 {ids[name]} {ids[name]} {a + 1} {b + 1}\n")
            k += 1
        dom = len(names) + 1
        for t in tris:
            f.write(f"{k} 2 2 {dom} {dom} {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
            k += 1
        f.write("$EndElements\n")


def orient(nodes, tris):
    out = []
    for t in tris:
        a, b, c = (nodes[i] for i in t)
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        out.append([t[0], t[1], t[2]] if cross > 0 else [t[0], t[2], t[1]])
    return out


def tag_edges(nodes, edges, classify):
    facets = []
    for a, b in edges:
        name = classify(nodes[a], nodes[b])
        if name is None:
            raise RuntimeError(f"untagged boundary edge {nodes[a]} - {nodes[b]}")
        facets.append((a, b, name))
    return facets


def close(x, y, tol=1e-9):
    return abs(x - y) < tol


def tension(h):
    """Lower half [0, 100] x [0, 20] mm; notch faces y = 20 for x < 50."""
    w, t, notch = 100 * MM, 20 * MM, 50 * MM
    corners = [(0, 0), (w, 0), (w, t), (notch, t), (0, t)]
    pts, segs = polygon(corners, h)
    nodes, tris = triangulate(pts, segs, h)
    tris = orient(nodes, tris)

    def classify(p, q):
        if close(p[1], 0) and close(q[1], 0):
            return "bottom"
        if close(p[1], t) and close(q[1], t):
            return "crack" if max(p[0], q[0]) <= notch + 1e-12 else "symmetry"
        if close(p[0], 0) and close(q[0], 0):
            return "left"
        if close(p[0], w) and close(q[0], w):
            return "right"
        return None

    facets = tag_edges(nodes, boundary_edges(tris), classify)
    return nodes, tris, facets, ["bottom", "crack", "symmetry", "left", "right"]


def kalthoff(h):
    """Upper half [0, 100] x [0, 100] mm, zero-width slit y = 25 mm for x < 50 mm."""
    w, hgt, ys, xs = 100 * MM, 100 * MM, 25 * MM, 50 * MM
    corners = [(0, 0), (w, 0), (w, hgt), (0, hgt), (0, ys)]
    pts, segs = polygon(corners, h)
    # the slit is an interior constrained segment from (0, ys) to (xs, ys)
    start = len(pts)
    slit = subdivide((0, ys), (xs, ys), h)[1:] + [np.array([xs, ys])]
    pts.extend(slit)
    left_ys = next(i for i, p in enumerate(pts[:start]) if close(p[0], 0) and close(p[1], ys))
    chain = [left_ys] + list(range(start, len(pts)))
    segs.extend((chain[i], chain[i + 1]) for i in range(len(chain) - 1))
    nodes, tris = triangulate(pts, segs, h)
    nodes = [list(p) for p in nodes]

    # duplicate slit nodes (tip excluded) for the triangles above the slit
    on_slit = {
        i for i, p in enumerate(nodes) if close(p[1], ys) and p[0] < xs - 1e-12
    }
    copy = {}
    for i in sorted(on_slit):
        copy[i] = len(nodes)
        nodes.append(list(nodes[i]))
    new_tris = []
    for t in tris:
        cy = sum(nodes[i][1] for i in t) / 3
        new_tris.append([copy[i] if (i in copy and cy > ys) else int(i) for i in t])
    tris = orient(nodes, new_tris)

    def classify(p, q):
        if close(p[1], 0) and close(q[1], 0):
            return "symmetry"
        if close(p[0], 0) and close(q[0], 0):
            return "impact" if max(p[1], q[1]) <= ys + 1e-12 else "left"
        if close(p[1], ys) and close(q[1], ys):
            return "notch"
        if close(p[0], w) and close(q[0], w):
            return "right"
        if close(p[1], hgt) and close(q[1], hgt):
            return "top"
        return None

    facets = tag_edges(nodes, boundary_edges(tris), classify)
    return nodes, tris, facets, ["symmetry", "impact", "left", "notch", "right", "top"]


def notched_small():
    """20 x 10 mm rectangle with a 5 x 2 mm rectangular notch on the left."""
    h = 1.5 * MM
    corners = [(0, 0), (20 * MM, 0), (20 * MM, 10 * MM), (0, 10 * MM), (0, 6 * MM), (5 * MM, 6 * MM),
               (5 * MM, 4 * MM), (0, 4 * MM)]
    pts, segs = polygon(corners, h)
    nodes, tris = triangulate(pts, segs, h)
    tris = orient(nodes, tris)

    def classify(p, q):
        if close(p[1], 0) and close(q[1], 0):
            return "bottom"
        if close(p[1], 10 * MM) and close(q[1], 10 * MM):
            return "top"
        if close(p[0], 20 * MM) and close(q[0], 20 * MM):
            return "right"
        if close(p[0], 0) and close(q[0], 0):
            return "left"
        return "notch"

    facets = tag_edges(nodes, boundary_edges(tris), classify)
    return nodes, tris, facets, ["bottom", "top", "right", "left", "notch"]


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=os.path.join(here, "meshes"))
    ap.add_argument("--test-data", default=os.path.join(here, "..", "crates", "core", "tests", "data"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    os.makedirs(args.test_data, exist_ok=True)
    jobs = [
        (os.path.join(args.out, "tension_h1.msh"), lambda: tension(1 * MM)),
        (os.path.join(args.out, "tension_h05.msh"), lambda: tension(0.5 * MM)),
        (os.path.join(args.out, "kalthoff_h1.msh"), lambda: kalthoff(1 * MM)),
        (os.path.join(args.test_data, "notched_small.msh"), notched_small),
    ]
    for path, make in jobs:
        nodes, tris, facets, names = make()
        write_msh(path, nodes, tris, facets, names)
        print(f"{path}: {len(nodes)} nodes, {len(tris)} triangles, {len(facets)} boundary facets")


if __name__ == "__main__":
    main()
