"""
Cutting closed meshes into disks
================================

A sphere needs one path; a torus needs its handle loops first.
"""

from distortion_points import shapes
from distortion_points.cutgen import RngStream, handle_loops, random_genus0_cut, to_disk
from distortion_points.mesh import genus, is_disk, n_boundary_loops

sphere = shapes.icosphere(3)
res = random_genus0_cut(sphere, RngStream(seed=1))
path = res.paths[0]
print(f"sphere: genus {genus(sphere)}, cut path of {len(path.vertices)} vertices")
print("  disk:", is_disk(res.disk), " boundary loops:", n_boundary_loops(res.disk))

torus = shapes.torus(48, 24)
print(f"\ntorus: genus {genus(torus)}, {torus.n_vertices} vertices")
loops = handle_loops(torus, RngStream(seed=1))
print("  handle loops:", [len(loop.vertices) for loop in loops])

# every randomized run gives a different but valid disk
for r in range(3):
    cut = to_disk(torus, RngStream(seed=1, stream=r))
    d = cut.disk
    print(f"  run {r}: disk={is_disk(d)}  vertices={d.n_vertices}  fill triangles={int(d.filled.sum())}")
