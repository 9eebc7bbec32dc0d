"""
Cutting through the points and flattening
=========================================

Join the cube corners with a spanning tree of shortest paths, cut along
it and minimize the isometric energy. A random cut that misses the corners
leaves far more distortion behind.
"""

import numpy as np

from distortion_points import objio, shapes
from distortion_points.cutgen import shortest_edge_path
from distortion_points.pipeline import final_parameterize, mst_cut

cube = shapes.cube_grid(12)
corners = [i for i, x in enumerate(cube.vertices) if np.all((x == 0) | (x == 1))]

cut = mst_cut(cube, corners)
pp, report = final_parameterize(cube, cut)
print(f"corner cut: delta_avg {report.delta_avg:.4f}  delta_max {report.delta_max:.3f}"
      f"  cut length {report.cut_length_ratio:.3f} of all edges")

# a path across two faces that stays away from every corner
a = int(np.argmin(np.linalg.norm(cube.vertices - [0.5, 0.3, 0.0], axis=1)))
b = int(np.argmin(np.linalg.norm(cube.vertices - [0.5, 0.0, 0.7], axis=1)))
_, rand = final_parameterize(cube, [shortest_edge_path(cube, a, b)])
print(f"random cut: delta_avg {rand.delta_avg:.4f}  delta_max {rand.delta_max:.3f}")

objio.save_obj(pp.disk, "cube_uv.obj", uv=pp.uv)
print("\nwrote cube_uv.obj")
print(report.to_json())
