"""
Simplifying before detection
============================

Large meshes are reduced with quadric-error edge collapses, and points
found on the coarse mesh are moved to the nearest input vertex.
"""

import time

from distortion_points import shapes
from distortion_points.mesh import genus
from distortion_points.pipeline import PipelineConfig, detect_points
from distortion_points.simplify import map_back, qem_simplify
from distortion_points.vote import DistortionPointSet

cube = shapes.cube_grid(30)
t0 = time.perf_counter()
res = qem_simplify(cube, 1500)
print(f"{cube.n_vertices} -> {res.mesh.n_vertices} vertices in {time.perf_counter() - t0:.1f} s"
      f" ({res.status}), genus {genus(cube)} -> {genus(res.mesh)}")

coarse = DistortionPointSet([(0, 5), (1, 4)])
print("mapped back:", map_back(coarse, res.mesh, cube).points)

# the pipeline does the same when the mesh exceeds N_v_thres
cfg = PipelineConfig(N_v_thres=1500)
found = detect_points(cube, cfg)
print("simplified:", found.points.meta["simplified"], " points:", found.points.vertices)
