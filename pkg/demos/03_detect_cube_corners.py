"""
Voting for distortion points on a cube
======================================

Each randomized run cuts the cube, flattens it conformally and reports the
vertices where isometric distortion peaks. Vertices reported by at least
three of ten runs are kept. On a finely tessellated cube they are the eight
corners; coarser grids can miss one.
"""

import numpy as np

from distortion_points import shapes
from distortion_points.pipeline import PipelineConfig, detect_points

cube = shapes.cube_grid(29)
print(f"cube: {cube.n_vertices} vertices")

result = detect_points(cube, PipelineConfig(seed=0))
for d in result.runs:
    print(f"  run {d.stream}: {d.n_candidates} candidates, {d.iterations} iterations")

print("\npoints (vertex, votes):")
for v, votes in result.points.points:
    print(f"  {v:5d} {votes:3d}  at {np.round(cube.vertices[v], 3)}")

# a sphere has no distinguished points
sphere = shapes.icosphere(3)
print("\nsphere points:", detect_points(sphere).points.points)
