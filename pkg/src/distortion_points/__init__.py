"""Detection of distortion points on closed triangle meshes by voting over random cuts."""

from .cutgen import CutResult, RngStream, handle_loops, random_genus0_cut, to_disk
from .detect import CandidateSet, DistortionField, detect_distortion_triangles, region_threshold, triangles_to_candidates
from .mesh import EdgePath, MeshError, TopologyError, TriMesh, cut_along, fill_holes, genus, is_disk, n_ring
from .objio import ObjParseError, load_obj, save_obj
from .param import (
    JacobianField,
    OptimizerConfig,
    amips_energy,
    iso_distortion,
    jacobians,
    local_frames,
    mips_energy,
    optimize_acap,
    tutte_embed,
)
from .pipeline import (
    DistortionReport,
    PipelineConfig,
    PipelineError,
    detect_points,
    final_parameterize,
    mst_cut,
)
from .simplify import SimplifyResult, map_back, qem_simplify
from .vote import DistortionPointSet, VoteTally, post_filter, select, tally

__version__ = "0.1.0"
