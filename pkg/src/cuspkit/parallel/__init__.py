"""Parallel robots: constraint models, direct kinematics, singularities and cusps."""

from .base import (
    AssemblyChangeReport,
    AssemblyMode,
    ParallelAspectMap,
    ParallelModel,
    SeparableModel,
    SingularityValue,
    aspect_path,
    aspects_parallel,
    characteristic_surfaces_parallel,
    cusp_measures,
    cuspidal_configuration_check,
    direct_kinematics_multistart,
    fold_cusps_2d,
    inverse_kinematics_parallel,
    nonsingular_assembly_change,
    parallel_singularity,
    project_to_singular,
    track_assembly,
)
from .models import (
    Model2RPRRR,
    Model3PPPSOrientation,
    Model3RPR,
    ModelRPR2RPR,
    ModelRPRPR,
    ModelSpherical2UPSU,
)
from .rpr3 import (
    JointSection,
    SectionCusp,
    classify_analytic_3rpr,
    cusp_loop,
    direct_kinematics_3rpr,
    joint_section_analysis,
    mode_count_grid,
)
