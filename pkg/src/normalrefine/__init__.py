"""Surface normals from depth images with discontinuity-aware gradient refinement."""

from .backends import CP2TV, MEAN, MEDIAN, THREE_F2N, BackendChoice, normals_3f2n, normals_cp2tv
from .dp import DpConfig, dp_iterate, dp_sweeps, run_dp
from .formats import normal_to_rgb, read_depth_png16, read_intrinsics, read_pfm, write_pfm
from .grid import CameraIntrinsics, DepthGrid, NormalMap, Pixel, invert_depth
from .initializer import PD, TV, GradientField, init_bundle
from .metrics import MetricReport, aae, add_gaussian_noise, car, evaluate, pd_norm, pgp
from .pipeline import PipelineConfig, PipelineError, estimate_normals, run_pipeline
from .refiner import newton_derivative_oracle, rpi_step
from .scenes import SCENE_KINDS, SceneSpec, parse_scene, render

__version__ = "0.1.0"
