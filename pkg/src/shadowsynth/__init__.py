"""shadowsynth: synthetic shadow/shadow-free/matte triplet generation.

Pipeline stages:

* `matte` renders soft shadow mattes of mesh occluders on a plane,
* `sampler` + `illum` randomize and apply the darkening model,
* `compose` blends darkened layers over backgrounds into triplets,
* `fit` recovers darkening parameters from real or synthetic pairs,
* `metrics` scores removal (RMSE in LAB) and detection (BER) outputs.
"""

from .compose import Provenance, Triplet, batch_synthesize, compose_shadow, synthesize_triplet
from .fit import FitError, FitResult, augment_slope, estimate_params
from .illum import (
    AffineParams,
    SlopeParams,
    darken,
    darken_color_jitter,
    darken_gamma,
    relit,
    to_affine_params,
    to_slope_params,
)
from .imagery import binarize_matte, load_image, load_matte, resize_matte, rgb_to_lab, save_image
from .matte import (
    Camera,
    RenderSettings,
    SceneConfig,
    SceneRanges,
    SphereLight,
    randomize_scene,
    ray_triangle_intersect,
    render_matte,
)
from .mesh import TriangleMesh, Transform, load_mesh, save_obj, unit_cube, unit_square
from .metrics import RegionScores, ber, rmse_lab, score_dataset
from .sampler import (
    SamplerConfig,
    SamplerError,
    sample_params,
    sample_params_ablation,
    sample_params_traced,
)
from .streams import item_rng, substream

__version__ = "0.1.0"
