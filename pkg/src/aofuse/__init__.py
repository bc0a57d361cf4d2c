"""aofuse: acoustic-optical 3D surface reconstruction toolkit.

Simulate imaging-sonar and camera measurements of analytic scenes, recover
geometry by optimizing a voxel SDF field through differentiable volumetric
rendering of both modalities, and analyze why the fused measurement model
is better conditioned than either modality alone.
"""

__version__ = "0.1.0"

from .field import FieldModel, GradientBuffer
from .scene import AnalyticScene, Material, Primitive
from .sensors import CameraModel, Pose, SonarModel, TwoViewObservation

__all__ = [
    "AnalyticScene",
    "CameraModel",
    "FieldModel",
    "GradientBuffer",
    "Material",
    "Pose",
    "Primitive",
    "SonarModel",
    "TwoViewObservation",
    "__version__",
]
