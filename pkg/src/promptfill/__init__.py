"""Multi-task diffusion inpainting on a synthetic shapes corpus.

One small pixel-space diffusion model covers four inpainting modes --
context-aware filling, text-guided object synthesis, object removal, and
shape-controllable object inpainting -- switched purely through learnable
task-prompt embeddings and classifier-free guidance.
"""

from promptfill.schedule import NoiseSchedule, build_schedule, add_noise
from promptfill.maskgen import (
    BrushParams,
    MaskPair,
    bbox_mask,
    dilate,
    fitting_ratio,
    make_mask_pair,
    random_freeform_mask,
)
from promptfill.textcond import (
    TaskPrompt,
    TextConditioner,
    Vocabulary,
    interpolate_embeddings,
)
from promptfill.denoiser import Denoiser, DenoiserConfig, init_denoiser
from promptfill.dataset import Scene, SceneSpec, TrainingExample, generate_scene, make_training_example
from promptfill.sampler import GuidanceSpec, InpaintRequest, blend_known, guided_noise, inpaint

__version__ = "0.1.0"
