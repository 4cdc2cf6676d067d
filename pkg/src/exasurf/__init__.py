"""exasurf: scalar volumes in, compressed attributed surface meshes out."""

from .volume import Volume3D, import_volume, crop_volume, gauss_resample
from .analyze import HistogramModel, build_histogram, estimate_sigma, estimate_threshold, estimate_snr
from .denoise import tukey_weight, denoise_joint_bilateral, median_filter3
from .phantom import PhantomSpec, generate_phantom

__version__ = "0.1.0"
