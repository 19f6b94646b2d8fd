"""anomae: convolutional-autoencoder anomaly detection for grayscale images.

Train on normal images, score by reconstruction error, calibrate a
threshold from the error distribution, evaluate with ROC/AUC. Everything
is float32 and deterministic: a seed pins the corpus, the parameters, the
training trajectory, and every report byte.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import DatasetManifest, ImageRecord, load_records, split_manifest
from .errors import (AnomaeError, BadMagicError, CheckpointError, ChecksumError,
                     ConfigError, DimensionError, PayloadLengthError, PgmParseError,
                     TrailingBytesError, UnsupportedOperationError,
                     UnsupportedVersionError, ValidationError)
from .evaluate import (Histogram, RocCurve, ScoreRecord, ThresholdSpec, build_histogram,
                       calibrate_threshold, classify, emit_report, reconstruction_error,
                       roc_auc, score_records)
from .imaging import AugmentPolicy, augment, hflip, resize_bilinear
from .model import (AutoencoderModel, ModelConfig, build_model, default_config,
                    expected_param_shapes)
from .optim import AdamState, LossValue, adam_step, bce_loss, mse_loss, sgd_step
from .ops import ConvParams, Tensor
from .pgm import encode_pgm, load_pgm, load_pgm_file, save_pgm
from .rng import SeededRng
from .synth import gen_synth, render_anomalous_image, render_normal_image
from .trainer import (EpochRecord, TrainConfig, TrainHistory, evaluate_mean_mse, train)

__version__ = "0.1.0"
