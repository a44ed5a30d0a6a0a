"""Goodness-of-fit spectrum sensing over eigenvalue test statistics."""

from .capture import IqCapture, read_capture, write_capture
from .channel import ChannelProfile, Fading, apply_channel, epa_profile, noise_floor_inject
from .detectors import (ALL_KINDS, StatKind, TestStatistic, gamma_am_gm, gamma_me_am,
                        gamma_me_gm, gamma_mme, statistic, statistics_batch)
from .dists import (ChiSquare, EmpiricalReference, Exponential, Gamma, Lognormal, Normal,
                    NullCdf)
from .eig import CovarianceMatrix, EigSpectrum, eigenvalues, hermitian_eig, sample_covariance
from .errors import (CaptureFormatError, ConfigError, ConvergenceError, DegenerateCdfError,
                     DegenerateSpectrumError, NumericError, SpecSenseError,
                     SupportMismatchError)
from .experiment import (DetectionReport, ExperimentConfig, run_detection,
                         run_null_calibration, run_roc_sweep)
from .fitting import Family, FitResult, aic, fit_candidates, fit_mle, gof_p_value, select_best
from .gof import (GofResult, GofTest, ThresholdTable, ad_critical_table, ad_statistic,
                  calibrate_critical_values, cm_statistic, ecdf, kl_divergence,
                  kl_from_samples, ks_statistic, run_gof)
from .signal import SignalConfig, Waveform, generate_noise, generate_pu_tone, mix

__version__ = "0.1.0"
