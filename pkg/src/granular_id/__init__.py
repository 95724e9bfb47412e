"""Granular material identification from six-axis force/torque recordings."""

from .classify import ECOCModel, build_ovo_coding, ecoc_predict, ecoc_train, train_linear_svm
from .container import load_dataset, load_model, save_dataset, save_model
from .dataio import ingest
from .evaluation import compare_spaces, make_split_plan, run_experiment
from .features import SPACE_IDS, FeatureSpaceSpec, apply_extractor, fit_extractor
from .signal import Dataset, FeatureVector, FTSignal, LabeledSample

__version__ = "0.1.0"

__all__ = [
    "Dataset", "ECOCModel", "FTSignal", "FeatureSpaceSpec", "FeatureVector", "LabeledSample", "SPACE_IDS",
    "apply_extractor", "build_ovo_coding", "compare_spaces", "ecoc_predict", "ecoc_train", "fit_extractor",
    "ingest", "load_dataset", "load_model", "make_split_plan", "run_experiment", "save_dataset", "save_model",
    "train_linear_svm",
]
