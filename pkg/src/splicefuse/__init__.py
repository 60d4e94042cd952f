"""Decision-level fusion of three image-splicing detectors.

Per-tool texture features are reduced by boosting feature selection,
classified by grid-searched RBF SVMs, calibrated to probabilities by a
fitted sigmoid, and fused by a Takagi-Sugeno neuro-fuzzy model into one
authentic/forged verdict.
"""

from .anfis import (AnfisModel, FuzzyRule, GaussianMf, fis_eval, fis_eval_batch,
                    fused_verdict, init_fis, subtractive_cluster, train_hybrid)
from .boostsel import (ALL_FEATURES, SelectionResult, StumpLearner, best_stump,
                       select_features, update_weights)
from .calibrate import SigmoidCalibrator, fit_sigmoid, sigmoid
from .dataset import (ImageBlock, LoadReport, SplitPlan, load_corpus, make_splits,
                      read_block_pixels)
from .evaluate import (ConfusionCounts, RunReport, SummaryTable, aggregate_runs,
                       confusion, sensitivity, specificity)
from .features import (FeatureVector, Glcm, HaarPyramid, RunLengthMatrix, Tool,
                       edge_images, glcm, glcm_edge_features, haar_dwt2,
                       haar_idwt2, run_length_features, run_length_matrix,
                       tool_features, wavelet_features)
from .pipeline import (ExperimentBundle, PipelineConfig, cmd_evaluate, cmd_extract,
                       cmd_predict, cmd_train)
from .svm import (GridSearchReport, KernelParams, SvmModel, decision_value,
                  decision_values, grid_search, rbf_kernel, train_svm)

__version__ = "0.1.0"

__all__ = [
    "ALL_FEATURES", "AnfisModel", "ConfusionCounts", "ExperimentBundle",
    "FeatureVector", "FuzzyRule", "GaussianMf", "Glcm", "GridSearchReport",
    "HaarPyramid", "ImageBlock", "KernelParams", "LoadReport", "PipelineConfig",
    "RunLengthMatrix", "RunReport", "SelectionResult", "SigmoidCalibrator",
    "SplitPlan", "StumpLearner", "SummaryTable", "SvmModel", "Tool",
    "aggregate_runs", "best_stump", "cmd_evaluate", "cmd_extract", "cmd_predict",
    "cmd_train", "confusion", "decision_value", "decision_values", "edge_images",
    "fis_eval", "fis_eval_batch", "fit_sigmoid", "fused_verdict", "glcm",
    "glcm_edge_features", "grid_search", "haar_dwt2", "haar_idwt2", "init_fis",
    "load_corpus", "make_splits", "rbf_kernel", "read_block_pixels",
    "run_length_features", "run_length_matrix", "select_features", "sensitivity",
    "sigmoid", "specificity", "subtractive_cluster", "tool_features",
    "train_hybrid", "train_svm", "update_weights", "wavelet_features",
]
