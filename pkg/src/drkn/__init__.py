"""Deep radial kernel networks.

Constructive ReLU fold networks that approximate radially symmetric
functions with audited error and size bounds, and a pipeline that turns
trained RBF-kernel SVMs into those networks for further fine-tuning by
gradient descent.
"""

__version__ = "0.1.0"

from .estimators import DrknClassifier, RbfNetClassifier, SmoSvmClassifier
from .folds import (BoundReport, FoldSpec, audit_bounds, build_3layer_radial,
                    build_lipschitz1d, build_norm2, build_normd,
                    build_radial_net, make_fold_layer)
from .models import (DrknModel, RbfModel, assemble_drkn, assemble_rbf_baseline,
                     drkn_decision, drkn_scores, rbf_scores)
from .network import GradientBundle, Layer, Network, deserialize, grad_check, serialize
from .profiles import (RadialProfile, fit_wendland_to_gaussian, gaussian_profile,
                       wendland_q31)
from .svm import (Dataset, MultiClassSvm, load_dataset_csv, load_dataset_libsvm,
                  parse_libsvm_model, parse_ovr_model_json, smo_train,
                  split_dataset, svm_decision, svm_scores)
from .training import History, TrainConfig, export_history_csv, softmax_xent, train

__all__ = [
    "__version__",
    "BoundReport", "FoldSpec", "audit_bounds", "build_3layer_radial",
    "build_lipschitz1d", "build_norm2", "build_normd", "build_radial_net",
    "make_fold_layer",
    "GradientBundle", "Layer", "Network", "deserialize", "grad_check", "serialize",
    "RadialProfile", "fit_wendland_to_gaussian", "gaussian_profile", "wendland_q31",
    "Dataset", "MultiClassSvm", "load_dataset_csv", "load_dataset_libsvm",
    "parse_libsvm_model", "parse_ovr_model_json", "smo_train", "split_dataset",
    "svm_decision", "svm_scores",
    "DrknModel", "RbfModel", "assemble_drkn", "assemble_rbf_baseline",
    "drkn_decision", "drkn_scores", "rbf_scores",
    "History", "TrainConfig", "export_history_csv", "softmax_xent", "train",
    "DrknClassifier", "RbfNetClassifier", "SmoSvmClassifier",
]
