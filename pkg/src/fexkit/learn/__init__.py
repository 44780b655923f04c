from .cv import (
    DEFAULT_GRIDS,
    CvPlan,
    decision_function,
    grid_search_cv,
    leave_one_group_out,
    predict,
    predict_proba,
    stratified_folds,
    train,
)
from .forest import train_forest
from .logistic import train_logistic
from .model import (
    TrainedModel,
    dumps_model,
    dumps_pca,
    load_model,
    load_pca,
    model_from_dict,
    model_to_dict,
    save_model,
    save_pca,
)
from .pls import fit_pls, pls_predict
from .rng import SplitMix64
from .svm import train_svm

__all__ = [
    "DEFAULT_GRIDS",
    "CvPlan",
    "SplitMix64",
    "TrainedModel",
    "decision_function",
    "dumps_model",
    "dumps_pca",
    "fit_pls",
    "grid_search_cv",
    "leave_one_group_out",
    "load_model",
    "load_pca",
    "model_from_dict",
    "model_to_dict",
    "pls_predict",
    "predict",
    "predict_proba",
    "save_model",
    "save_pca",
    "stratified_folds",
    "train",
    "train_forest",
    "train_logistic",
    "train_svm",
]
