from smartexec.learning.data import (
    BINARY_CLASSES, CHUNK_CLASSES, PREFETCH_CLASSES, Dataset, DatasetError,
    read_dataset, train_test_split, write_dataset,
)
from smartexec.learning.logistic import (
    BinaryModel, FitInfo, MultinomialModel, TrainConfig, TrainingError, TrainState,
    accuracy, cross_entropy, multinomial_gradient, multinomial_hessian,
    predict_binary, predict_class, sigmoid, softmax, softmax_probs,
    train_binary_irls, train_multinomial_newton,
)
from smartexec.learning.normalize import Normalizer, apply_normalizer, fit_normalizer
from smartexec.learning.selection import information_gain, select_features_info_gain
from smartexec.learning.weights import (
    WeightsBundle, WeightsFormatError, load_weights, parse_weights, save_weights,
    zero_bundle,
)

__all__ = [
    "BINARY_CLASSES", "CHUNK_CLASSES", "PREFETCH_CLASSES", "Dataset", "DatasetError",
    "read_dataset", "train_test_split", "write_dataset",
    "BinaryModel", "FitInfo", "MultinomialModel", "TrainConfig", "TrainingError",
    "TrainState", "accuracy", "cross_entropy", "multinomial_gradient",
    "multinomial_hessian", "predict_binary", "predict_class", "sigmoid", "softmax",
    "softmax_probs", "train_binary_irls", "train_multinomial_newton",
    "Normalizer", "apply_normalizer", "fit_normalizer",
    "information_gain", "select_features_info_gain",
    "WeightsBundle", "WeightsFormatError", "load_weights", "parse_weights",
    "save_weights", "zero_bundle",
]
