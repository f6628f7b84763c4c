from .kmeans import KMeansResult, kmeans
from .classifier import (
    CentroidClassifier,
    ClassifierModel,
    Hyperparams,
    MLPClassifier,
    predict_proba,
    remove_output,
    softmax,
    train_classifier,
)
