from .vectors import (
    Dataset,
    DimensionError,
    GroundTruth,
    Vector,
    euclidean_distance,
    ground_truth,
    knn_bruteforce,
    recall,
    split_queries,
    synthetic_dataset,
)
from .fvecs import FormatError, read_fvecs, read_ivecs, write_fvecs, write_ivecs
