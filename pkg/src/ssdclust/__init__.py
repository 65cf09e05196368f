"""Clustering sequences with the state-space dynamics (SSD) distance."""
from .baselines import bp_distance, kl_distance, likelihood_matrix, sym_distance, yy_distance
from .baselines import train_per_sequence_models
from .data import LabeledDataset, MoHMMConfig, generate_mohmm, load_sequences, save_sequences
from .data import window_subsequences
from .evaluation import AccuracyReport, clustering_accuracy, segmentation_error
from .hmm import GaussianHMM, TrainConfig, baum_welch, forward_backward, log_likelihood, sample
from .spectral import Segmentation, kmeans, spectral_cluster, spectral_segment
from .ssd import SSDOptions, bhattacharyya_affinity, induced_transition, ssd_distance_matrix
from .ssd import ssd_distances, ssd_pair_distance

__version__ = "0.1.0"
