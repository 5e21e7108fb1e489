"""Acoustic machine-fault detection pipeline.

WAV -> log-mel spectrograms -> autoencoder / LOF / supervised-head
anomaly scoring, with AUC evaluation, t-SNE projection and attention
distance analytics.
"""

__version__ = "0.1.0"
