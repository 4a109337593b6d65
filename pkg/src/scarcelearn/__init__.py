"""Scarce-label deep learning for EEG engagement assessment.

Signal preprocessing, PSD features, RBM pretraining, deep classifier and
deep autoencoder fine-tuning with dropout, linear SVM classification, and
an experiment harness running both evaluation protocols on synthetic data.
"""

__version__ = "0.1.0"
