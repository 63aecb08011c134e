"""Completed Fisher vector encoding: dense descriptors, PCA, GMM training,
BoW/FV/CFV encoders, linear SVM classification and correlation diagnostics."""

__version__ = "0.1.0"
