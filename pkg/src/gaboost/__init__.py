"""Genetic feature selection and hyperparameter search for boosted trees."""

__version__ = "0.1.0"
